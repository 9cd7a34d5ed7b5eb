use serde::{Deserialize, Serialize};

use super::estimate::z_quantile;

/// One point of a curve with a confidence band. Serialized as the CSV
/// columns `t, estimate, lo, hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson(successes: u64, n: u64, confidence: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = z_quantile(confidence);
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Empirical survival `P{X > t}` on an increasing grid, with Wilson bands.
pub fn tail_curve(samples: &[f64], t_grid: &[f64], confidence: f64) -> Vec<CurvePoint> {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as u64;
    t_grid
        .iter()
        .map(|&t| {
            let below = sorted.partition_point(|&x| x <= t) as u64;
            let k = n - below;
            let (lo, hi) = wilson(k, n, confidence);
            CurvePoint {
                t,
                estimate: if n == 0 { 0.0 } else { k as f64 / n as f64 },
                lo,
                hi,
            }
        })
        .collect()
}

/// Geometric grid from `lo` to `hi` inclusive with `per_decade` points per decade.
pub fn geometric_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let steps = (decades * per_decade as f64).round().max(1.0) as usize;
    (0..=steps)
        .map(|i| lo * 10f64.powf(decades * i as f64 / steps as f64))
        .collect()
}
