use serde::Serialize;

use super::path::{simulate_what, SpinePath};
use crate::brwsim::{martingale_trajectory, BrwCaps};
use crate::error::Result;
use crate::law::{PpLaw, TiltMode};
use crate::parallel::try_replicate;
use crate::rng::Stream;
use crate::stats::{combined_sigma, EstimateReport};

/// Two independent estimates of the same quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub lhs: EstimateReport,
    pub rhs: EstimateReport,
    pub sigma: f64,
    pub pass: bool,
}

impl AgreementReport {
    fn new(lhs: EstimateReport, rhs: EstimateReport) -> Self {
        let sigma = combined_sigma(&lhs, &rhs);
        let pass = (lhs.estimate - rhs.estimate).abs() <= 3.0 * sigma;
        Self { lhs, rhs, sigma, pass }
    }
}

/// Spine paths for `reps` replicates on `Stream::for_tag(seed, tag)`.
pub fn spine_paths(pp: &PpLaw, n: usize, mode: TiltMode, reps: usize, seed: u64, tag: &str, caps: BrwCaps) -> Result<Vec<SpinePath>> {
    let base = Stream::for_tag(seed, tag);
    try_replicate(reps, &base, |_, s| simulate_what(pp, n, mode, s, caps))
}

/// Compares `E W_n h(W_0..W_n)` with `E h(W^_0..W^_n)`.
#[allow(clippy::too_many_arguments)]
pub fn size_biasing_check<H>(pp: &PpLaw, n: usize, h: H, mode: TiltMode, reps: usize, seed: u64, caps: BrwCaps, confidence: f64) -> Result<AgreementReport>
where
    H: Fn(&[f64]) -> f64 + Sync + Send,
{
    let base = Stream::for_tag(seed, "sizebias-lhs");
    let lhs = try_replicate(reps, &base, |_, s| {
        let t = martingale_trajectory(pp, n, s, caps)?;
        Ok(t.w[n] * h(&t.w))
    })?;
    let paths = spine_paths(pp, n, mode, reps, seed, "sizebias-rhs", caps)?;
    let rhs: Vec<f64> = paths.iter().map(|p| p.likelihood * h(&p.what_trajectory())).collect();
    Ok(AgreementReport::new(
        EstimateReport::from_values(&lhs, confidence, seed, &pp.id, "sizebias-lhs"),
        EstimateReport::from_values(&rhs, confidence, seed, &pp.id, "sizebias-rhs"),
    ))
}

/// `E[1 / W^_n]` for `n = 0..=n_max`, all from the same spine paths.
pub fn reciprocal_martingale_check(pp: &PpLaw, n_max: usize, reps: usize, seed: u64, caps: BrwCaps, confidence: f64) -> Result<Vec<EstimateReport>> {
    let paths = spine_paths(pp, n_max, TiltMode::Exact, reps, seed, "reciprocal", caps)?;
    let trajs: Vec<Vec<f64>> = paths.iter().map(|p| p.what_trajectory()).collect();
    Ok((0..=n_max)
        .map(|n| {
            let v: Vec<f64> = trajs.iter().map(|t| 1.0 / t[n]).collect();
            EstimateReport::from_values(&v, confidence, seed, &pp.id, &format!("reciprocal-{n}"))
        })
        .collect())
}

/// Mean of `R_{n,k}` for each `k`, which vanishes because every sibling
/// subtree is an independent mean-one martingale.
pub fn remainder_means(pp: &PpLaw, n: usize, reps: usize, seed: u64, caps: BrwCaps, confidence: f64) -> Result<Vec<EstimateReport>> {
    let paths = spine_paths(pp, n, TiltMode::Exact, reps, seed, "remainder", caps)?;
    Ok((1..=n)
        .map(|k| {
            let v: Vec<f64> = paths.iter().map(|p| p.remainder(k)).collect();
            EstimateReport::from_values(&v, confidence, seed, &pp.id, &format!("remainder-{k}"))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JensenReport {
    pub what: EstimateReport,
    pub majorant: EstimateReport,
    /// Paired `f(W^_n) - f(sum Pi_{k-1} Q_k)`.
    pub difference: EstimateReport,
    pub pass: bool,
}

/// `E f(W^_n) <= E f(sum_{k<=n} Pi_{k-1} Q_k)` for concave nondecreasing
/// `f`, tested on paired values from the same spine.
pub fn jensen_check<F>(pp: &PpLaw, n: usize, f: F, reps: usize, seed: u64, caps: BrwCaps, confidence: f64) -> Result<JensenReport>
where
    F: Fn(f64) -> f64,
{
    let paths = spine_paths(pp, n, TiltMode::Exact, reps, seed, "jensen", caps)?;
    let a: Vec<f64> = paths.iter().map(|p| f(p.what)).collect();
    let b: Vec<f64> = paths.iter().map(|p| f(p.q_majorant())).collect();
    let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let difference = EstimateReport::from_values(&d, confidence, seed, &pp.id, "jensen-diff");
    let pass = difference.estimate <= 3.0 * difference.stderr;
    Ok(JensenReport {
        what: EstimateReport::from_values(&a, confidence, seed, &pp.id, "jensen-what"),
        majorant: EstimateReport::from_values(&b, confidence, seed, &pp.id, "jensen-majorant"),
        difference,
        pass,
    })
}

/// `W^_n` as a stand-in for the limit, flagged as converged when the last
/// three increments shrink and the final one is below `tol (1 + W^_n)`.
pub fn what_limit(trajectory: &[f64], tol: f64) -> (f64, bool) {
    let last = *trajectory.last().expect("non-empty trajectory");
    let inc: Vec<f64> = trajectory.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let converged = match inc.len() {
        0 => true,
        _ => {
            let tail = &inc[inc.len().saturating_sub(3)..];
            tail.windows(2).all(|w| w[1] <= w[0]) && *tail.last().unwrap() <= tol * (1.0 + last)
        }
    };
    (last, converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::{induced_m_law, PpKind};
    use crate::spinesim::spine_step;
    use crate::stats::ks_one_sample;

    fn one_or_two() -> PpLaw {
        PpLaw::gw(1, 2, 0.5, 0.0, 1.0).unwrap()
    }

    fn mixed() -> PpLaw {
        PpLaw::new(
            "mixed",
            1.0,
            PpKind::Finite {
                configs: vec![(vec![0.0, -0.7], 0.5), (vec![0.2], 0.25), (vec![-0.3, -0.3, 0.1], 0.25)],
            },
        )
        .unwrap()
    }

    #[test]
    fn what_mean_matches_second_moment() {
        let pp = one_or_two();
        let paths = spine_paths(&pp, 6, TiltMode::Exact, 100_000, 11, "mean", BrwCaps::default()).unwrap();
        for n in [1usize, 3, 6] {
            let v: Vec<f64> = paths.iter().map(|p| p.what_at(n)).collect();
            let r = EstimateReport::from_values(&v, 0.99, 11, &pp.id, "what");
            let target = 4.0 / 3.0 - (2f64 / 3.0).powi(n as i32) / 3.0;
            assert!(r.within_sigmas(target, 3.0), "n={n}: {r:?} vs {target}");
        }
    }

    #[test]
    fn size_biasing_identity() {
        let pp = one_or_two();
        let caps = BrwCaps::default();
        let r = size_biasing_check(&pp, 1, |w| w[1], TiltMode::Exact, 50_000, 3, caps, 0.99).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.lhs.estimate - 10.0 / 9.0).abs() < 4.0 * r.lhs.stderr);
        let t = 1.2;
        let exceed = move |w: &[f64]| (w.iter().copied().fold(0.0, f64::max) > t) as u8 as f64;
        let r = size_biasing_check(&mixed(), 4, exceed, TiltMode::Exact, 50_000, 4, caps, 0.99).unwrap();
        assert!(r.pass, "{r:?}");
        let r = size_biasing_check(&PpLaw::deterministic_binary(), 5, |w| w.iter().sum(), TiltMode::Exact, 50, 5, caps, 0.99).unwrap();
        assert_eq!((r.lhs.estimate, r.rhs.estimate), (6.0, 6.0));
        assert!(r.pass);
    }

    #[test]
    fn importance_mode_agrees() {
        let pp = mixed();
        let r = size_biasing_check(&pp, 2, |w| w[2].min(2.0), TiltMode::Importance, 50_000, 6, BrwCaps::default(), 0.99).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn reciprocal_is_mean_one() {
        let rs = reciprocal_martingale_check(&one_or_two(), 5, 100_000, 7, BrwCaps::default(), 0.99).unwrap();
        assert_eq!(rs[0].estimate, 1.0);
        for (n, r) in rs.iter().enumerate() {
            assert!(r.within_sigmas(1.0, 3.0) || n == 0, "n={n}: {r:?}");
        }
        let rs = reciprocal_martingale_check(&PpLaw::deterministic_binary(), 4, 20, 7, BrwCaps::default(), 0.99).unwrap();
        assert!(rs.iter().all(|r| r.estimate == 1.0));
    }

    #[test]
    fn remainders_are_centered() {
        for r in remainder_means(&mixed(), 5, 50_000, 8, BrwCaps::default(), 0.99).unwrap() {
            assert!(r.within_sigmas(0.0, 3.0), "{r:?}");
        }
    }

    #[test]
    fn jensen_bound() {
        for pp in [one_or_two(), mixed()] {
            let r = jensen_check(&pp, 6, |x: f64| x.ln_1p(), 20_000, 9, BrwCaps::default(), 0.99).unwrap();
            assert!(r.pass, "{r:?}");
            let r = jensen_check(&pp, 6, |x: f64| x.sqrt(), 20_000, 9, BrwCaps::default(), 0.99).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn spine_m_matches_induced_law() {
        let pp = mixed();
        let law = induced_m_law(&pp).unwrap();
        let mut s = Stream::new(10);
        let ms: Vec<f64> = (0..100_000).map(|_| spine_step(&pp, TiltMode::Exact, &mut s).unwrap().m).collect();
        let ks = ks_one_sample(&ms, &law, 1e-12);
        assert!(ks.pass, "{ks:?}");
    }

    #[test]
    fn limit_flag() {
        assert_eq!(what_limit(&[1.0], 1e-3), (1.0, true));
        assert!(what_limit(&[1.0, 1.5, 1.6, 1.6001], 1e-3).1);
        assert!(!what_limit(&[1.0, 1.1, 1.5, 2.5], 1e-3).1);
    }
}
