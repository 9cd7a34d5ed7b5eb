//! Heuristic finiteness diagnostic for moments.
//!
//! No finite sample decides whether a moment is finite. The diagnostic
//! watches how running means evolve as the sample doubles: a finite mean
//! settles, an infinite one keeps growing by a roughly constant factor.
//! Values are split into interleaved groups and the per-doubling growth is
//! the geometric mean over groups, which keeps one extreme draw from
//! dominating the verdict. Thresholds (5% and 25%) are tuned on the stock
//! boundary laws and carry no error-rate guarantee.

use serde::{Deserialize, Serialize};

use crate::parallel::replicate;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converging,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchSchedule {
    pub first_log2: u32,
    pub last_log2: u32,
    pub groups: usize,
}

impl Default for BatchSchedule {
    fn default() -> Self {
        Self {
            first_log2: 12,
            last_log2: 22,
            groups: 256,
        }
    }
}

impl BatchSchedule {
    pub fn total(&self) -> usize {
        1 << self.last_log2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub samples: u64,
    pub pooled_mean: f64,
    /// Growth factor from the previous batch; 1 for the first.
    pub growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentDiagnostic {
    pub verdict: Verdict,
    pub trace: Vec<TracePoint>,
}

fn group_means(values: &[f64], batch: usize, groups: usize) -> Vec<f64> {
    let per = batch / groups;
    (0..groups)
        .map(|g| (0..per).map(|j| values[g + j * groups]).sum::<f64>() / per as f64)
        .collect()
}

/// Runs the diagnostic on nonnegative `values` (at least `schedule.total()`).
pub fn moment_growth_diagnostic(values: &[f64], schedule: &BatchSchedule) -> MomentDiagnostic {
    assert!(values.len() >= schedule.total(), "not enough values for the schedule");
    assert!(schedule.first_log2 < schedule.last_log2);
    assert!((1usize << schedule.first_log2) >= schedule.groups);
    let mut trace = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    for k in schedule.first_log2..=schedule.last_log2 {
        let batch = 1usize << k;
        let means = group_means(values, batch, schedule.groups);
        let pooled = means.iter().sum::<f64>() / means.len() as f64;
        let growth = match &prev {
            None => 1.0,
            Some(p) => {
                let logs: Vec<f64> = p
                    .iter()
                    .zip(&means)
                    .filter_map(|(&a, &b)| match (a > 0.0, b > 0.0) {
                        (true, _) => Some((b / a).ln()),
                        (false, false) => Some(0.0),
                        (false, true) => None,
                    })
                    .collect();
                if logs.is_empty() {
                    f64::INFINITY
                } else {
                    (logs.iter().sum::<f64>() / logs.len() as f64).exp()
                }
            }
        };
        trace.push(TracePoint {
            samples: batch as u64,
            pooled_mean: pooled,
            growth,
        });
        prev = Some(means);
    }
    let last: Vec<f64> = trace.iter().rev().take(3).map(|t| t.growth).collect();
    let verdict = if last.iter().all(|g| (g - 1.0).abs() < 0.05) {
        Verdict::Converging
    } else if last.iter().all(|&g| g > 1.25) {
        Verdict::Diverging
    } else {
        Verdict::Inconclusive
    };
    MomentDiagnostic { verdict, trace }
}

/// Draws `schedule.total()` values in parallel from `(seed, tag)` and runs
/// the diagnostic.
pub fn diagnose<F>(sampler: F, schedule: &BatchSchedule, seed: u64, tag: &str) -> MomentDiagnostic
where
    F: Fn(&mut Stream) -> f64 + Sync + Send,
{
    let base = Stream::for_tag(seed, tag);
    let values = replicate(schedule.total(), &base, |_, s| sampler(s));
    moment_growth_diagnostic(&values, schedule)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BatchSchedule {
        BatchSchedule {
            first_log2: 10,
            last_log2: 18,
            groups: 64,
        }
    }

    #[test]
    fn constant_converges() {
        let d = diagnose(|_| 3.0, &small(), 1, "c");
        assert_eq!(d.verdict, Verdict::Converging);
        assert!(d.trace.iter().all(|t| t.growth == 1.0));
    }

    #[test]
    fn exponential_converges() {
        let d = diagnose(|s| -s.open01().ln(), &small(), 2, "e");
        assert_eq!(d.verdict, Verdict::Converging);
    }

    #[test]
    fn infinite_mean_diverges() {
        // Pareto with index 1/2.
        let d = diagnose(|s| s.open01().powi(-2), &small(), 3, "p");
        assert_eq!(d.verdict, Verdict::Diverging);
    }

    #[test]
    fn scaling_does_not_change_verdict() {
        let sched = small();
        let base = Stream::for_tag(4, "s");
        let v = replicate(sched.total(), &base, |_, s| s.open01().powf(-0.9));
        let scaled: Vec<f64> = v.iter().map(|x| 1234.5 * x).collect();
        assert_eq!(
            moment_growth_diagnostic(&v, &sched).verdict,
            moment_growth_diagnostic(&scaled, &sched).verdict
        );
    }
}
