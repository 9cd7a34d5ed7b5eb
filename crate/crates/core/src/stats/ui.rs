use serde::Serialize;

use super::estimate::EstimateReport;
use super::moment::{diagnose, BatchSchedule, MomentDiagnostic, Verdict};
use crate::brwsim::{martingale_trajectory, BrwCaps};
use crate::error::Error;
use crate::parallel::replicate;
use crate::error::Result;
use crate::law::{classify_regime, induced_mq_law, AEvaluator, Case, MqLaw, PpLaw, RegimeReport};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UiReport {
    pub horizon: usize,
    /// `E W_n` at the horizon.
    pub mean_w: EstimateReport,
    /// `E W_k` for `k = 0..=horizon`.
    pub mean_trajectory: Vec<f64>,
    pub regime: RegimeReport,
    pub pi_to_zero: bool,
    /// Diagnostic on `W_1 J(log+ W_1)`, sampled in size-biased form.
    pub j_moment: MomentDiagnostic,
    /// `None` when the moment diagnostic is inconclusive.
    pub predicted_ui: Option<bool>,
    pub mean_one: bool,
    /// Replicates dropped after exceeding the population cap. Dropping them
    /// biases the mean downward.
    pub exploded: usize,
    pub agree: Option<bool>,
}

/// `A` and `J` for the spine `M`-law of `pp`, in closed form when `M` is
/// constant.
pub fn spine_a_evaluator(pp: &PpLaw, seed: u64) -> Result<AEvaluator> {
    match pp.spine_constant_m() {
        Some(m) => AEvaluator::closed(&MqLaw::constant(m, 1.0)),
        None => AEvaluator::for_law(&induced_mq_law(pp)?, seed),
    }
}

/// Compares the two conditions for uniform integrability of `W_n`
/// (`Pi_n -> 0` along the spine, finite `E W_1 J(log+ W_1)`) with the
/// Monte Carlo mean of `W_n` at the horizon.
pub fn uniform_integrability_check(pp: &PpLaw, horizon: usize, reps: usize, schedule: &BatchSchedule, seed: u64, caps: BrwCaps, confidence: f64) -> Result<UiReport> {
    let mq = induced_mq_law(pp)?;
    let regime = match pp.spine_constant_m() {
        Some(m) => classify_regime(&MqLaw::constant(m, 1.0), 0, &mut Stream::new(seed))?,
        None => classify_regime(&mq, 1_000_000, &mut Stream::for_tag(seed, "ui-regime"))?,
    };
    let pi_to_zero = matches!(regime.case, Case::C1 | Case::C2);
    let j = spine_a_evaluator(pp, seed)?;
    // E W_1 J(log+ W_1) = E J(log+ Q) for the size-biased Q, which has far
    // less variance than the unbiased product.
    let j_moment = diagnose(
        |s| {
            let lq = pp.spine_mq(s).log_abs_q;
            if lq <= 0.0 {
                return 0.0;
            }
            j.j(lq).unwrap_or(f64::INFINITY)
        },
        schedule,
        seed,
        "ui-jmoment",
    );
    let base = Stream::for_tag(seed, "ui-trajectories");
    let runs = replicate(reps, &base, |_, s| martingale_trajectory(pp, horizon, s, caps));
    let mut ts = Vec::with_capacity(reps);
    let mut exploded = 0;
    for r in runs {
        match r {
            Ok(t) => ts.push(t),
            Err(Error::PopulationExplosion { .. }) => exploded += 1,
            Err(e) => return Err(e),
        }
    }
    if ts.len() < 2 {
        return Err(Error::InvalidParameter("fewer than two replicates stayed under the population cap".into()));
    }
    let kept = ts.len() as f64;
    let mean_trajectory = (0..=horizon)
        .map(|k| ts.iter().map(|t| t.w[k]).sum::<f64>() / kept)
        .collect();
    let last: Vec<f64> = ts.iter().map(|t| t.w[horizon]).collect();
    let mean_w = EstimateReport::from_values(&last, confidence, seed, &pp.id, "ui-mean");
    let mean_one = mean_w.within_sigmas(1.0, 3.0) || mean_w.stderr == 0.0 && mean_w.estimate == 1.0;
    let predicted_ui = match j_moment.verdict {
        Verdict::Converging => Some(pi_to_zero),
        Verdict::Diverging => Some(false),
        Verdict::Inconclusive => (!pi_to_zero).then_some(false),
    };
    Ok(UiReport {
        horizon,
        mean_w,
        mean_trajectory,
        regime,
        pi_to_zero,
        j_moment,
        predicted_ui,
        mean_one,
        exploded,
        agree: predicted_ui.map(|p| p == mean_one),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::PpKind;

    fn small() -> BatchSchedule {
        BatchSchedule {
            first_log2: 10,
            last_log2: 18,
            groups: 64,
        }
    }

    #[test]
    fn one_or_two_is_ui() {
        let pp = PpLaw::gw(1, 2, 0.5, 0.0, 1.0).unwrap();
        let r = uniform_integrability_check(&pp, 10, 10_000, &small(), 1, BrwCaps::default(), 0.99).unwrap();
        assert!(r.pi_to_zero);
        assert_eq!(r.j_moment.verdict, Verdict::Converging);
        assert_eq!(r.predicted_ui, Some(true));
        assert!(r.mean_one, "{:?}", r.mean_w);
        assert_eq!(r.agree, Some(true));
    }

    #[test]
    fn deterministic_binary_is_trivially_ui() {
        let r = uniform_integrability_check(&PpLaw::deterministic_binary(), 8, 20, &small(), 2, BrwCaps::default(), 0.99).unwrap();
        assert_eq!(r.mean_w.estimate, 1.0);
        assert_eq!(r.predicted_ui, Some(true));
        assert_eq!(r.agree, Some(true));
    }

    #[test]
    fn heavy_first_generation_flags_divergence() {
        let pp = PpLaw::new("heavy", 1.0, PpKind::HeavyGw { beta: 0.6, p: 0.5 }).unwrap();
        let caps = BrwCaps { pop_cap: 1 << 20, gen_cap: 30 };
        let r = uniform_integrability_check(&pp, 4, 500, &small(), 3, caps, 0.99).unwrap();
        assert!(r.pi_to_zero);
        assert_eq!(r.j_moment.verdict, Verdict::Diverging, "{:?}", r.j_moment.trace);
        assert_eq!(r.predicted_ui, Some(false));
    }
}
