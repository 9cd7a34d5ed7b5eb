use serde::Serialize;

use super::zinf::ZinfPolicy;
use crate::error::{Error, Result};
use crate::law::{classify_regime, AEvaluator, Case, MqLaw};
use crate::parallel::try_replicate;
use crate::rng::Stream;
use crate::stats::{combined_sigma, EstimateReport};

/// Number of pilot paths used to pick the cutoff when none is given.
pub const PILOT_REPS: usize = 2000;
/// Horizon of the pilot maxima.
pub const PILOT_HORIZON: usize = 64;
/// Step cap for a single stopping time.
pub const WALD_NMAX: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaldReport {
    pub x: f64,
    pub eta: f64,
    /// Probability that the whole path keeps `|Pi_{n-1} Q_n| <= eta`.
    pub alpha: EstimateReport,
    /// Mean stopping time, i.e. `V(e^-x)`.
    pub v: EstimateReport,
    /// Mean capped sum at the stopping time.
    pub capped_sum: EstimateReport,
    pub a: f64,
    pub j: f64,
    /// Per-replicate `S - A(x) T`, whose mean vanishes by Wald's identity.
    pub residual: EstimateReport,
    pub wald_pass: bool,
    /// `V >= alpha J(x)` up to three combined standard errors.
    pub lower_bound_pass: bool,
}

/// Running max of `|Pi_{n-1} Q_n|` over the first `horizon` steps.
fn pilot_sup(law: &MqLaw, horizon: usize, rng: &mut Stream) -> Result<f64> {
    let mut pi = 1.0f64;
    let mut sup: f64 = 0.0;
    for _ in 0..horizon {
        let d = law.sample(rng)?;
        sup = sup.max((pi * d.q).abs());
        pi *= d.m;
    }
    Ok(sup)
}

/// Whether `sup_n |Pi_{n-1} Q_n| <= eta`, following the path until the
/// truncation policy says nothing more can happen.
fn stays_below(law: &MqLaw, eta: f64, policy: ZinfPolicy, rng: &mut Stream) -> Result<bool> {
    let mut pi = 1.0f64;
    let mut calm = 0;
    for _ in 0..policy.nmax {
        let d = law.sample(rng)?;
        let t = (pi * d.q).abs();
        if t > eta {
            return Ok(false);
        }
        pi *= d.m;
        calm = if t <= policy.eps * eta { calm + 1 } else { 0 };
        if pi.abs() <= policy.eps && calm >= policy.quiet {
            return Ok(true);
        }
    }
    Err(Error::NonConvergent {
        steps: policy.nmax,
        last_increment: f64::NAN,
    })
}

/// 90th percentile of the pilot maxima.
pub fn pilot_eta(law: &MqLaw, seed: u64) -> Result<f64> {
    let base = Stream::for_tag(seed, "wald-pilot");
    let mut sups = try_replicate(PILOT_REPS, &base, |_, s| pilot_sup(law, PILOT_HORIZON, s))?;
    sups.sort_by(f64::total_cmp);
    Ok(sups[(sups.len() * 9 / 10).min(sups.len() - 1)])
}

/// Returns `(T_x, S^(x)_{T_x})` for one path.
fn stopped_pair(law: &MqLaw, eta: f64, x: f64, rng: &mut Stream) -> Result<(f64, f64)> {
    let mut pi = 1.0f64;
    let mut s = 0.0;
    let mut capped = 0.0;
    let mut qmax: f64 = 0.0;
    for n in 1..=WALD_NMAX {
        let d = law.sample(rng)?;
        qmax = qmax.max((pi * d.q).abs());
        pi *= d.m;
        let xi = (-d.log_abs_m).max(0.0);
        s += xi;
        capped += xi.min(x);
        if s >= x || qmax > eta {
            return Ok((n as f64, capped));
        }
    }
    Err(Error::NonConvergent {
        steps: WALD_NMAX as u64,
        last_increment: f64::NAN,
    })
}

/// Estimates `V(e^-x) = E T_x` and checks Wald's identity
/// `E S^(x)_{T_x} = A(x) E T_x` for a contracting law.
pub fn v_function_and_wald(law: &MqLaw, eta: Option<f64>, x: f64, reps: usize, seed: u64, confidence: f64) -> Result<WaldReport> {
    if !(x > 0.0) || reps < 2 {
        return Err(Error::InvalidParameter("need x > 0 and reps >= 2".into()));
    }
    let regime = classify_regime(law, 100_000, &mut Stream::for_tag(seed, "wald-regime"))?;
    if regime.case != Case::C1 {
        return Err(Error::InvalidParameter(format!("law `{}` is not contracting (C1)", law.id)));
    }
    let eta = match eta {
        Some(e) => e,
        None => pilot_eta(law, seed)?,
    };
    let base = Stream::for_tag(seed, "wald-alpha");
    let hits = try_replicate(reps, &base, |_, s| stays_below(law, eta, ZinfPolicy::default(), s))?;
    let hits: Vec<f64> = hits.into_iter().map(|b| b as u8 as f64).collect();
    let alpha = EstimateReport::from_values(&hits, confidence, seed, &law.id, "wald-alpha");
    if alpha.estimate == 0.0 {
        return Err(Error::BadEta { eta });
    }

    let evaluator = AEvaluator::for_law(law, seed)?;
    let a = evaluator.a(x);
    let j = evaluator.j(x)?;
    let base = Stream::for_tag(seed, "wald-stop");
    let pairs = try_replicate(reps, &base, |_, s| stopped_pair(law, eta, x, s))?;
    let ts: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ss: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let ds: Vec<f64> = pairs.iter().map(|p| p.1 - a * p.0).collect();
    let v = EstimateReport::from_values(&ts, confidence, seed, &law.id, "wald-v");
    let capped_sum = EstimateReport::from_values(&ss, confidence, seed, &law.id, "wald-s");
    let residual = EstimateReport::from_values(&ds, confidence, seed, &law.id, "wald-residual");
    let wald_pass = ds.iter().all(|&d| d == 0.0) || residual.within_sigmas(0.0, 3.0);
    let bound = alpha.estimate * j;
    let scaled_alpha = EstimateReport {
        stderr: alpha.stderr * j,
        ..alpha.clone()
    };
    let lower_bound_pass = v.estimate >= bound - 3.0 * combined_sigma(&v, &scaled_alpha);
    Ok(WaldReport {
        x,
        eta,
        alpha,
        v,
        capped_sum,
        a,
        j,
        residual,
        wald_pass,
        lower_bound_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_halving() {
        let law = MqLaw::constant(0.5, 1.0);
        let r = v_function_and_wald(&law, Some(2.0), 4f64.ln(), 100, 1, 0.99).unwrap();
        assert_eq!(r.v.estimate, 2.0);
        assert_eq!(r.a, 2f64.ln());
        assert_eq!(r.residual.estimate, 0.0);
        assert!(r.wald_pass && r.lower_bound_pass);
        assert_eq!(r.alpha.estimate, 1.0);
    }

    #[test]
    fn uniform_wald_identity() {
        let law = MqLaw::uniform(1.0);
        for x in [1.0, 2.0, 4.0] {
            let r = v_function_and_wald(&law, None, x, 20_000, 7, 0.99).unwrap();
            assert!(r.wald_pass, "x={x}: {:?}", r.residual);
            assert!(r.lower_bound_pass, "x={x}: v={} alpha={} j={}", r.v.estimate, r.alpha.estimate, r.j);
        }
    }

    #[test]
    fn bad_eta_and_non_contracting() {
        let law = MqLaw::constant(0.5, 1.0);
        assert!(matches!(v_function_and_wald(&law, Some(0.5), 1.0, 10, 1, 0.99), Err(Error::BadEta { .. })));
        let law = MqLaw::new("tp", crate::law::MqKind::TwoPoint { m1: 2.0, p1: 0.5, m2: 0.125, q: 1.0 }).unwrap();
        assert!(v_function_and_wald(&law, None, 1.0, 10, 1, 0.99).is_err());
    }
}
