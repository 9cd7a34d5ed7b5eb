//! Monte Carlo instances of the tail and moment inequalities for
//! perpetuities and for the supremum of the BRW martingale.

use serde::Serialize;

use crate::brwsim::{trajectories, BrwCaps};
use crate::error::Result;
use crate::law::{AEvaluator, MqLaw, PpLaw};
use crate::parallel::try_replicate;
use crate::perpsim::{expected_sigma_x, symm_sample, PairSymmetrizer, ZinfPolicy};
use crate::rng::Stream;
use crate::stats::{inequality_check, tail_curve, EstimateReport, InequalityReport, SlackRule};

/// Draws `(sup |Pi_{2k-2} Qbar_k|, sup |Pi_{2k}|, |Z_inf|)` triples.
fn symm_samples(law: &MqLaw, reps: usize, seed: u64, policy: ZinfPolicy) -> Result<Vec<(f64, f64, f64)>> {
    let sym = PairSymmetrizer::new(law)?;
    let base = Stream::for_tag(seed, "symm");
    try_replicate(reps, &base, |_, s| {
        symm_sample(&sym, policy, s).map(|d| (d.sup_qbar, d.sup_pi_even, d.z.abs()))
    })
}

/// `P{sup_k |Pi_{2k-2} Qbar_k| > x} <= 4 P{|Z_inf| > x/2}` on `grid`.
pub fn symm_check(law: &MqLaw, grid: &[f64], reps: usize, seed: u64, policy: ZinfPolicy, confidence: f64) -> Result<InequalityReport> {
    let draws = symm_samples(law, reps, seed, policy)?;
    let sup: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let z: Vec<f64> = draws.iter().map(|d| d.2).collect();
    let half: Vec<f64> = grid.iter().map(|x| x / 2.0).collect();
    let lhs = tail_curve(&sup, grid, confidence);
    let mut rhs = tail_curve(&z, &half, confidence);
    for (p, &x) in rhs.iter_mut().zip(grid) {
        p.t = x;
    }
    Ok(inequality_check(
        &lhs,
        &rhs,
        SlackRule::Constant {
            constant: 4.0,
            slack: 0.0,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailinReport {
    /// Largest scale `c` from the halving ladder that passes with constant 2.
    pub best_c: Option<f64>,
    pub report: InequalityReport,
}

/// `P{sup_k |Pi_{2k}| > x} <= 2 P{sup_k |Pi_{2k-2} Qbar_k| > c x}` for some
/// `c` in `(0, 1)`; tries `c = 1/2, 1/4, ...` down to `2^-20`.
pub fn tailin_check(law: &MqLaw, grid: &[f64], reps: usize, seed: u64, policy: ZinfPolicy, confidence: f64) -> Result<TailinReport> {
    let draws = symm_samples(law, reps, seed, policy)?;
    let sup_q: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let sup_pi: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let lhs = tail_curve(&sup_pi, grid, confidence);
    let mut last = None;
    for j in 1..=20 {
        let c = 0.5f64.powi(j);
        let scaled: Vec<f64> = grid.iter().map(|x| c * x).collect();
        let mut rhs = tail_curve(&sup_q, &scaled, confidence);
        for (p, &x) in rhs.iter_mut().zip(grid) {
            p.t = x;
        }
        let report = inequality_check(
            &lhs,
            &rhs,
            SlackRule::Constant {
                constant: 2.0,
                slack: 0.0,
            },
        );
        if report.pass {
            return Ok(TailinReport { best_c: Some(c), report });
        }
        last = Some(report);
    }
    Ok(TailinReport {
        best_c: None,
        report: last.expect("at least one scale tried"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderBoundPoint {
    pub x: f64,
    pub sigma: EstimateReport,
    pub bound: f64,
    pub pass: bool,
}

/// `E sigma(x) <= 2 J(|log x|)` via the upper confidence bound.
pub fn ladder_bound_check(law: &MqLaw, xs: &[f64], reps: usize, seed: u64, nmax: usize, confidence: f64) -> Result<Vec<LadderBoundPoint>> {
    let a = AEvaluator::for_law(law, seed)?;
    xs.iter()
        .map(|&x| {
            let sigma = expected_sigma_x(law, x, nmax, reps, seed, confidence)?;
            let bound = 2.0 * a.j(x.ln().abs())?;
            Ok(LadderBoundPoint {
                x,
                pass: sigma.ci.1 <= bound,
                sigma,
                bound,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailsupReport {
    pub a: f64,
    pub horizon: usize,
    /// `P{W > t} <= P{W* > t}` checked pointwise on the estimates.
    pub lower_pass: bool,
    /// Ratio `P{W* > t} / P{W > a t}` on the grid.
    pub upper: InequalityReport,
    pub pass: bool,
}

/// `P{W > t} <= P{W* > t} <= b P{W > a t}` with `W` approximated by
/// `W_horizon` and `W*` by the running maximum up to the horizon.
#[allow(clippy::too_many_arguments)]
pub fn tailsup_check(pp: &PpLaw, a: f64, grid: &[f64], horizon: usize, reps: usize, seed: u64, caps: BrwCaps, confidence: f64) -> Result<TailsupReport> {
    let ts = trajectories(pp, horizon, reps, seed, "tailsup", caps)?;
    let w: Vec<f64> = ts.iter().map(|t| t.w[horizon]).collect();
    let wstar: Vec<f64> = ts.iter().map(|t| t.w.iter().copied().fold(0.0, f64::max)).collect();
    let lhs = tail_curve(&wstar, grid, confidence);
    let plain = tail_curve(&w, grid, confidence);
    let lower_pass = plain.iter().zip(&lhs).all(|(p, l)| p.estimate <= l.estimate);
    let scaled: Vec<f64> = grid.iter().map(|t| a * t).collect();
    let mut rhs = tail_curve(&w, &scaled, confidence);
    for (p, &t) in rhs.iter_mut().zip(grid) {
        p.t = t;
    }
    let upper = inequality_check(&lhs, &rhs, SlackRule::Existential);
    Ok(TailsupReport {
        a,
        horizon,
        lower_pass,
        pass: lower_pass && upper.pass,
        upper,
    })
}
