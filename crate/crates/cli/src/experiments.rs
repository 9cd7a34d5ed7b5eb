//! One function per experiment. Each returns the records it produced;
//! [`run`] maps core errors to either a failed record or an
//! incompatibility.

use std::time::Instant;

use perpetua::brwsim::{check_fixpoint, maximal_w, trajectories};
use perpetua::inequalities::{ladder_bound_check, symm_check, tailin_check, tailsup_check};
use perpetua::law::{classify_regime, induced_mq_law, Case, Law, MqLaw, PpKind, PpLaw, TiltMode};
use perpetua::moments::{perpetuity_moment_diagnostic, w1_moment_diagnostic};
use perpetua::parallel::{try_replicate, with_threads};
use perpetua::perpsim::{ladder_decompose, v_function_and_wald, zinf_mean, ZinfSampler};
use perpetua::spinesim::{reciprocal_martingale_check, size_biasing_check, spine_paths, verify_spine_identity};
use perpetua::stats::{
    geometric_grid, tail_curve, uniform_integrability_check, BatchSchedule, CurvePoint, EstimateReport, InequalityReport,
};
use perpetua::{Error, Stream};
use serde_json::json;

use crate::record::Record;
use crate::scenario::{Experiment, InequalityKind, Scenario};
use crate::{CliError, CliResult};

/// Largest residual, relative to `1 + W^_n`, accepted by the spine identity.
pub const IDENTITY_TOL: f64 = 1e-10;
const PILOT_SAMPLES: usize = 2000;
const REGIME_BUDGET: usize = 1_000_000;
const LADDER_XS: [f64; 3] = [0.5, 0.1, 0.01];
const WALD_XS: [f64; 3] = [1.0, 2.0, 4.0];
const MAX_LADDER_BLOCKS: usize = 10_000;

/// Runs the scenario inside its thread pool. Records are in a fixed order
/// and carry no timing unless requested, so output is independent of the
/// thread count.
pub fn run(sc: &Scenario) -> CliResult<Vec<Record>> {
    let started = Instant::now();
    let result = with_threads(sc.threads, || dispatch(sc));
    let mut records = match result {
        Ok(r) => r,
        Err(Stop::Incompatible(msg)) => return Err(CliError::Incompatible(msg)),
        Err(Stop::Core(e)) if incompatible(&e) => return Err(CliError::Incompatible(e.to_string())),
        Err(Stop::Core(Error::InvalidParameter(msg))) => return Err(CliError::Config(msg)),
        Err(Stop::Core(e)) => vec![Record::new(sc, "error")
            .with_pass(false)
            .with_detail(&json!({ "error": e.to_string() }))],
    };
    if sc.timing {
        let ms = started.elapsed().as_millis() as u64;
        for r in &mut records {
            r.elapsed_ms = Some(ms);
        }
    }
    Ok(records)
}

/// Why an experiment stopped without producing its records.
enum Stop {
    Core(Error),
    Incompatible(String),
}

impl From<Error> for Stop {
    fn from(e: Error) -> Self {
        Stop::Core(e)
    }
}

type Outcome<T> = std::result::Result<T, Stop>;

fn incompatible(e: &Error) -> bool {
    matches!(
        e,
        Error::UnsupportedTilting(_)
            | Error::UnsupportedConditioning(_)
            | Error::NotEnumerable(_)
            | Error::DegenerateBrw
            | Error::UnboundedDensity
    )
}

fn dispatch(sc: &Scenario) -> Outcome<Vec<Record>> {
    match sc.experiment {
        Experiment::PerpMoment => perp_moment(sc, &mq_law(sc)?),
        Experiment::PerpLadder => perp_ladder(sc, &mq_law(sc)?),
        Experiment::PerpWald => perp_wald(sc, &mq_law(sc)?),
        Experiment::BrwMartingale => brw_martingale(sc, pp_law(sc)?),
        Experiment::BrwFixpoint => brw_fixpoint(sc, pp_law(sc)?),
        Experiment::SpineIdentity => spine_identity(sc, spine_law(sc)?),
        Experiment::SpineSizebias => spine_sizebias(sc, spine_law(sc)?),
        Experiment::UiCheck => ui_check(sc, pp_law(sc)?),
        Experiment::Inequality(kind) => match kind {
            InequalityKind::Symm => ineq_symm(sc, &mq_law(sc)?),
            InequalityKind::Tailin => ineq_tailin(sc, &mq_law(sc)?),
            InequalityKind::Ladder => ineq_ladder(sc, &mq_law(sc)?),
            InequalityKind::Tailsup => ineq_tailsup(sc, pp_law(sc)?),
        },
    }
}

/// Perpetuity experiments accept a point process through its spine pair.
fn mq_law(sc: &Scenario) -> perpetua::Result<MqLaw> {
    match &sc.law {
        Law::Mq(l) => Ok(l.clone()),
        Law::Pp(pp) => induced_mq_law(pp),
    }
}

fn pp_law(sc: &Scenario) -> Outcome<&PpLaw> {
    match &sc.law {
        Law::Pp(pp) => Ok(pp),
        Law::Mq(l) => Err(Stop::Incompatible(format!(
            "{} needs a point-process law, `{}` is an (M, Q) law",
            sc.experiment, l.id
        ))),
    }
}

/// Spine experiments sample the tilted point process exactly.
fn spine_law(sc: &Scenario) -> Outcome<&PpLaw> {
    let pp = pp_law(sc)?;
    if matches!(pp.kind, PpKind::HeavyGw { .. }) {
        return Err(Stop::Incompatible(format!("{} needs exact tilting, which `{}` lacks", sc.experiment, pp.id)));
    }
    Ok(pp)
}

fn regime(law: &MqLaw, seed: u64) -> Outcome<Case> {
    let r = classify_regime(law, REGIME_BUDGET, &mut Stream::for_tag(seed, "regime"))
        .map_err(|e| Stop::Incompatible(format!("regime of `{}` is unknown: {e}", law.id)))?;
    Ok(r.case)
}

/// Doubling schedule ending at the largest power of two within the
/// replicate budget, spanning at most ten doublings.
pub fn schedule_for(replicates: usize) -> BatchSchedule {
    let last = (usize::BITS - 1 - replicates.leading_zeros()).clamp(10, 24);
    BatchSchedule {
        first_log2: last.saturating_sub(10).max(8),
        last_log2: last,
        groups: 256,
    }
}

fn horizon(sc: &Scenario, default: usize) -> usize {
    sc.horizon.unwrap_or(default)
}

fn estimate_curve(reports: &[EstimateReport]) -> Vec<CurvePoint> {
    reports
        .iter()
        .enumerate()
        .map(|(k, r)| CurvePoint {
            t: k as f64,
            estimate: r.estimate,
            lo: r.ci.0,
            hi: r.ci.1,
        })
        .collect()
}

fn perp_moment(sc: &Scenario, law: &MqLaw) -> Outcome<Vec<Record>> {
    let p = &sc.policy;
    let mut out = Vec::new();
    let target = law.analytics().and_then(|a| match (a.e_abs_m, a.e_m, a.e_q) {
        (Some(am), Some(m), Some(q)) if am < 1.0 => Some(q / (1.0 - m)),
        _ => None,
    });
    let rec = Record::new(sc, "zinf-mean");
    match zinf_mean(law, p.zinf, sc.replicates, sc.seed, p.confidence) {
        Ok(e) => {
            let mut r = rec.with_estimate(&e).with_detail(&json!({
                "target": target,
                "stderr": e.stderr,
            }));
            if let Some(t) = target {
                r = r.with_pass(e.contains(t));
            }
            out.push(r);
        }
        Err(e @ Error::NonConvergent { .. }) => {
            out.push(rec.with_pass(false).with_detail(&json!({ "error": e.to_string(), "target": target })));
        }
        Err(e) => return Err(e.into()),
    }
    if let Some(b) = &sc.bspec {
        let d = perpetuity_moment_diagnostic(law, b, &schedule_for(sc.replicates), sc.seed)?;
        out.push(
            Record::new(sc, "zinf-b-moment")
                .with_value(d.trace.last().map_or(0, |t| t.samples), d.trace.last().map_or(f64::NAN, |t| t.pooled_mean))
                .with_detail(&d),
        );
    }
    Ok(out)
}

fn require_regime(sc: &Scenario, law: &MqLaw, allowed: &[Case]) -> Outcome<()> {
    let case = regime(law, sc.seed)?;
    if allowed.contains(&case) {
        Ok(())
    } else {
        Err(Stop::Incompatible(format!("{} needs regime {allowed:?}, `{}` is {case:?}", sc.experiment, law.id)))
    }
}

fn ladder_bound_records(sc: &Scenario, law: &MqLaw) -> Outcome<Vec<Record>> {
    let p = &sc.policy;
    let pts = ladder_bound_check(law, &LADDER_XS, sc.replicates, sc.seed, p.zinf.nmax as usize, p.confidence)?;
    Ok(pts
        .iter()
        .map(|pt| {
            Record::new(sc, "ladder-bound")
                .with_estimate(&pt.sigma)
                .with_param(pt.x)
                .with_pass(pt.pass)
                .with_detail(&json!({ "bound": pt.bound }))
        })
        .collect())
}

fn perp_ladder(sc: &Scenario, law: &MqLaw) -> Outcome<Vec<Record>> {
    require_regime(sc, law, &[Case::C1, Case::C2])?;
    let mut out = ladder_bound_records(sc, law)?;
    let blocks = sc.replicates.min(MAX_LADDER_BLOCKS);
    let d = ladder_decompose(law, blocks, sc.policy.zinf.nmax as usize, &mut Stream::for_tag(sc.seed, "ladder-blocks"))?;
    let lengths: Vec<f64> = d.sigma_epochs.iter().map(|&s| s as f64).collect();
    let e = EstimateReport::from_values(&lengths, sc.policy.confidence, sc.seed, &law.id, "ladder-blocks");
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let log_mhat: Vec<f64> = d.mhat.iter().map(|m| m.ln()).collect();
    out.push(Record::new(sc, "ladder-blocks").with_estimate(&e).with_detail(&json!({
        "blocks": blocks,
        "mean_log_mhat": mean(&log_mhat),
        "max_qtilde": d.qtilde.iter().copied().fold(0.0, f64::max),
        "mean_qhat": mean(&d.qhat),
    })));
    Ok(out)
}

fn perp_wald(sc: &Scenario, law: &MqLaw) -> Outcome<Vec<Record>> {
    require_regime(sc, law, &[Case::C1])?;
    WALD_XS
        .iter()
        .map(|&x| {
            let w = v_function_and_wald(law, None, x, sc.replicates, sc.seed, sc.policy.confidence)?;
            Ok(Record::new(sc, "wald")
                .with_estimate(&w.residual)
                .with_param(x)
                .with_pass(w.wald_pass && w.lower_bound_pass)
                .with_detail(&w))
        })
        .collect()
}

fn brw_martingale(sc: &Scenario, pp: &PpLaw) -> Outcome<Vec<Record>> {
    let n_max = horizon(sc, 10);
    let p = &sc.policy;
    let ts = trajectories(pp, n_max, sc.replicates, sc.seed, "martingale", p.caps)?;
    let means: Vec<EstimateReport> = (0..=n_max)
        .map(|n| {
            let v: Vec<f64> = ts.iter().map(|t| t.w[n]).collect();
            EstimateReport::from_values(&v, p.confidence, sc.seed, &pp.id, "w-mean")
        })
        .collect();
    let mut out: Vec<Record> = means
        .iter()
        .enumerate()
        .map(|(n, e)| {
            Record::new(sc, "w-mean")
                .with_estimate(e)
                .with_param(n as f64)
                .with_pass(e.within_sigmas(1.0, 3.0))
        })
        .collect();
    out.push(Record::new(sc, "w-mean-trajectory").with_value(sc.replicates as u64, means[n_max].estimate).with_curve(&estimate_curve(&means)));
    let wstar: Vec<f64> = maximal_w(&ts).iter().map(|m| m.value).collect();
    let curve = tail_curve(&wstar, &geometric_grid(1.0, 8.0, 10), p.confidence);
    out.push(
        Record::new(sc, "w-max-tail")
            .with_value(sc.replicates as u64, wstar.iter().copied().fold(0.0, f64::max))
            .with_param(n_max as f64)
            .with_curve(&curve),
    );
    Ok(out)
}

fn brw_fixpoint(sc: &Scenario, pp: &PpLaw) -> Outcome<Vec<Record>> {
    let r = check_fixpoint(pp, 2, 2, sc.replicates, sc.seed, sc.policy.caps)?;
    Ok(vec![Record::new(sc, "fixpoint")
        .with_value(r.reps as u64, r.direct_mean)
        .with_pass(r.pass)
        .with_detail(&r)])
}

fn spine_identity(sc: &Scenario, pp: &PpLaw) -> Outcome<Vec<Record>> {
    let n = horizon(sc, 6);
    let paths = spine_paths(pp, n, TiltMode::Exact, sc.replicates, sc.seed, "spine-identity", sc.policy.caps)?;
    let mut worst_decomposition: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    let mut discrepancy = Vec::with_capacity(paths.len());
    let mut logweight: f64 = 0.0;
    let mut q: f64 = 0.0;
    for path in &paths {
        let r = verify_spine_identity(path);
        let scale = 1.0 + path.what;
        worst_decomposition = worst_decomposition.max(r.decomposition / scale);
        worst_closed = worst_closed.max(r.closed_form / scale);
        discrepancy.push(r.uncorrected_discrepancy);
        logweight = logweight.max(r.logweight_defect);
        q = q.max(r.q_defect);
    }
    let pass = worst_decomposition <= IDENTITY_TOL && worst_closed <= IDENTITY_TOL;
    let disc = EstimateReport::from_values(&discrepancy, sc.policy.confidence, sc.seed, &pp.id, "spine-uncorrected");
    Ok(vec![
        Record::new(sc, "spine-identity")
            .with_value(paths.len() as u64, worst_closed)
            .with_param(n as f64)
            .with_pass(pass)
            .with_detail(&json!({
                "resid_decomposition": worst_decomposition,
                "resid_closed": worst_closed,
                "logweight_defect": logweight,
                "q_defect": q,
            })),
        Record::new(sc, "spine-uncorrected")
            .with_estimate(&disc)
            .with_param(n as f64)
            .with_detail(&json!({ "max_discrepancy": discrepancy.iter().copied().fold(0.0, f64::max) })),
    ])
}

fn spine_sizebias(sc: &Scenario, pp: &PpLaw) -> Outcome<Vec<Record>> {
    let p = &sc.policy;
    let mut out = Vec::new();
    type Statistic = fn(&[f64]) -> f64;
    let hs: [(&str, Statistic); 2] = [
        ("identity", |w| *w.last().unwrap()),
        ("log1p", |w| w.last().unwrap().ln_1p()),
    ];
    for n in 1..=2 {
        for (name, h) in hs {
            let r = size_biasing_check(pp, n, h, TiltMode::Exact, sc.replicates, sc.seed, p.caps, p.confidence)?;
            out.push(
                Record::new(sc, "sizebias")
                    .with_estimate(&r.rhs)
                    .with_param(n as f64)
                    .with_pass(r.pass)
                    .with_detail(&json!({ "h": name, "direct": r.lhs, "sigma": r.sigma })),
            );
        }
    }
    let n_max = horizon(sc, 5);
    let recips = reciprocal_martingale_check(pp, n_max, sc.replicates, sc.seed, p.caps, p.confidence)?;
    for (n, e) in recips.iter().enumerate().skip(1) {
        out.push(
            Record::new(sc, "reciprocal")
                .with_estimate(e)
                .with_param(n as f64)
                .with_pass(e.within_sigmas(1.0, 3.0)),
        );
    }
    Ok(out)
}

fn ui_check(sc: &Scenario, pp: &PpLaw) -> Outcome<Vec<Record>> {
    let p = &sc.policy;
    let schedule = schedule_for(sc.replicates);
    let r = uniform_integrability_check(pp, horizon(sc, 10), sc.replicates, &schedule, sc.seed, p.caps, p.confidence)?;
    let mut rec = Record::new(sc, "ui").with_estimate(&r.mean_w).with_param(r.horizon as f64).with_detail(&r);
    if let Some(agree) = r.agree {
        rec = rec.with_pass(agree);
    }
    let mut out = vec![rec];
    if let Some(b) = &sc.bspec {
        let d = w1_moment_diagnostic(pp, b, &schedule, sc.seed)?;
        out.push(
            Record::new(sc, "w1-b-moment")
                .with_value(d.trace.last().map_or(0, |t| t.samples), d.trace.last().map_or(f64::NAN, |t| t.pooled_mean))
                .with_detail(&d),
        );
    }
    Ok(out)
}

fn inequality_record(sc: &Scenario, tag: &str, r: &InequalityReport, reps: usize) -> Record {
    let lhs: Vec<CurvePoint> = r.points.iter().map(|p| p.lhs).collect();
    Record::new(sc, tag)
        .with_value(reps as u64, r.best_constant.unwrap_or(f64::NAN))
        .with_pass(r.pass)
        .with_curve(&lhs)
        .with_detail(r)
}

/// Grid for the symmetrization check: 32-fold range ending at twice the
/// 95% quantile of `|Z_inf|` from a pilot run, so the right-hand side stays
/// resolved at every point.
pub fn symm_grid(law: &MqLaw, sc: &Scenario) -> perpetua::Result<Vec<f64>> {
    let sampler = ZinfSampler::new(law, sc.policy.zinf)?;
    let base = Stream::for_tag(sc.seed, "symm-pilot");
    let mut z = try_replicate(PILOT_SAMPLES, &base, |_, s| sampler.sample(s).map(|o| o.value.abs()))?;
    z.sort_by(f64::total_cmp);
    let hi = 2.0 * z[(z.len() * 95) / 100];
    if !(hi > 0.0 && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("|Z_inf| quantile {hi} gives no usable grid")));
    }
    Ok(geometric_grid(hi / 32.0, hi, 8))
}

fn ineq_symm(sc: &Scenario, law: &MqLaw) -> Outcome<Vec<Record>> {
    let grid = symm_grid(law, sc)?;
    let r = symm_check(law, &grid, sc.replicates, sc.seed, sc.policy.zinf, sc.policy.confidence)?;
    Ok(vec![inequality_record(sc, "symm", &r, sc.replicates)])
}

fn ineq_tailin(sc: &Scenario, law: &MqLaw) -> Outcome<Vec<Record>> {
    let grid = geometric_grid(0.1, 0.9, 8);
    let r = tailin_check(law, &grid, sc.replicates, sc.seed, sc.policy.zinf, sc.policy.confidence)?;
    let mut rec = inequality_record(sc, "tailin", &r.report, sc.replicates).with_pass(r.best_c.is_some());
    if let Some(c) = r.best_c {
        rec = rec.with_param(c);
    }
    Ok(vec![rec])
}

fn ineq_ladder(sc: &Scenario, law: &MqLaw) -> Outcome<Vec<Record>> {
    require_regime(sc, law, &[Case::C1, Case::C2])?;
    ladder_bound_records(sc, law)
}

fn ineq_tailsup(sc: &Scenario, pp: &PpLaw) -> Outcome<Vec<Record>> {
    let grid = geometric_grid(1.0, 8.0, 10);
    let h = horizon(sc, 12);
    let r = tailsup_check(pp, 0.5, &grid, h, sc.replicates, sc.seed, sc.policy.caps, sc.policy.confidence)?;
    Ok(vec![inequality_record(sc, "tailsup", &r.upper, sc.replicates)
        .with_pass(r.pass)
        .with_param(r.a)
        .with_detail(&r)])
}
