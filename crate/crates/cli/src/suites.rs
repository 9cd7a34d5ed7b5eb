//! Fixed-seed check suites behind `perpetua verify`.

use std::f64::consts::E;

use perpetua::brwsim::{check_fixpoint, exact_w_law, generation_at, trajectories, w_matches_exact, BrwCaps};
use perpetua::inequalities::{ladder_bound_check, symm_check, tailin_check, tailsup_check};
use perpetua::law::{AEvaluator, MqLaw, PpLaw, TiltMode};
use perpetua::parallel::replicate;
use perpetua::perpsim::{simulate_path, simulate_zinf, v_function_and_wald, zinf_mean, ZinfPolicy, ZinfStatus};
use perpetua::rvkit::{
    check_regular_variation, default_grid, make_surrogate, select_c, submultiplicative_constant, BFunctionSpec,
    PhiFunction, RvHandle, SurrogateKind,
};
use perpetua::spinesim::{exact_what_law, reciprocal_martingale_check, size_biasing_check, spine_paths, verify_spine_identity};
use perpetua::stats::{dp_exact_zn, geometric_grid, ks_one_sample, EstimateReport};
use perpetua::Stream;

use crate::{CliError, CliResult};

pub const SUITES: &[&str] = &["rvkit", "perpetuity", "ladder", "brw", "spine", "inequalities", "all"];
const SEED: u64 = 2024;
const CONF: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(id: &str, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            id: id.to_string(),
            pass,
            detail: detail.into(),
        }
    }

    fn from_result(id: &str, r: perpetua::Result<(bool, String)>) -> Self {
        match r {
            Ok((pass, detail)) => Check::new(id, pass, detail),
            Err(e) => Check::new(id, false, format!("error: {e}")),
        }
    }
}

fn est(e: &EstimateReport) -> String {
    format!("{:.6} +- {:.2e}", e.estimate, e.stderr)
}

/// Runs the named suite. `quick` divides replicate counts by ten.
pub fn run_suite(name: &str, quick: bool) -> CliResult<Vec<Check>> {
    let reps = |n: usize| if quick { (n / 10).max(200) } else { n };
    Ok(match name {
        "rvkit" => rvkit(),
        "perpetuity" => perpetuity(&reps),
        "ladder" => ladder(&reps),
        "brw" => brw(&reps),
        "spine" => spine(&reps),
        "inequalities" => inequalities(&reps),
        "all" => {
            let mut all = rvkit();
            all.extend(perpetuity(&reps));
            all.extend(ladder(&reps));
            all.extend(brw(&reps));
            all.extend(spine(&reps));
            all.extend(inequalities(&reps));
            all
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown suite `{other}` (expected one of {})",
                SUITES.join(", ")
            )))
        }
    })
}

/// Aligned `id  PASS|FAIL  detail` rows.
pub fn render_table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.id.len()).max().unwrap_or(2).max(2);
    let mut s = format!("{:<width$}  {:<4}  detail\n", "id", "ok");
    for c in checks {
        let flag = if c.pass { "PASS" } else { "FAIL" };
        s.push_str(&format!("{:<width$}  {flag}  {}\n", c.id, c.detail));
    }
    s
}

fn rvkit() -> Vec<Check> {
    let grid = default_grid();
    let mut out = Vec::new();
    for (id, spec) in [
        ("rvkit.certify.power", "power:alpha=1"),
        ("rvkit.certify.powerlog", "powerlog:alpha=1,k=2"),
        ("rvkit.certify.powerexp", "powerexp:alpha=1,beta=0.5,gamma=0.5"),
    ] {
        let r = BFunctionSpec::parse(spec).and_then(|b| {
            let c = select_c(b, &grid)?;
            make_surrogate(b, c, SurrogateKind::F)?;
            make_surrogate(b, c, SurrogateKind::G)?;
            Ok((true, format!("c = {c:.4}")))
        });
        out.push(Check::from_result(id, r));
    }
    out.push(Check::from_result(
        "rvkit.select_c.power1",
        BFunctionSpec::power(1.0)
            .and_then(|b| select_c(b, &grid))
            .map(|c| ((c - 4.0 * E).abs() < 1e-12, format!("c = {c:.6}, expected 4e"))),
    ));
    out.push(Check::from_result(
        "rvkit.phi.slowly_varying",
        (|| {
            let b = BFunctionSpec::power(1.0)?;
            let c = select_c(b, &grid)?;
            let g = make_surrogate(b, c, SurrogateKind::G)?;
            let phi = PhiFunction::new(g, AEvaluator::closed(&MqLaw::constant(0.5, 1.0))?)?;
            let xs = geometric_grid(1e10, 1e30, 4);
            let r = check_regular_variation(&RvHandle::Phi(phi), 2.0, &xs, 0.05)?;
            Ok((r.pass, format!("top-decade deviation {:.4}", r.top_decade_deviation)))
        })(),
    ));
    out.push(Check::from_result(
        "rvkit.f.submultiplicative",
        (|| {
            let b = BFunctionSpec::power(1.0)?;
            let f = make_surrogate(b, select_c(b, &grid)?, SurrogateKind::F)?;
            let k = submultiplicative_constant(&f, &geometric_grid(1.0, 1e6, 4));
            Ok((k.is_finite() && k < 10.0, format!("constant {k:.4}")))
        })(),
    ));
    out
}

fn perpetuity(reps: &dyn Fn(usize) -> usize) -> Vec<Check> {
    let mut out = Vec::new();
    let half = MqLaw::constant(0.5, 1.0);
    out.push(Check::from_result(
        "perp.zinf.geometric",
        simulate_zinf(&half, ZinfPolicy::default(), &mut Stream::new(SEED)).map(|o| {
            (
                (o.value - 2.0).abs() <= 1e-9 && o.status == ZinfStatus::FixedPoint,
                format!("{} ({:?})", o.value, o.status),
            )
        }),
    ));
    out.push(Check::from_result(
        "perp.exact_zn.geometric",
        dp_exact_zn(&[((0.5, 1.0), 1.0)], 3).map(|(z, _)| {
            let ok = z.len() == 1 && z.mass_at(1.75) == 1.0;
            (ok, format!("{} atom(s), mass at 1.75 = {}", z.len(), z.mass_at(1.75)))
        }),
    ));
    let uniform = MqLaw::uniform(1.0);
    out.push(Check::from_result(
        "perp.mean.uniform",
        zinf_mean(&uniform, ZinfPolicy::default(), reps(100_000), SEED, CONF)
            .map(|e| (e.contains(2.0), format!("{} vs 2", est(&e)))),
    ));
    let two = MqLaw::finite(vec![((2.0, 1.0), 0.5), ((0.125, 1.0), 0.5)]);
    out.push(Check::from_result(
        "perp.zn.ks",
        two.and_then(|law| {
            let support = law.support().expect("finite law");
            let mut worst: f64 = 0.0;
            let mut pass = true;
            for n in 1..=6 {
                let (exact, _) = dp_exact_zn(&support, n)?;
                let base = Stream::for_tag(SEED, "zn-ks").fork(n as u64);
                let zs = replicate(reps(100_000), &base, |_, s| simulate_path(&law, n, s).map(|p| p.z()))
                    .into_iter()
                    .collect::<perpetua::Result<Vec<f64>>>()?;
                let ks = ks_one_sample(&zs, &exact, 1e-9);
                worst = worst.max(ks.distance / ks.critical);
                pass &= ks.pass;
            }
            Ok((pass, format!("max distance/critical {worst:.3}")))
        }),
    ));
    out
}

fn ladder(reps: &dyn Fn(usize) -> usize) -> Vec<Check> {
    let mut out = Vec::new();
    for (id, law) in [
        ("ladder.bound.uniform", MqLaw::uniform(1.0)),
        ("ladder.bound.half", MqLaw::constant(0.5, 1.0)),
    ] {
        out.push(Check::from_result(
            id,
            ladder_bound_check(&law, &[0.5, 0.1, 0.01], reps(100_000), SEED, 1_000_000, CONF).map(|pts| {
                let detail = pts
                    .iter()
                    .map(|p| format!("x={}: {:.3}<={:.3}", p.x, p.sigma.ci.1, p.bound))
                    .collect::<Vec<_>>()
                    .join(", ");
                (pts.iter().all(|p| p.pass), detail)
            }),
        ));
    }
    out.push(Check::from_result(
        "ladder.wald.uniform",
        [1.0, 2.0, 4.0]
            .iter()
            .map(|&x| v_function_and_wald(&MqLaw::uniform(1.0), None, x, reps(20_000), SEED, CONF))
            .collect::<perpetua::Result<Vec<_>>>()
            .map(|ws| {
                let detail = ws
                    .iter()
                    .map(|w| format!("x={}: {}", w.x, est(&w.residual)))
                    .collect::<Vec<_>>()
                    .join(", ");
                (ws.iter().all(|w| w.wald_pass && w.lower_bound_pass), detail)
            }),
    ));
    out.push(Check::from_result(
        "ladder.wald.deterministic",
        v_function_and_wald(&MqLaw::constant(0.5, 1.0), None, 1.0, 1000, SEED, CONF)
            .map(|w| (w.residual.estimate == 0.0 && w.wald_pass, format!("residual {}", w.residual.estimate))),
    ));
    out
}

fn one_or_two() -> PpLaw {
    PpLaw::gw(1, 2, 0.5, 0.0, 1.0).expect("valid law")
}

fn brw(reps: &dyn Fn(usize) -> usize) -> Vec<Check> {
    let caps = BrwCaps::default();
    let pp = one_or_two();
    let mut out = Vec::new();
    out.push(Check::from_result(
        "brw.binary.exact",
        PpLaw::binary(-std::f64::consts::LN_2, 1.0).and_then(|b| {
            let ws = (0..=12)
                .map(|n| generation_at(&b, n, &Stream::new(SEED), caps).map(|g| g.w()))
                .collect::<perpetua::Result<Vec<f64>>>()?;
            Ok((ws.iter().all(|&w| w == 1.0), format!("W_0..W_12 = 1: {}", ws.iter().all(|&w| w == 1.0))))
        }),
    ));
    out.push(Check::from_result(
        "brw.mean_one",
        trajectories(&pp, 10, reps(10_000), SEED, "verify-mean", caps).map(|ts| {
            let mut worst: f64 = 0.0;
            let pass = (0..=10).all(|n| {
                let v: Vec<f64> = ts.iter().map(|t| t.w[n]).collect();
                let e = EstimateReport::from_values(&v, CONF, SEED, &pp.id, "w");
                if e.stderr > 0.0 {
                    worst = worst.max((e.estimate - 1.0).abs() / e.stderr);
                }
                e.within_sigmas(1.0, 3.0)
            });
            (pass, format!("max |mean - 1| / se = {worst:.2}"))
        }),
    ));
    out.push(Check::from_result(
        "brw.fixpoint",
        check_fixpoint(&pp, 2, 2, reps(20_000), SEED, caps)
            .map(|r| (r.pass, format!("ks {:.4} (crit {:.4}), exact {:?}", r.ks_distance, r.ks_critical, r.exact_distance))),
    ));
    out.push(Check::from_result(
        "brw.w3.exact_law",
        w_matches_exact(&pp, 3, reps(20_000), SEED, caps).map(|k| (k.pass, format!("ks {:.4} (crit {:.4})", k.distance, k.critical))),
    ));
    out
}

fn spine(reps: &dyn Fn(usize) -> usize) -> Vec<Check> {
    let caps = BrwCaps::default();
    let pp = one_or_two();
    let mut out = Vec::new();
    out.push(Check::from_result(
        "spine.identity",
        spine_paths(&pp, 6, TiltMode::Exact, reps(10_000), SEED, "verify-identity", caps).map(|paths| {
            let worst = paths
                .iter()
                .map(|p| {
                    let r = verify_spine_identity(p);
                    r.decomposition.max(r.closed_form) / (1.0 + p.what)
                })
                .fold(0.0, f64::max);
            (worst <= 1e-10, format!("max relative residual {worst:.2e}"))
        }),
    ));
    out.push(Check::from_result(
        "spine.second_moment",
        spine_paths(&pp, 6, TiltMode::Exact, reps(100_000), SEED, "verify-what", caps).map(|paths| {
            let mut worst: f64 = 0.0;
            let pass = (1..=6).all(|n| {
                let v: Vec<f64> = paths.iter().map(|p| p.what_at(n)).collect();
                let e = EstimateReport::from_values(&v, CONF, SEED, &pp.id, "what");
                let target = 4.0 / 3.0 - (2.0f64 / 3.0).powi(n as i32) / 3.0;
                worst = worst.max((e.estimate - target).abs() / e.stderr);
                e.within_sigmas(target, 3.0)
            });
            (pass, format!("max |mean - oracle| / se = {worst:.2}"))
        }),
    ));
    out.push(Check::from_result(
        "spine.exact_first_step",
        (|| {
            let what = exact_what_law(&pp, 1)?;
            let w = exact_w_law(&pp, 1)?;
            let lhs = what.mean();
            let rhs = w.expect(|x| x * x);
            let recip = what.expect(|x| 1.0 / x);
            let ok = (lhs - 10.0 / 9.0).abs() < 1e-12 && (rhs - lhs).abs() < 1e-12 && (recip - 1.0).abs() < 1e-12;
            Ok((ok, format!("E W^_1 = {lhs:.12}, E W_1^2 = {rhs:.12}, E 1/W^_1 = {recip:.12}")))
        })(),
    ));
    out.push(Check::from_result(
        "spine.size_biasing",
        (1..=2)
            .map(|n| size_biasing_check(&pp, n, |w| w.last().unwrap().ln_1p(), TiltMode::Exact, reps(100_000), SEED, caps, CONF))
            .collect::<perpetua::Result<Vec<_>>>()
            .map(|rs| {
                let detail = rs
                    .iter()
                    .map(|r| format!("{:.5} vs {:.5}", r.lhs.estimate, r.rhs.estimate))
                    .collect::<Vec<_>>()
                    .join(", ");
                (rs.iter().all(|r| r.pass), detail)
            }),
    ));
    out.push(Check::from_result(
        "spine.reciprocal",
        reciprocal_martingale_check(&pp, 5, reps(100_000), SEED, caps, CONF).map(|rs| {
            let pass = rs.iter().all(|e| e.within_sigmas(1.0, 3.0));
            (pass, format!("E 1/W^_5 = {}", est(&rs[5])))
        }),
    ));
    out
}

fn inequalities(reps: &dyn Fn(usize) -> usize) -> Vec<Check> {
    let mut out = Vec::new();
    let half_q12 = MqLaw::finite(vec![((0.5, 1.0), 0.5), ((0.5, 2.0), 0.5)]);
    out.push(Check::from_result(
        "ineq.symm",
        half_q12.clone().and_then(|law| {
            let r = symm_check(&law, &geometric_grid(0.1, 3.5, 8), reps(100_000), SEED, ZinfPolicy::default(), CONF)?;
            Ok((r.pass, format!("best constant {:?}", r.best_constant)))
        }),
    ));
    out.push(Check::from_result(
        "ineq.tailin",
        half_q12.and_then(|law| {
            let r = tailin_check(&law, &geometric_grid(0.1, 0.9, 8), reps(100_000), SEED, ZinfPolicy::default(), CONF)?;
            Ok((r.best_c.is_some(), format!("c = {:?}", r.best_c)))
        }),
    ));
    out.push(Check::from_result(
        "ineq.tailsup",
        tailsup_check(&one_or_two(), 0.5, &geometric_grid(1.0, 8.0, 10), 12, reps(100_000), SEED, BrwCaps::default(), CONF)
            .map(|r| (r.pass, format!("best constant {:?}", r.upper.best_constant))),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_layout() {
        let t = render_table(&[Check::new("a.b", true, "fine"), Check::new("c", false, "bad")]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("a.b  PASS  fine"));
        assert!(lines[2].starts_with("c    FAIL  bad"));
    }

    #[test]
    fn unknown_suite_is_config_error() {
        assert_eq!(run_suite("nope", true).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn rvkit_suite_passes() {
        let checks = run_suite("rvkit", true).unwrap();
        assert!(checks.iter().all(|c| c.pass), "{}", render_table(&checks));
    }

    #[test]
    fn spine_suite_has_five_checks() {
        let checks = run_suite("spine", true).unwrap();
        assert_eq!(checks.len(), 5);
        assert!(checks.iter().all(|c| c.pass), "{}", render_table(&checks));
    }
}
