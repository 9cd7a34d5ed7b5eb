//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL ...` line before asserting.

use std::process::Command;
use std::time::Instant;

use perpetua::brwsim::{exact_w_law, generation_at, trajectories, BrwCaps};
use perpetua::inequalities::{ladder_bound_check, symm_check, tailsup_check};
use perpetua::law::{induced_mq_law, parse_law, Law, MqLaw, PpLaw, TiltMode};
use perpetua::moments::{perpetuity_moment_diagnostic, w1_moment_diagnostic};
use perpetua::parallel::replicate;
use perpetua::perpsim::{simulate_path, simulate_zinf, v_function_and_wald, zinf_mean, ZinfPolicy};
use perpetua::rvkit::BFunctionSpec;
use perpetua::spinesim::{
    exact_what_law, reciprocal_martingale_check, simulate_what, size_biasing_check, spine_paths, verify_spine_identity,
};
use perpetua::stats::{dp_exact_zn, geometric_grid, ks_one_sample, BatchSchedule, EstimateReport, Verdict};
use perpetua::Stream;

const SEED: u64 = 7;
const CONF: f64 = 0.99;

fn verdict(n: u32, pass: bool, detail: impl AsRef<str>) {
    let flag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n}: {flag} {}", detail.as_ref());
    assert!(pass, "criterion {n}: {}", detail.as_ref());
}

fn one_or_two() -> PpLaw {
    PpLaw::gw(1, 2, 0.5, 0.0, 1.0).unwrap()
}

fn binary() -> PpLaw {
    PpLaw::binary(-std::f64::consts::LN_2, 1.0).unwrap()
}

fn mq(spec: &str) -> MqLaw {
    match parse_law(spec).unwrap() {
        Law::Mq(l) => l,
        Law::Pp(pp) => induced_mq_law(&pp).unwrap(),
    }
}

fn pp(spec: &str) -> PpLaw {
    match parse_law(spec).unwrap() {
        Law::Pp(pp) => pp,
        Law::Mq(l) => panic!("{} is not a point process", l.id),
    }
}

#[test]
fn criterion_01_exact_geometric_perpetuity() {
    let start = Instant::now();
    let z = simulate_zinf(&MqLaw::constant(0.5, 1.0), ZinfPolicy::default(), &mut Stream::new(SEED))
        .unwrap()
        .value;
    let (z3, _) = dp_exact_zn(&[((0.5, 1.0), 1.0)], 3).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = (z - 2.0).abs() <= 1e-9 && z3.atoms() == [(1.75, 1.0)] && elapsed < 1.0;
    verdict(1, pass, format!("Z = {z}, Z_3 atoms {:?}, {elapsed:.3}s", z3.atoms()));
}

#[test]
fn criterion_02_perpetuity_mean() {
    let start = Instant::now();
    let uniform = zinf_mean(&MqLaw::uniform(1.0), ZinfPolicy::default(), 100_000, SEED, CONF).unwrap();
    let induced = induced_mq_law(&one_or_two()).unwrap();
    let gw = zinf_mean(&induced, ZinfPolicy::default(), 100_000, SEED, CONF).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = uniform.contains(2.0) && gw.contains(10.0 / 3.0) && elapsed < 30.0;
    verdict(
        2,
        pass,
        format!("uniform {:.5} in {:.5?}, induced {:.5} in {:.5?}, {elapsed:.1}s", uniform.estimate, uniform.ci, gw.estimate, gw.ci),
    );
}

#[test]
fn criterion_03_ladder_bound() {
    let mut detail = Vec::new();
    let mut pass = true;
    for law in [MqLaw::uniform(1.0), MqLaw::constant(0.5, 1.0)] {
        for p in ladder_bound_check(&law, &[0.5, 0.1, 0.01], 100_000, SEED, 1_000_000, CONF).unwrap() {
            pass &= p.sigma.ci.1 <= p.bound;
            detail.push(format!("{} x={}: {:.3}<={:.3}", law.id, p.x, p.sigma.ci.1, p.bound));
        }
    }
    verdict(3, pass, detail.join(", "));
}

#[test]
fn criterion_04_wald_identity() {
    let mut detail = Vec::new();
    let mut pass = true;
    for x in [1.0, 2.0, 4.0] {
        let w = v_function_and_wald(&MqLaw::uniform(1.0), None, x, 20_000, SEED, CONF).unwrap();
        pass &= w.wald_pass && w.lower_bound_pass;
        detail.push(format!("x={x}: residual {:.4} se {:.4}", w.residual.estimate, w.residual.stderr));
    }
    let det = v_function_and_wald(&MqLaw::constant(0.5, 1.0), Some(2.0), 4.0f64.ln(), 1000, SEED, CONF).unwrap();
    pass &= det.residual.estimate == 0.0 && det.v.estimate == 2.0;
    detail.push(format!("deterministic residual {} V {}", det.residual.estimate, det.v.estimate));
    verdict(4, pass, detail.join(", "));
}

#[test]
fn criterion_05_martingale_mean_one() {
    let pp = one_or_two();
    let ts = trajectories(&pp, 10, 10_000, SEED, "acceptance", BrwCaps::default()).unwrap();
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for n in 0..=10 {
        let v: Vec<f64> = ts.iter().map(|t| t.w[n]).collect();
        let e = EstimateReport::from_values(&v, CONF, SEED, &pp.id, "w");
        pass &= e.within_sigmas(1.0, 3.0);
        if e.stderr > 0.0 {
            worst = worst.max((e.estimate - 1.0).abs() / e.stderr);
        }
    }
    let b = binary();
    let exact = (0..=12).all(|n| generation_at(&b, n, &Stream::new(SEED), BrwCaps::default()).unwrap().w() == 1.0);
    verdict(5, pass && exact, format!("max |mean - 1|/se {worst:.2}, binary W_n == 1: {exact}"));
}

#[test]
fn criterion_06_second_moment_closed_form() {
    let pp = one_or_two();
    let oracle = |n: usize| 4.0 / 3.0 - (2.0f64 / 3.0).powi(n as i32) / 3.0;
    let paths = spine_paths(&pp, 6, TiltMode::Exact, 100_000, SEED, "acceptance", BrwCaps::default()).unwrap();
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for n in 1..=6 {
        let v: Vec<f64> = paths.iter().map(|p| p.what_at(n)).collect();
        let e = EstimateReport::from_values(&v, CONF, SEED, &pp.id, "what");
        pass &= e.within_sigmas(oracle(n), 3.0);
        worst = worst.max((e.estimate - oracle(n)).abs() / e.stderr);
    }
    let mut exact = Vec::new();
    for n in 1..=2 {
        let what = exact_what_law(&pp, n).unwrap().mean();
        let w2 = exact_w_law(&pp, n).unwrap().expect(|x| x * x);
        pass &= (what - oracle(n)).abs() < 1e-12 && (w2 - oracle(n)).abs() < 1e-12;
        exact.push(format!("n={n}: {what:.12}"));
    }
    verdict(6, pass, format!("max |mean - oracle|/se {worst:.2}, exact {}", exact.join(", ")));
}

#[test]
fn criterion_07_spine_identity() {
    let mut pass = true;
    let mut detail = Vec::new();
    for law in [one_or_two(), binary()] {
        let paths = spine_paths(&law, 6, TiltMode::Exact, 10_000, SEED, "acceptance", BrwCaps::default()).unwrap();
        let worst = paths
            .iter()
            .map(|p| {
                let r = verify_spine_identity(p);
                r.decomposition.max(r.closed_form) / (1.0 + p.what)
            })
            .fold(0.0, f64::max);
        pass &= worst <= 1e-10;
        detail.push(format!("{}: {worst:.2e}", law.id));
    }
    let path = simulate_what(&binary(), 3, TiltMode::Exact, &Stream::new(SEED), BrwCaps::default()).unwrap();
    let gap = verify_spine_identity(&path).uncorrected_discrepancy;
    pass &= (gap - 1.75).abs() < 1e-12;
    detail.push(format!("uncorrected discrepancy at n=3: {gap}"));
    verdict(7, pass, detail.join(", "));
}

#[test]
fn criterion_08_size_biasing() {
    let pp = one_or_two();
    let caps = BrwCaps::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for n in 1..=2 {
        let id = size_biasing_check(&pp, n, |w| *w.last().unwrap(), TiltMode::Exact, 100_000, SEED, caps, CONF).unwrap();
        let log = size_biasing_check(&pp, n, |w| w.last().unwrap().ln_1p(), TiltMode::Exact, 100_000, SEED, caps, CONF).unwrap();
        pass &= id.pass && log.pass;
        detail.push(format!("n={n}: id {:.4}/{:.4}, log1p {:.4}/{:.4}", id.lhs.estimate, id.rhs.estimate, log.lhs.estimate, log.rhs.estimate));
    }
    let what = exact_what_law(&pp, 1).unwrap().mean();
    let w2 = exact_w_law(&pp, 1).unwrap().expect(|x| x * x);
    pass &= (what - 10.0 / 9.0).abs() < 1e-12 && (w2 - 10.0 / 9.0).abs() < 1e-12;
    detail.push(format!("exact n=1: {what:.12} = {w2:.12}"));
    verdict(8, pass, detail.join(", "));
}

#[test]
fn criterion_09_reciprocal_martingale() {
    let pp = one_or_two();
    let rs = reciprocal_martingale_check(&pp, 5, 100_000, SEED, BrwCaps::default(), CONF).unwrap();
    let mc = rs[1..].iter().all(|e| e.within_sigmas(1.0, 3.0));
    let exact = exact_what_law(&pp, 1).unwrap().expect(|x| 1.0 / x);
    let worst = rs[1..].iter().map(|e| (e.estimate - 1.0).abs() / e.stderr).fold(0.0, f64::max);
    verdict(9, mc && (exact - 1.0).abs() < 1e-12, format!("max |mean - 1|/se {worst:.2}, exact n=1 {exact:.15}"));
}

#[test]
fn criterion_10_tail_inequalities() {
    let law = MqLaw::finite(vec![((0.5, 1.0), 0.5), ((0.5, 2.0), 0.5)]).unwrap();
    let symm = symm_check(&law, &geometric_grid(0.1, 3.5, 8), 100_000, SEED, ZinfPolicy::default(), CONF).unwrap();
    let grid = geometric_grid(1.0, 8.0, 10);
    let sup = tailsup_check(&one_or_two(), 0.5, &grid, 12, 100_000, SEED, BrwCaps::default(), CONF).unwrap();
    verdict(
        10,
        symm.pass && sup.pass,
        format!("symm best constant {:?}, tailsup best constant {:?}", symm.best_constant, sup.upper.best_constant),
    );
}

#[test]
fn criterion_11_moment_boundary() {
    let schedule = BatchSchedule { first_log2: 12, last_log2: 22, groups: 256 };
    let b = BFunctionSpec::power(1.0).unwrap();
    let perp = |beta: f64| {
        let law = mq(&format!("logpareto_q:m=0.5,beta={beta}"));
        perpetuity_moment_diagnostic(&law, &b, &schedule, 11).unwrap().verdict
    };
    let w1 = |beta: f64| {
        let law = pp(&format!("heavy_gw:beta={beta},p=0.5,gamma=1"));
        w1_moment_diagnostic(&law, &b, &schedule, 11).unwrap().verdict
    };
    let got = [perp(2.5), perp(1.5), w1(4.0), w1(1.0)];
    let want = [Verdict::Converging, Verdict::Diverging, Verdict::Converging, Verdict::Diverging];
    verdict(11, got == want, format!("logpareto 2.5/1.5: {:?}/{:?}, heavy_gw 4/1: {:?}/{:?}", got[0], got[1], got[2], got[3]));
}

#[test]
fn criterion_12_exact_oracle_agreement() {
    let law = mq("twopoint:m1=2,p1=0.5,m2=0.125,q=1");
    let support = law.support().unwrap();
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for n in 1..=6 {
        let (exact, _) = dp_exact_zn(&support, n).unwrap();
        let base = Stream::for_tag(SEED, "acceptance-ks").fork(n as u64);
        let zs: Vec<f64> = replicate(100_000, &base, |_, s| simulate_path(&law, n, s).unwrap().z());
        let ks = ks_one_sample(&zs, &exact, 1e-9);
        pass &= ks.pass;
        worst = worst.max(ks.distance / ks.critical);
    }
    verdict(12, pass, format!("max KS distance / 1% critical value {worst:.3}"));
}

#[test]
fn criterion_13_thread_count_reproducibility() {
    let scenarios = [
        ("uniform:q=1", "perp-moment"),
        ("gw:nmin=1,nmax=2,p=0.5,x=0,gamma=1", "brw-martingale"),
        ("gw:nmin=1,nmax=2,p=0.5,x=0,gamma=1", "spine-sizebias"),
        ("finite:m=0.5;0.5,q=1;2,p=0.5;0.5", "inequality:symm"),
    ];
    let run = |law: &str, exp: &str, threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_perpetua"))
            .args(["run", "--law", law, "--experiment", exp, "--reps", "4000", "--seed", "13", "--threads", threads])
            .env_remove("PERPETUA_THREADS")
            .output()
            .unwrap();
        assert!(!out.stdout.is_empty(), "{exp}: {}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let mut same = Vec::new();
    for (law, exp) in scenarios {
        let one = run(law, exp, "1");
        same.push([2, 4].iter().all(|t| run(law, exp, &t.to_string()) == one));
    }
    verdict(13, same.iter().all(|&s| s), format!("byte-identical for {} scenarios: {same:?}", scenarios.len()));
}
