//! Cross-module properties checked on randomly drawn laws and seeds.

use perpetua::brwsim::{generation_at, martingale_trajectory, BrwCaps};
use perpetua::law::{classify_regime, induced_q_and_w1_law, AEvaluator, MqLaw, PpLaw, TiltMode};
use perpetua::parallel::{replicate, with_threads};
use perpetua::perpsim::{simulate_path, simulate_zinf, sup_functionals, ZinfPolicy, ZinfStatus};
use perpetua::rvkit::{default_grid, make_surrogate, select_c, BFunctionSpec, PhiFunction, SurrogateKind};
use perpetua::spinesim::{simulate_what, verify_spine_identity};
use perpetua::stats::{dp_exact_zn, inequality_check, moment_growth_diagnostic, BatchSchedule, CurvePoint, SlackRule};
use perpetua::Stream;
use proptest::prelude::*;

fn gw_law() -> impl Strategy<Value = PpLaw> {
    (1usize..3, 1usize..3, 0.05f64..0.95, -1.0f64..0.5, 0.3f64..2.0)
        .prop_map(|(nmin, extra, p, x, gamma)| PpLaw::gw(nmin, nmin + extra, p, x, gamma).unwrap())
}

fn two_atoms() -> impl Strategy<Value = Vec<((f64, f64), f64)>> {
    (0.05f64..1.8, 0.05f64..1.8, -2.0f64..2.0, 0.5f64..3.0, 0.1f64..0.9)
        .prop_map(|(m1, m2, q1, q2, p)| vec![((m1, q1), p), ((m2, q2), 1.0 - p)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn surrogates_are_concave_and_f_is_subadditive(alpha in 0.2f64..3.0, x in 0.0f64..1e6, y in 0.0f64..1e6) {
        let b = BFunctionSpec::power(alpha).unwrap();
        let grid = default_grid();
        let c = select_c(b, &grid).unwrap();
        for kind in [SurrogateKind::F, SurrogateKind::G] {
            let s = make_surrogate(b, c, kind).unwrap();
            prop_assert_eq!(s.value(0.0), 0.0);
            prop_assert!(s.certify(&grid).is_ok());
        }
        let f = make_surrogate(b, c, SurrogateKind::F).unwrap();
        prop_assert!(f.value(x + y) <= f.value(x) + f.value(y) + 1e-9);
    }

    #[test]
    fn phi_star_inequality(alpha in 0.3f64..2.0, t in 0.1f64..0.9, x in 1.0f64..1e8) {
        let b = BFunctionSpec::power(alpha).unwrap();
        let c = select_c(b, &default_grid()).unwrap();
        let g = make_surrogate(b, c, SurrogateKind::G).unwrap();
        let law = MqLaw::constant(0.5, 1.0);
        let phi = PhiFunction::new(g, AEvaluator::closed(&law).unwrap()).unwrap();
        let (lhs, rhs) = (phi.eval(t * x).unwrap(), t * phi.eval(x).unwrap());
        prop_assert!(lhs >= rhs - 1e-9 * (1.0 + rhs), "phi({t}x) = {lhs} < {rhs}");
    }

    #[test]
    fn tilted_mass_and_size_biased_q(pp in gw_law()) {
        let configs = pp.enumerate().unwrap();
        let mass: f64 = configs.iter().map(|(xs, p)| p * pp.total_weight(xs) / pp.m_gamma()).sum();
        prop_assert!((mass - 1.0).abs() <= 1e-12);
        let (w1, q) = induced_q_and_w1_law(&pp).unwrap();
        for &(x, pq) in q.atoms() {
            prop_assert!((pq - x * w1.mass_at(x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn regime_ignores_scale_of_q(atoms in two_atoms(), scale in 0.01f64..100.0) {
        let scaled: Vec<_> = atoms.iter().map(|&((m, q), p)| ((m, q * scale), p)).collect();
        let a = classify_regime(&MqLaw::finite(atoms).unwrap(), 10_000, &mut Stream::new(3)).unwrap();
        let b = classify_regime(&MqLaw::finite(scaled).unwrap(), 10_000, &mut Stream::new(3)).unwrap();
        prop_assert_eq!(a.case, b.case);
    }

    #[test]
    fn degenerate_fixed_point_is_exact(m1 in -0.9f64..0.9, m2 in -0.9f64..0.9, c in -5.0f64..5.0, seed in any::<u64>()) {
        prop_assume!(m1 != 0.0 && m2 != 0.0 && c != 0.0);
        let law = MqLaw::finite(vec![((m1, c * (1.0 - m1)), 0.5), ((m2, c * (1.0 - m2)), 0.5)]).unwrap();
        let out = simulate_zinf(&law, ZinfPolicy::default(), &mut Stream::new(seed)).unwrap();
        prop_assert_eq!(out.status, ZinfStatus::FixedPoint);
        prop_assert_eq!(out.value, law.degenerate_fixed_point().unwrap());
    }

    #[test]
    fn running_maxima_never_decrease(atoms in two_atoms(), n in 1usize..200, seed in any::<u64>()) {
        let law = MqLaw::finite(atoms).unwrap();
        let path = simulate_path(&law, n, &mut Stream::new(seed)).unwrap();
        let s = sup_functionals(&path).unwrap();
        prop_assert!(s.running_pq.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(s.running_pi.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(*s.running_pi.last().unwrap(), s.sup_pi);
    }

    #[test]
    fn logweights_follow_positions(pp in gw_law(), n in 0usize..7, seed in any::<u64>()) {
        let g = generation_at(&pp, n, &Stream::new(seed), BrwCaps::default()).unwrap();
        prop_assert!(g.logweight_defect() <= 1e-12 * (1.0 + n as f64));
    }

    #[test]
    fn spine_identity_holds_on_every_path(pp in gw_law(), n in 1usize..6, seed in any::<u64>()) {
        let path = simulate_what(&pp, n, TiltMode::Exact, &Stream::new(seed), BrwCaps::default()).unwrap();
        let r = verify_spine_identity(&path);
        let tol = 1e-10 * (1.0 + path.what);
        prop_assert!(r.decomposition <= tol && r.closed_form <= tol, "{r:?}");
        prop_assert!(r.logweight_defect <= 1e-12 * (1.0 + n as f64));
        // Lower bounds by the last perpetuity term and by running maxima.
        let terms: Vec<f64> = (1..=n).map(|k| path.pi(k - 1) * path.steps[k - 1].q).collect();
        prop_assert!(path.what >= terms[n - 1] * (1.0 - 1e-12));
        let what = path.what_trajectory();
        let max_what = what[1..].iter().cloned().fold(f64::MIN, f64::max);
        let max_term = terms.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!(max_what >= max_term * (1.0 - 1e-12));
    }

    #[test]
    fn exact_law_masses_are_normalized(atoms in two_atoms(), n in 0usize..7) {
        let (z, pi) = dp_exact_zn(&atoms, n).unwrap();
        for law in [&z, &pi] {
            prop_assert!((law.total_mass() + law.deficit() - 1.0).abs() <= 1e-10);
            prop_assert!(law.atoms().windows(2).all(|w| w[0].0 < w[1].0));
        }
    }

    #[test]
    fn inequality_check_is_monotone_in_slack(
        pts in prop::collection::vec((0.01f64..1.0, 0.01f64..1.0), 1..12),
        constant in 0.5f64..4.0,
        slack in 0.0f64..0.5,
        more in 0.0f64..0.5,
    ) {
        let curve = |v: f64, i: usize| CurvePoint { t: i as f64, estimate: v, lo: 0.9 * v, hi: 1.1 * v };
        let lhs: Vec<_> = pts.iter().enumerate().map(|(i, p)| curve(p.0, i)).collect();
        let rhs: Vec<_> = pts.iter().enumerate().map(|(i, p)| curve(p.1, i)).collect();
        let at = |s: f64| inequality_check(&lhs, &rhs, SlackRule::Constant { constant, slack: s }).pass;
        prop_assert!(!at(slack) || at(slack + more));
    }

    #[test]
    fn moment_verdict_ignores_scale(beta in 0.5f64..3.0, scale in 0.01f64..100.0, seed in any::<u64>()) {
        let schedule = BatchSchedule { first_log2: 8, last_log2: 13, groups: 32 };
        let base = Stream::new(seed);
        let values = replicate(schedule.total(), &base, |_, s| s.open01().powf(-1.0 / beta));
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        prop_assert_eq!(
            moment_growth_diagnostic(&values, &schedule).verdict,
            moment_growth_diagnostic(&scaled, &schedule).verdict
        );
    }
}

#[test]
fn binary_martingale_is_one_at_every_generation() {
    let pp = PpLaw::deterministic_binary();
    let t = martingale_trajectory(&pp, 20, &Stream::new(5), BrwCaps::default()).unwrap();
    assert!(t.w.iter().all(|&w| w == 1.0));
}

#[test]
fn replicates_do_not_depend_on_worker_count() {
    let law = MqLaw::uniform(1.0);
    let draw = || {
        replicate(5000, &Stream::new(17), |_, s| {
            simulate_zinf(&law, ZinfPolicy::default(), s).unwrap().value.to_bits()
        })
    };
    let one = with_threads(1, draw);
    let four = with_threads(4, draw);
    assert_eq!(one, four);
}
