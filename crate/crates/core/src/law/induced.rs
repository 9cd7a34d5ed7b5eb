use super::mq::{MqKind, MqLaw};
use super::pp::{PpKind, PpLaw};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::stats::{mc_mean, EstimateReport, ExactLaw};

/// Law of `M` given by `P{M in B} = E sum_{|v|=1} L(v) 1_B(L(v))`.
pub fn induced_m_law(pp: &PpLaw) -> Result<ExactLaw> {
    let law = match &pp.kind {
        PpKind::HeavyGw { .. } => ExactLaw::point_mass(1.0 / pp.m_gamma()),
        _ => {
            let configs = pp.truncated_enumeration(1e-12)?;
            let m = pp.m_gamma();
            let mut raw = Vec::new();
            for (xs, p) in &configs {
                for x in xs {
                    let l = (pp.gamma * x).exp() / m;
                    raw.push((l, p * l));
                }
            }
            ExactLaw::from_atoms(raw)
        }
    };
    let mass_at_one = law.mass_at(1.0);
    if mass_at_one >= 1.0 - 1e-12 {
        return Err(Error::DegenerateBrw);
    }
    debug_assert!(law.atoms().iter().all(|a| a.0 > 0.0));
    Ok(law)
}

/// Exact laws of `W_1` and of `Q` (the size-biasing of `W_1`).
pub fn induced_q_and_w1_law(pp: &PpLaw) -> Result<(ExactLaw, ExactLaw)> {
    let configs = pp.enumerate()?;
    let m = pp.m_gamma();
    let w1 = ExactLaw::from_atoms(
        configs
            .iter()
            .map(|(xs, p)| (pp.total_weight(xs) / m, *p))
            .collect(),
    );
    let q = ExactLaw::from_atoms(
        w1.atoms()
            .iter()
            .filter(|a| a.0 > 0.0)
            .map(|&(w, p)| (w, w * p))
            .collect(),
    );
    Ok((w1, q))
}

/// The perpetuity driver of the spine: `M = e^{gamma X_chosen}/m`,
/// `Q = sum_j e^{gamma X_j}/m` under the tilted law. Finite laws give an
/// exact joint support.
pub fn induced_mq_law(pp: &PpLaw) -> Result<MqLaw> {
    let id = format!("spine({})", pp.id);
    match &pp.kind {
        PpKind::Finite { configs } => {
            let m = pp.m_gamma();
            let mut raw: Vec<((f64, f64), f64)> = Vec::new();
            for (xs, p) in configs {
                let q = pp.total_weight(xs) / m;
                for x in xs {
                    let l = (pp.gamma * x).exp() / m;
                    raw.push(((l, q), p * l));
                }
            }
            raw.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1)));
            let mut atoms: Vec<((f64, f64), f64)> = Vec::new();
            for (mq, p) in raw {
                match atoms.last_mut() {
                    Some(last) if last.0 == mq => last.1 += p,
                    _ => atoms.push((mq, p)),
                }
            }
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            for a in &mut atoms {
                a.1 /= total;
            }
            MqLaw::new(id, MqKind::Finite { atoms })
        }
        _ => MqLaw::new(id, MqKind::Spine(Box::new(pp.clone()))),
    }
}

/// Monte Carlo mean of `sum_i e^{gamma X_i}`; exact for finite laws.
pub fn estimate_m_gamma(pp: &PpLaw, n: usize, seed: u64, confidence: f64) -> Result<EstimateReport> {
    if n < 100 {
        return Err(Error::InvalidParameter("estimate_m_gamma needs n >= 100".into()));
    }
    if pp.is_enumerable() {
        let m = pp.m_gamma();
        return Ok(EstimateReport {
            estimate: m,
            stderr: 0.0,
            n: n as u64,
            ci: (m, m),
            seed,
            law_id: pp.id.clone(),
            tag: "m-gamma".into(),
        });
    }
    Ok(mc_mean(
        |_, s: &mut Stream| pp.total_weight(&pp.sample(s)),
        n,
        seed,
        &pp.id,
        "m-gamma",
        confidence,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gw_induced_m_is_two_thirds() {
        let m = induced_m_law(&PpLaw::gw(1, 2, 0.5, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m.atoms()[0].0 - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binary_induced_m_is_half() {
        let m = induced_m_law(&PpLaw::deterministic_binary()).unwrap();
        assert_eq!(m.atoms(), &[(0.5, 1.0)]);
    }

    #[test]
    fn single_child_is_degenerate() {
        let pp = PpLaw::new("one", 1.0, PpKind::Finite { configs: vec![(vec![0.0], 1.0)] }).unwrap();
        assert_eq!(induced_m_law(&pp), Err(Error::DegenerateBrw));
    }

    #[test]
    fn q_and_w1_laws() {
        let (w1, q) = induced_q_and_w1_law(&PpLaw::gw(1, 2, 0.5, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(w1.len(), 2);
        assert!((w1.atoms()[0].0 - 2.0 / 3.0).abs() < 1e-15 && w1.atoms()[0].1 == 0.5);
        assert!((q.atoms()[0].1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((q.atoms()[1].1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((q.mean() - 10.0 / 9.0).abs() < 1e-15);
        let (w1, q) = induced_q_and_w1_law(&PpLaw::deterministic_binary()).unwrap();
        assert_eq!(w1.atoms(), &[(1.0, 1.0)]);
        assert_eq!(q.atoms(), &[(1.0, 1.0)]);
    }

    #[test]
    fn sampler_only_laws_are_not_enumerable() {
        let pp = PpLaw::new("h", 1.0, PpKind::HeavyGw { beta: 3.0, p: 0.5 }).unwrap();
        assert!(matches!(induced_q_and_w1_law(&pp), Err(Error::NotEnumerable(_))));
    }

    #[test]
    fn spine_driver_of_gw() {
        let law = induced_mq_law(&PpLaw::gw(1, 2, 0.5, 0.0, 1.0).unwrap()).unwrap();
        let s = law.support().unwrap();
        assert_eq!(s.len(), 2);
        assert!((s[0].0 .0 - 2.0 / 3.0).abs() < 1e-15 && (s[0].0 .1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((s[0].1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((s[1].0 .1 - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn m_gamma_estimates() {
        let gw = PpLaw::gw(1, 2, 0.5, 0.0, 1.0).unwrap();
        assert_eq!(estimate_m_gamma(&gw, 100, 1, 0.99).unwrap().estimate, 1.5);
        let p = PpLaw::new("poisson", 0.3, PpKind::Poisson { lambda: 2.0, x: 0.0 }).unwrap();
        let r = estimate_m_gamma(&p, 100_000, 1, 0.99).unwrap();
        assert!(r.contains(2.0), "{r:?}");
    }
}
