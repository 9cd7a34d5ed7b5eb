use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use super::pp::PpLaw;
use crate::error::{Error, Result};
use crate::rng::Stream;

/// One draw of the driver pair, with log-magnitudes kept separately so that
/// draws whose linear value under- or overflows remain usable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MqDraw {
    pub m: f64,
    pub q: f64,
    pub log_abs_m: f64,
    pub log_abs_q: f64,
}

impl MqDraw {
    pub fn linear(m: f64, q: f64) -> Self {
        Self {
            m,
            q,
            log_abs_m: m.abs().ln(),
            log_abs_q: q.abs().ln(),
        }
    }

    pub fn m_negative(&self) -> bool {
        self.m.is_sign_negative()
    }

    pub fn q_negative(&self) -> bool {
        self.q.is_sign_negative()
    }
}

/// Extended-real value of `E log|M|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogMoment {
    Finite(f64),
    NegInf,
    PosInf,
    /// Both `E log+|M|` and `E log-|M|` are infinite.
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    Independent,
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Analytics {
    pub log_moment: LogMoment,
    pub p_lt1: f64,
    pub p_gt1: f64,
    pub e_m: Option<f64>,
    pub e_abs_m: Option<f64>,
    pub e_q: Option<f64>,
    pub dependence: Dependence,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MqKind {
    Const { m: f64, q: f64 },
    TwoPoint { m1: f64, p1: f64, m2: f64, q: f64 },
    UniformM { q: f64 },
    /// `-log M ~ Normal(mu, sigma)`.
    LogNormalM { mu: f64, sigma: f64, q: f64 },
    /// `-log M ~ Pareto(1/2)` on `[1, inf)`, so `E log M = -inf`.
    HeavyLadder { q: f64 },
    /// `M` constant, `P{log Q > t} = t^-beta` for `t >= 1`.
    LogParetoQ { m: f64, beta: f64 },
    /// Joint atoms `((m, q), p)`.
    Finite { atoms: Vec<((f64, f64), f64)> },
    /// The spine pair of a branching random walk.
    Spine(Box<PpLaw>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MqLaw {
    pub id: String,
    pub kind: MqKind,
    hide_analytics: bool,
}

fn check_finite_atoms(atoms: &[((f64, f64), f64)]) -> Result<()> {
    if atoms.is_empty() {
        return Err(Error::InvalidParameter("finite law needs at least one atom".into()));
    }
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("probabilities sum to {total}, not 1")));
    }
    for &((m, q), p) in atoms {
        if !(p >= 0.0) || !m.is_finite() || !q.is_finite() {
            return Err(Error::InvalidParameter("atoms must be finite with p >= 0".into()));
        }
        if m == 0.0 && p > 0.0 {
            return Err(Error::InvalidParameter("M = 0 has positive probability".into()));
        }
    }
    let q_zero: f64 = atoms.iter().filter(|a| a.0 .1 == 0.0).map(|a| a.1).sum();
    if q_zero >= 1.0 - 1e-12 {
        return Err(Error::InvalidParameter("Q = 0 almost surely".into()));
    }
    Ok(())
}

impl MqLaw {
    pub fn new(id: impl Into<String>, kind: MqKind) -> Result<Self> {
        let bad = |s: &str| Err(Error::InvalidParameter(s.to_string()));
        match &kind {
            MqKind::Const { m, q } => {
                if *m == 0.0 || !m.is_finite() {
                    return bad("M must be finite and nonzero");
                }
                if *q == 0.0 || !q.is_finite() {
                    return bad("Q must be finite and nonzero");
                }
            }
            MqKind::TwoPoint { m1, p1, m2, q } => {
                if !(0.0..=1.0).contains(p1) || *m1 == 0.0 || *m2 == 0.0 || *q == 0.0 {
                    return bad("two-point law needs p1 in [0,1], nonzero atoms and Q");
                }
            }
            MqKind::UniformM { q } | MqKind::HeavyLadder { q } => {
                if *q == 0.0 || !q.is_finite() {
                    return bad("Q must be finite and nonzero");
                }
            }
            MqKind::LogNormalM { mu, sigma, q } => {
                if !mu.is_finite() || !(*sigma > 0.0) || *q == 0.0 {
                    return bad("lognormal law needs finite mu, sigma > 0 and Q != 0");
                }
            }
            MqKind::LogParetoQ { m, beta } => {
                if *m == 0.0 || !(*beta > 0.0) {
                    return bad("log-Pareto law needs M != 0 and beta > 0");
                }
            }
            MqKind::Finite { atoms } => check_finite_atoms(atoms)?,
            MqKind::Spine(_) => {}
        }
        Ok(Self {
            id: id.into(),
            kind,
            hide_analytics: false,
        })
    }

    pub fn constant(m: f64, q: f64) -> Self {
        Self::new(format!("const:m={m},q={q}"), MqKind::Const { m, q }).expect("valid constant law")
    }

    pub fn uniform(q: f64) -> Self {
        Self::new(format!("uniform:q={q}"), MqKind::UniformM { q }).expect("valid uniform law")
    }

    pub fn finite(atoms: Vec<((f64, f64), f64)>) -> Result<Self> {
        let id = format!(
            "finite:m={},q={},p={}",
            atoms.iter().map(|a| a.0 .0.to_string()).collect::<Vec<_>>().join(";"),
            atoms.iter().map(|a| a.0 .1.to_string()).collect::<Vec<_>>().join(";"),
            atoms.iter().map(|a| a.1.to_string()).collect::<Vec<_>>().join(";"),
        );
        Self::new(id, MqKind::Finite { atoms })
    }

    /// The same sampler with analytics withheld, forcing empirical paths.
    pub fn without_analytics(mut self) -> Self {
        self.hide_analytics = true;
        self
    }

    /// One draw of `(M, Q)`.
    pub fn sample(&self, rng: &mut Stream) -> Result<MqDraw> {
        let d = match &self.kind {
            MqKind::Const { m, q } => MqDraw::linear(*m, *q),
            MqKind::TwoPoint { m1, p1, m2, q } => {
                MqDraw::linear(if rng.open01() < *p1 { *m1 } else { *m2 }, *q)
            }
            MqKind::UniformM { q } => MqDraw::linear(rng.open01(), *q),
            MqKind::LogNormalM { mu, sigma, q } => {
                let z: f64 = StandardNormal.sample(rng);
                let y = mu + sigma * z;
                MqDraw {
                    m: (-y).exp(),
                    q: *q,
                    log_abs_m: -y,
                    log_abs_q: q.abs().ln(),
                }
            }
            MqKind::HeavyLadder { q } => {
                let y = rng.open01().powi(-2);
                MqDraw {
                    m: (-y).exp(),
                    q: *q,
                    log_abs_m: -y,
                    log_abs_q: q.abs().ln(),
                }
            }
            MqKind::LogParetoQ { m, beta } => {
                let t = rng.open01().powf(-1.0 / beta);
                MqDraw {
                    m: *m,
                    q: t.exp(),
                    log_abs_m: m.abs().ln(),
                    log_abs_q: t,
                }
            }
            MqKind::Finite { atoms } => {
                let u = rng.open01();
                let mut acc = 0.0;
                let mut pick = atoms[atoms.len() - 1].0;
                for &(mq, p) in atoms {
                    acc += p;
                    if u < acc {
                        pick = mq;
                        break;
                    }
                }
                MqDraw::linear(pick.0, pick.1)
            }
            MqKind::Spine(pp) => pp.spine_mq(rng),
        };
        if d.log_abs_m == f64::NEG_INFINITY || d.log_abs_m.is_nan() {
            return Err(Error::SamplerViolation { law: self.id.clone() });
        }
        Ok(d)
    }

    /// Finite joint support, when the law has one.
    pub fn support(&self) -> Option<Vec<((f64, f64), f64)>> {
        match &self.kind {
            MqKind::Const { m, q } => Some(vec![((*m, *q), 1.0)]),
            MqKind::TwoPoint { m1, p1, m2, q } => {
                Some(vec![((*m1, *q), *p1), ((*m2, *q), 1.0 - p1)])
            }
            MqKind::Finite { atoms } => Some(atoms.clone()),
            _ => None,
        }
    }

    pub fn is_independent_or_finite(&self) -> bool {
        !matches!(self.kind, MqKind::Spine(_))
    }

    /// `P{-log|M| > y}` in closed form.
    pub fn survival_neglogm(&self, y: f64) -> Option<f64> {
        if self.hide_analytics {
            return None;
        }
        let atoms_survival = |ms: &[(f64, f64)]| {
            ms.iter()
                .filter(|(m, _)| -m.abs().ln() > y)
                .map(|a| a.1)
                .sum::<f64>()
        };
        Some(match &self.kind {
            MqKind::Const { m, .. } | MqKind::LogParetoQ { m, .. } => atoms_survival(&[(*m, 1.0)]),
            MqKind::TwoPoint { m1, p1, m2, .. } => atoms_survival(&[(*m1, *p1), (*m2, 1.0 - p1)]),
            MqKind::Finite { atoms } => {
                atoms_survival(&atoms.iter().map(|&((m, _), p)| (m, p)).collect::<Vec<_>>())
            }
            MqKind::UniformM { .. } => (-y.max(0.0)).exp(),
            MqKind::LogNormalM { mu, sigma, .. } => {
                Normal::new(*mu, *sigma).ok()?.sf(y)
            }
            MqKind::HeavyLadder { .. } => {
                if y < 1.0 {
                    1.0
                } else {
                    y.powf(-0.5)
                }
            }
            MqKind::Spine(pp) => atoms_survival(&[(pp.spine_constant_m()?, 1.0)]),
        })
    }

    /// `A(x) = E min(log-|M|, x)` in closed form.
    pub fn a_closed(&self, x: f64) -> Option<f64> {
        if self.hide_analytics {
            return None;
        }
        if x <= 0.0 {
            return Some(0.0);
        }
        let atoms_a = |ms: &[(f64, f64)]| {
            ms.iter()
                .map(|&(m, p)| p * x.min((-m.abs().ln()).max(0.0)))
                .sum::<f64>()
        };
        Some(match &self.kind {
            MqKind::Const { m, .. } | MqKind::LogParetoQ { m, .. } => atoms_a(&[(*m, 1.0)]),
            MqKind::TwoPoint { m1, p1, m2, .. } => atoms_a(&[(*m1, *p1), (*m2, 1.0 - p1)]),
            MqKind::Finite { atoms } => {
                atoms_a(&atoms.iter().map(|&((m, _), p)| (m, p)).collect::<Vec<_>>())
            }
            MqKind::UniformM { .. } => -(-x).exp_m1(),
            MqKind::LogNormalM { mu, sigma, .. } => {
                let n = Normal::standard();
                let g = |y: f64| {
                    let z = (y - mu) / sigma;
                    (y - mu) * n.sf(z) - sigma * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
                };
                g(x) - g(0.0)
            }
            MqKind::HeavyLadder { .. } => {
                if x <= 1.0 {
                    x
                } else {
                    1.0 + 2.0 * (x.sqrt() - 1.0)
                }
            }
            MqKind::Spine(pp) => atoms_a(&[(pp.spine_constant_m()?, 1.0)]),
        })
    }

    pub fn analytics(&self) -> Option<Analytics> {
        if self.hide_analytics {
            return None;
        }
        let from_atoms = |atoms: &[((f64, f64), f64)], dependence| {
            let live = atoms.iter().filter(|a| a.1 > 0.0);
            Analytics {
                log_moment: LogMoment::Finite(live.clone().map(|&((m, _), p)| p * m.abs().ln()).sum()),
                p_lt1: live.clone().filter(|a| a.0 .0.abs() < 1.0).map(|a| a.1).sum(),
                p_gt1: live.clone().filter(|a| a.0 .0.abs() > 1.0).map(|a| a.1).sum(),
                e_m: Some(live.clone().map(|&((m, _), p)| p * m).sum()),
                e_abs_m: Some(live.clone().map(|&((m, _), p)| p * m.abs()).sum()),
                e_q: Some(live.map(|&((_, q), p)| p * q).sum()),
                dependence,
            }
        };
        Some(match &self.kind {
            MqKind::Const { .. } | MqKind::TwoPoint { .. } => {
                from_atoms(&self.support()?, Dependence::Independent)
            }
            MqKind::Finite { atoms } => from_atoms(atoms, Dependence::Coupled),
            MqKind::UniformM { q } => Analytics {
                log_moment: LogMoment::Finite(-1.0),
                p_lt1: 1.0,
                p_gt1: 0.0,
                e_m: Some(0.5),
                e_abs_m: Some(0.5),
                e_q: Some(*q),
                dependence: Dependence::Independent,
            },
            MqKind::LogNormalM { mu, sigma, q } => {
                let n = Normal::standard();
                let em = (-mu + 0.5 * sigma * sigma).exp();
                Analytics {
                    log_moment: LogMoment::Finite(-mu),
                    p_lt1: n.sf(-mu / sigma),
                    p_gt1: n.cdf(-mu / sigma),
                    e_m: Some(em),
                    e_abs_m: Some(em),
                    e_q: Some(*q),
                    dependence: Dependence::Independent,
                }
            }
            MqKind::HeavyLadder { q } => Analytics {
                log_moment: LogMoment::NegInf,
                p_lt1: 1.0,
                p_gt1: 0.0,
                // E exp(-Y) with Y ~ Pareto(1/2): integral of e^-y (1/2) y^-3/2 over [1, inf).
                e_m: Some(heavy_ladder_mean_m()),
                e_abs_m: Some(heavy_ladder_mean_m()),
                e_q: Some(*q),
                dependence: Dependence::Independent,
            },
            MqKind::LogParetoQ { m, .. } => Analytics {
                log_moment: LogMoment::Finite(m.abs().ln()),
                p_lt1: if m.abs() < 1.0 { 1.0 } else { 0.0 },
                p_gt1: if m.abs() > 1.0 { 1.0 } else { 0.0 },
                e_m: Some(*m),
                e_abs_m: Some(m.abs()),
                // E exp(T) is infinite for every beta.
                e_q: None,
                dependence: Dependence::Independent,
            },
            MqKind::Spine(pp) => {
                let m = pp.spine_constant_m()?;
                Analytics {
                    log_moment: LogMoment::Finite(m.ln()),
                    p_lt1: if m < 1.0 { 1.0 } else { 0.0 },
                    p_gt1: if m > 1.0 { 1.0 } else { 0.0 },
                    e_m: Some(m),
                    e_abs_m: Some(m),
                    e_q: pp.spine_mean_q(),
                    dependence: Dependence::Coupled,
                }
            }
        })
    }

    /// If `Q + M c = c` almost surely for some `c`, returns it.
    pub fn degenerate_fixed_point(&self) -> Option<f64> {
        let atoms = self.support()?;
        let live: Vec<_> = atoms.into_iter().filter(|a| a.1 > 0.0).collect();
        let ((m0, q0), _) = live.first()?;
        if *m0 == 1.0 {
            return None;
        }
        let c = q0 / (1.0 - m0);
        live.iter()
            .all(|&((m, q), _)| (q + m * c - c).abs() <= 1e-12 * c.abs().max(1.0))
            .then_some(c)
    }
}

fn heavy_ladder_mean_m() -> f64 {
    // Substituting y = 1/s^2 turns the integral into E[exp(-U^-2)], U uniform.
    let n = 200_000;
    let h = 1.0 / n as f64;
    (0..n)
        .map(|i| {
            let u = (i as f64 + 0.5) * h;
            (-(u * u).recip()).exp()
        })
        .sum::<f64>()
        * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_law_is_a_point_mass() {
        let law = MqLaw::constant(0.5, 1.0);
        let mut s = Stream::new(1);
        for _ in 0..10 {
            let d = law.sample(&mut s).unwrap();
            assert_eq!((d.m, d.q), (0.5, 1.0));
        }
    }

    #[test]
    fn two_point_draws_are_atoms() {
        let law = MqLaw::new("tp", MqKind::TwoPoint { m1: 2.0, p1: 0.5, m2: 0.125, q: 1.0 }).unwrap();
        let mut s = Stream::new(2);
        let mut seen = [false; 2];
        for _ in 0..100 {
            let d = law.sample(&mut s).unwrap();
            assert_eq!(d.q, 1.0);
            if d.m == 2.0 {
                seen[0] = true;
            } else {
                assert_eq!(d.m, 0.125);
                seen[1] = true;
            }
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn uniform_in_open_interval() {
        let law = MqLaw::uniform(1.0);
        let mut s = Stream::new(3);
        for _ in 0..1000 {
            let d = law.sample(&mut s).unwrap();
            assert!(d.m > 0.0 && d.m < 1.0);
        }
    }

    #[test]
    fn heavy_ladder_keeps_log_when_m_underflows() {
        let law = MqLaw::new("h", MqKind::HeavyLadder { q: 1.0 }).unwrap();
        let mut s = Stream::new(4);
        let draws: Vec<MqDraw> = (0..10_000).map(|_| law.sample(&mut s).unwrap()).collect();
        assert!(draws.iter().any(|d| d.m == 0.0));
        assert!(draws.iter().all(|d| d.log_abs_m <= -1.0 && d.log_abs_m.is_finite()));
    }

    #[test]
    fn closed_form_a_values() {
        let half = MqLaw::constant(0.5, 1.0);
        assert!((half.a_closed(1.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(half.a_closed(0.1).unwrap(), 0.1);
        let u = MqLaw::uniform(1.0);
        assert!((u.a_closed(1.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn lognormal_a_matches_quadrature() {
        let law = MqLaw::new("ln", MqKind::LogNormalM { mu: 0.3, sigma: 0.8, q: 1.0 }).unwrap();
        let x = 2.5;
        let n = 100_000;
        let h = x / n as f64;
        let quad: f64 = (0..n)
            .map(|i| law.survival_neglogm((i as f64 + 0.5) * h).unwrap())
            .sum::<f64>()
            * h;
        assert!((law.a_closed(x).unwrap() - quad).abs() < 1e-9);
    }

    #[test]
    fn invalid_laws_are_rejected() {
        assert!(MqLaw::new("z", MqKind::Const { m: 0.0, q: 1.0 }).is_err());
        assert!(MqLaw::finite(vec![((0.5, 1.0), 0.5)]).is_err());
        assert!(MqLaw::finite(vec![((0.5, 0.0), 1.0)]).is_err());
    }

    #[test]
    fn fixed_point_detection() {
        let law = MqLaw::finite(vec![((0.5, 1.0), 0.5), ((0.25, 1.5), 0.5)]).unwrap();
        assert_eq!(law.degenerate_fixed_point(), Some(2.0));
        assert_eq!(MqLaw::uniform(1.0).degenerate_fixed_point(), None);
    }
}
