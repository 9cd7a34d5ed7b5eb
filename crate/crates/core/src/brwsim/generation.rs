use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::PpLaw;
use crate::rng::Stream;
use crate::stats::compensated_sum;

/// Limits on population size and depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrwCaps {
    pub pop_cap: usize,
    pub gen_cap: usize,
}

impl Default for BrwCaps {
    fn default() -> Self {
        Self {
            pop_cap: 1 << 22,
            gen_cap: 30,
        }
    }
}

/// One generation of a branching random walk, stored flat.
///
/// `weights[i]` is `L(v) = e^{gamma S(v)} / m(gamma)^n`, kept as a product of
/// per-step factors so that dyadic laws stay exact. `logweights` carries the
/// same quantity additively for underflow-safe use.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub n: usize,
    pub positions: Vec<f64>,
    pub logweights: Vec<f64>,
    pub weights: Vec<f64>,
    pub law_id: String,
    pub gamma: f64,
    pub m_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationSummary {
    pub n: usize,
    pub pop: usize,
    pub w: f64,
    pub minlogw: f64,
    pub maxlogw: f64,
}

impl Generation {
    pub fn root(pp: &PpLaw) -> Self {
        Self {
            n: 0,
            positions: vec![0.0],
            logweights: vec![0.0],
            weights: vec![1.0],
            law_id: pp.id.clone(),
            gamma: pp.gamma,
            m_gamma: pp.m_gamma(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `W_n`, summed with compensation.
    pub fn w(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn summary(&self) -> GenerationSummary {
        let fold = |f: fn(f64, f64) -> f64, init| self.logweights.iter().copied().fold(init, f);
        GenerationSummary {
            n: self.n,
            pop: self.len(),
            w: self.w(),
            minlogw: fold(f64::min, f64::INFINITY),
            maxlogw: fold(f64::max, f64::NEG_INFINITY),
        }
    }

    /// Largest `|logweight - (gamma S - n log m)|` over the generation.
    pub fn logweight_defect(&self) -> f64 {
        let shift = self.n as f64 * self.m_gamma.ln();
        self.positions
            .iter()
            .zip(&self.logweights)
            .map(|(s, lw)| (lw - (self.gamma * s - shift)).abs())
            .fold(0.0, f64::max)
    }
}

/// Reproduces every individual of `gen` once. Individual `i` draws from
/// `stream.at(&[n, i])`, so the result does not depend on scheduling.
pub fn grow(gen: &Generation, pp: &PpLaw, stream: &Stream, caps: BrwCaps) -> Result<Generation> {
    if gen.n >= caps.gen_cap {
        return Err(Error::InvalidParameter(format!("generation {} is at the cap {}", gen.n, caps.gen_cap)));
    }
    if gen.is_empty() {
        return Err(Error::Extinct);
    }
    let log_m = pp.m_gamma().ln();
    let explosion = || Error::PopulationExplosion {
        generation: gen.n + 1,
        population: caps.pop_cap + 1,
        partial: Vec::new(),
    };
    let broods: Vec<Option<Vec<f64>>> = (0..gen.len())
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            let mut s = stream.at(&[gen.n as u64, i as u64]);
            let mut xs = Vec::new();
            pp.sample_into(&mut s, &mut xs, caps.pop_cap).then_some(xs)
        })
        .collect();
    let mut total = 0usize;
    for b in &broods {
        total += b.as_ref().ok_or_else(explosion)?.len();
    }
    if total > caps.pop_cap {
        return Err(Error::PopulationExplosion {
            generation: gen.n + 1,
            population: total,
            partial: Vec::new(),
        });
    }
    let mut next = Generation {
        n: gen.n + 1,
        positions: Vec::with_capacity(total),
        logweights: Vec::with_capacity(total),
        weights: Vec::with_capacity(total),
        law_id: gen.law_id.clone(),
        gamma: pp.gamma,
        m_gamma: pp.m_gamma(),
    };
    for (i, brood) in broods.into_iter().enumerate() {
        for x in brood.expect("checked above") {
            let step = pp.gamma * x - log_m;
            next.positions.push(gen.positions[i] + x);
            next.logweights.push(gen.logweights[i] + step);
            next.weights.push(gen.weights[i] * ((pp.gamma * x).exp() / pp.m_gamma()));
        }
    }
    Ok(next)
}

/// Grows a fresh tree to depth `n` (or to extinction).
pub fn generation_at(pp: &PpLaw, n: usize, stream: &Stream, caps: BrwCaps) -> Result<Generation> {
    let mut g = Generation::root(pp);
    while g.n < n {
        if g.is_empty() {
            g.n = n;
            break;
        }
        g = grow(&g, pp, stream, caps)?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::replicate;
    use crate::stats::EstimateReport;

    fn one_or_two() -> PpLaw {
        PpLaw::gw(1, 2, 0.5, 0.0, 1.0).unwrap()
    }

    #[test]
    fn deterministic_binary_is_exact() {
        let pp = PpLaw::deterministic_binary();
        let mut g = Generation::root(&pp);
        let s = Stream::new(1);
        for n in 1..=12 {
            g = grow(&g, &pp, &s, BrwCaps::default()).unwrap();
            assert_eq!(g.len(), 1 << n);
            assert!(g.weights.iter().all(|&w| w == 0.5f64.powi(n)));
            assert_eq!(g.w(), 1.0);
            assert!(g.logweight_defect() < 1e-12);
        }
    }

    #[test]
    fn first_generation_mean_one() {
        let pp = one_or_two();
        let base = Stream::new(2);
        let ws = replicate(20_000, &base, |_, s| {
            let g = grow(&Generation::root(&pp), &pp, s, BrwCaps::default()).unwrap();
            g.w()
        });
        assert!(ws.iter().all(|&w| (w - 2.0 / 3.0).abs() < 1e-15 || (w - 4.0 / 3.0).abs() < 1e-15));
        let r = EstimateReport::from_values(&ws, 0.99, 2, &pp.id, "w1");
        assert!(r.contains(1.0), "{r:?}");
    }

    #[test]
    fn extinction_probability() {
        // P{N=0} = 1/3, P{N=3} = 2/3; extinction solves s = 1/3 + 2/3 s^3.
        let pp = PpLaw::new(
            "gw03",
            1.0,
            crate::law::PpKind::Finite {
                configs: vec![(vec![], 1.0 / 3.0), (vec![0.0; 3], 2.0 / 3.0)],
            },
        )
        .unwrap();
        let root = (-1.0 + 3f64.sqrt()) / 2.0;
        assert!((1.0 / 3.0 + 2.0 / 3.0 * root.powi(3) - root).abs() < 1e-12);
        let base = Stream::new(3);
        let caps = BrwCaps { pop_cap: 1 << 16, gen_cap: 30 };
        let dead = replicate(20_000, &base, |_, s| {
            // A population of 40 dies out with probability below 1e-30.
            let mut g = Generation::root(&pp);
            while g.n < 12 && !g.is_empty() && g.len() < 40 {
                g = grow(&g, &pp, s, caps).unwrap();
            }
            (g.is_empty() as u8 as f64, g.w())
        });
        let ext: Vec<f64> = dead.iter().map(|d| d.0).collect();
        assert!(dead.iter().all(|d| d.0 == 0.0 || d.1 == 0.0));
        // Extinction by generation 12 is within 1e-6 of the limit here.
        let r = EstimateReport::from_values(&ext, 0.99, 3, &pp.id, "ext");
        assert!(r.within_sigmas(root, 3.0), "{r:?} vs {root}");
    }

    #[test]
    fn caps_are_enforced() {
        let pp = PpLaw::deterministic_binary();
        let caps = BrwCaps { pop_cap: 100, gen_cap: 30 };
        let e = generation_at(&pp, 8, &Stream::new(0), caps).unwrap_err();
        assert!(matches!(e, Error::PopulationExplosion { generation: 7, population: 128, .. }));
        let caps = BrwCaps { pop_cap: 1000, gen_cap: 2 };
        assert!(generation_at(&pp, 3, &Stream::new(0), caps).is_err());
        let empty = Generation {
            positions: vec![],
            logweights: vec![],
            weights: vec![],
            ..Generation::root(&pp)
        };
        assert_eq!(grow(&empty, &pp, &Stream::new(0), caps), Err(Error::Extinct));
    }

    #[test]
    fn logweights_match_positions() {
        let pp = PpLaw::new(
            "mix",
            0.7,
            crate::law::PpKind::Finite {
                configs: vec![(vec![0.3, -1.2], 0.5), (vec![0.1], 0.5)],
            },
        )
        .unwrap();
        let g = generation_at(&pp, 10, &Stream::new(4), BrwCaps::default()).unwrap();
        assert!(g.logweight_defect() < 1e-12);
        for (lw, w) in g.logweights.iter().zip(&g.weights) {
            assert!((lw.exp() / w - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_logweights_follow_spine_products() {
        let pp = PpLaw::new(
            "mix",
            1.0,
            crate::law::PpKind::Finite {
                configs: vec![(vec![0.0, -0.7], 0.5), (vec![0.2], 0.25), (vec![-0.3, -0.3, 0.1], 0.25)],
            },
        )
        .unwrap();
        let m = crate::law::induced_m_law(&pp).unwrap();
        let mut pi = crate::stats::ExactLaw::point_mass(1.0);
        for _ in 0..4 {
            pi = pi.combine(&m, |a, b| a * b).unwrap();
        }
        let base = Stream::new(12);
        for t in [-1.5f64, -0.8, -0.3, 0.0, 0.4] {
            let v = replicate(20_000, &base, |_, s| {
                let g = generation_at(&pp, 4, s, BrwCaps::default()).unwrap();
                g.weights
                    .iter()
                    .zip(&g.logweights)
                    .filter(|(_, &lw)| lw <= t)
                    .map(|(w, _)| w)
                    .sum::<f64>()
            });
            let r = EstimateReport::from_values(&v, 0.99, 12, &pp.id, "weighted");
            let target = pi.cdf(t.exp() * (1.0 + 1e-12));
            assert!(r.within_sigmas(target, 3.0), "t={t}: {r:?} vs {target}");
        }
    }
}
