use serde::Serialize;

use super::generation::{generation_at, grow, BrwCaps, Generation};
use crate::error::{Error, Result};
use crate::law::PpLaw;
use crate::parallel::try_replicate;
use crate::rng::Stream;
use crate::stats::{ks_one_sample, ks_two_sample, ExactLaw, KsReport};

/// Cap on enumerated generation configurations in exact oracles.
pub const ENUMERATION_LIMIT: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// `W_0, ..., W_n`; zeros after extinction.
    pub w: Vec<f64>,
    pub extinct_at: Option<usize>,
}

/// `W_0..W_{n_max}` along one tree. Generation `n` uses `stream.at(&[n, i])`
/// for individual `i`.
pub fn martingale_trajectory(pp: &PpLaw, n_max: usize, stream: &Stream, caps: BrwCaps) -> Result<Trajectory> {
    let mut g = Generation::root(pp);
    let mut w = vec![1.0];
    let mut extinct_at = None;
    while w.len() <= n_max {
        if extinct_at.is_some() {
            w.push(0.0);
            continue;
        }
        g = match grow(&g, pp, stream, caps) {
            Ok(g) => g,
            Err(Error::PopulationExplosion {
                generation, population, ..
            }) => {
                return Err(Error::PopulationExplosion {
                    generation,
                    population,
                    partial: w,
                })
            }
            Err(e) => return Err(e),
        };
        w.push(g.w());
        if g.is_empty() {
            extinct_at = Some(g.n);
        }
    }
    Ok(Trajectory { w, extinct_at })
}

/// Trajectories for `reps` independent trees, replicate `i` on
/// `Stream::for_tag(seed, tag).fork(i)`.
pub fn trajectories(pp: &PpLaw, n_max: usize, reps: usize, seed: u64, tag: &str, caps: BrwCaps) -> Result<Vec<Trajectory>> {
    let base = Stream::for_tag(seed, tag);
    try_replicate(reps, &base, |_, s| martingale_trajectory(pp, n_max, s, caps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaximalW {
    pub value: f64,
    /// The trajectory stopped at a finite horizon, so the supremum may be
    /// larger.
    pub truncated: bool,
}

/// `W* = sup_n W_n` per trajectory.
pub fn maximal_w(trajectories: &[Trajectory]) -> Vec<MaximalW> {
    trajectories
        .iter()
        .map(|t| MaximalW {
            value: t.w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            truncated: t.extinct_at.is_none(),
        })
        .collect()
}

/// Per-child factors `e^{gamma x} / m(gamma)` of each configuration.
fn factor_configs(pp: &PpLaw) -> Result<Vec<(Vec<f64>, f64)>> {
    let m = pp.m_gamma();
    Ok(pp
        .truncated_enumeration(1e-14)?
        .into_iter()
        .map(|(xs, p)| (xs.iter().map(|x| (pp.gamma * x).exp() / m).collect(), p))
        .collect())
}

/// Law of `sum_i c_i X_i` for independent `X_i ~ law`.
fn weighted_sum(factors: &[f64], law: &ExactLaw) -> Result<ExactLaw> {
    let mut acc = ExactLaw::point_mass(0.0);
    for &c in factors {
        acc = acc.combine(law, |a, b| a + c * b)?;
    }
    Ok(acc)
}

/// One step of the first-generation recursion `W_{n+1} = sum_i L_i W_n^(i)`.
pub fn exact_w_law_step(pp: &PpLaw, w: &ExactLaw) -> Result<ExactLaw> {
    let parts = factor_configs(pp)?
        .iter()
        .map(|(fs, p)| weighted_sum(fs, w).map(|l| (l, *p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExactLaw::mixture(&parts))
}

/// Exact law of `W_n` for a finite law.
pub fn exact_w_law(pp: &PpLaw, n: usize) -> Result<ExactLaw> {
    let mut law = ExactLaw::point_mass(1.0);
    for _ in 0..n {
        law = exact_w_law_step(pp, &law)?;
    }
    Ok(law)
}

/// All realizations of generation `n` as weight lists with probabilities.
pub fn enumerate_generation(pp: &PpLaw, n: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let configs = factor_configs(pp)?;
    let mut gens: Vec<(Vec<f64>, f64)> = vec![(vec![1.0], 1.0)];
    for _ in 0..n {
        let mut next = Vec::new();
        for (ws, p) in &gens {
            // Every individual picks a configuration independently.
            let mut partial: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), *p)];
            for &w in ws {
                let mut grown = Vec::with_capacity(partial.len() * configs.len());
                for (acc, q) in &partial {
                    for (fs, r) in &configs {
                        let mut v = acc.clone();
                        v.extend(fs.iter().map(|f| w * f));
                        grown.push((v, q * r));
                    }
                }
                if grown.len() > ENUMERATION_LIMIT {
                    return Err(Error::SupportExplosion { limit: ENUMERATION_LIMIT });
                }
                partial = grown;
            }
            next.extend(partial);
            if next.len() > ENUMERATION_LIMIT {
                return Err(Error::SupportExplosion { limit: ENUMERATION_LIMIT });
            }
        }
        gens = next;
    }
    Ok(gens)
}

/// Exact law of `sum_{|v|=n} L(v) W_m(v)`, grafting exact subtree laws on
/// every enumerated generation `n`.
pub fn exact_grafted_law(pp: &PpLaw, n: usize, m: usize) -> Result<ExactLaw> {
    let sub = exact_w_law(pp, m)?;
    let parts = enumerate_generation(pp, n)?
        .into_iter()
        .map(|(ws, p)| weighted_sum(&ws, &sub).map(|l| (l, p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExactLaw::mixture(&parts))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixpointReport {
    pub n: usize,
    pub m: usize,
    pub reps: usize,
    pub direct_mean: f64,
    pub grafted_mean: f64,
    pub ks_distance: f64,
    pub ks_critical: f64,
    /// Sup distance between the exact laws of both sides, when enumerable.
    pub exact_distance: Option<f64>,
    pub pass: bool,
}

fn cdf_distance(a: &ExactLaw, b: &ExactLaw) -> f64 {
    a.atoms()
        .iter()
        .chain(b.atoms())
        .map(|&(v, _)| (a.cdf(v) - b.cdf(v)).abs())
        .fold(0.0, f64::max)
}

/// Compares `W_{n+m}` with `sum_{|v|=n} L(v) W_m(v)` where the subtree
/// martingales are independent runs grafted onto a realized generation `n`.
pub fn check_fixpoint(pp: &PpLaw, n: usize, m: usize, reps: usize, seed: u64, caps: BrwCaps) -> Result<FixpointReport> {
    if n + m > caps.gen_cap {
        return Err(Error::InvalidParameter("n + m exceeds the generation cap".into()));
    }
    let direct_base = Stream::for_tag(seed, "fixpoint-direct");
    let direct = try_replicate(reps, &direct_base, |_, s| generation_at(pp, n + m, s, caps).map(|g| g.w()))?;
    let graft_base = Stream::for_tag(seed, "fixpoint-graft");
    let grafted = try_replicate(reps, &graft_base, |_, s| {
        let g = generation_at(pp, n, &s.fork(0), caps)?;
        let subtrees = s.fork(1);
        let terms = g
            .weights
            .iter()
            .enumerate()
            .map(|(i, &w)| generation_at(pp, m, &subtrees.fork(i as u64), caps).map(|t| w * t.w()))
            .collect::<Result<Vec<f64>>>()?;
        Ok(crate::stats::compensated_sum(terms))
    })?;
    let ks: KsReport = ks_two_sample(&direct, &grafted);
    let exact_distance = if pp.is_enumerable() {
        match (exact_w_law(pp, n + m), exact_grafted_law(pp, n, m)) {
            (Ok(a), Ok(b)) => Some(cdf_distance(&a, &b)),
            _ => None,
        }
    } else {
        None
    };
    let mean = |v: &[f64]| crate::stats::compensated_sum(v.iter().copied()) / v.len() as f64;
    let exact_ok = exact_distance.is_none_or(|d| d <= 1e-10);
    Ok(FixpointReport {
        n,
        m,
        reps,
        direct_mean: mean(&direct),
        grafted_mean: mean(&grafted),
        ks_distance: ks.distance,
        ks_critical: ks.critical,
        exact_distance,
        pass: (ks.pass || ks.distance == 0.0) && exact_ok,
    })
}

/// One-sample KS of simulated `W_n` against the exact law.
pub fn w_matches_exact(pp: &PpLaw, n: usize, reps: usize, seed: u64, caps: BrwCaps) -> Result<KsReport> {
    let law = exact_w_law(pp, n)?;
    let base = Stream::for_tag(seed, "w-exact");
    let ws = try_replicate(reps, &base, |_, s| generation_at(pp, n, s, caps).map(|g| g.w()))?;
    Ok(ks_one_sample(&ws, &law, 1e-9))
}
