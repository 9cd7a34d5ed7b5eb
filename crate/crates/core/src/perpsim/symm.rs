use serde::Serialize;

use super::path::PerpetuityPath;
use super::zinf::ZinfPolicy;
use crate::error::{Error, Result};
use crate::law::{MqKind, MqLaw};
use crate::rng::Stream;

/// Relative tolerance for matching block products of finite laws.
pub const PRODUCT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmDraw {
    /// `M_1 M_2`.
    pub pi2: f64,
    /// `Q_1 + M_1 Q_2`.
    pub q2: f64,
    /// `Q^(2) - Q'^(2)`.
    pub qbar: f64,
}

#[derive(Debug, Clone)]
enum Mode {
    /// Fresh `Q`s with the same `(M_1, M_2)`.
    Independent,
    /// Pairs of atoms sorted by product, with group boundaries.
    Finite {
        pairs: Vec<(f64, f64, f64, f64, f64)>,
        cumulative: Vec<f64>,
        group_of: Vec<usize>,
        groups: Vec<(usize, usize)>,
    },
}

/// Conditional symmetrization of `Q^(2) = Q_1 + M_1 Q_2` given the block
/// product.
#[derive(Debug, Clone)]
pub struct PairSymmetrizer<'a> {
    law: &'a MqLaw,
    mode: Mode,
    /// True when distinct products were merged within [`PRODUCT_TOL`].
    pub tolerance_merged: bool,
}

impl<'a> PairSymmetrizer<'a> {
    pub fn new(law: &'a MqLaw) -> Result<Self> {
        if let Some(atoms) = law.support() {
            let live: Vec<_> = atoms.into_iter().filter(|a| a.1 > 0.0).collect();
            let mut pairs = Vec::new();
            for &((m1, q1), p1) in &live {
                for &((m2, q2), p2) in &live {
                    // (product, weight, m1, q1 + m1 q2, m2)
                    pairs.push((m1 * m2, p1 * p2, m1, q1 + m1 * q2, m2));
                }
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut groups: Vec<(usize, usize)> = Vec::new();
            let mut group_of = Vec::with_capacity(pairs.len());
            let mut merged = false;
            for (i, p) in pairs.iter().enumerate() {
                match groups.last_mut() {
                    Some(g) if (pairs[g.0].0 - p.0).abs() <= PRODUCT_TOL * p.0.abs().max(pairs[g.0].0.abs()) => {
                        merged |= pairs[g.0].0 != p.0;
                        g.1 = i + 1;
                    }
                    _ => groups.push((i, i + 1)),
                }
                group_of.push(groups.len() - 1);
            }
            let mut acc = 0.0;
            let cumulative = pairs
                .iter()
                .map(|p| {
                    acc += p.1;
                    acc
                })
                .collect();
            return Ok(Self {
                law,
                mode: Mode::Finite {
                    pairs,
                    cumulative,
                    group_of,
                    groups,
                },
                tolerance_merged: merged,
            });
        }
        match law.kind {
            MqKind::Spine(_) | MqKind::Finite { .. } => Err(Error::UnsupportedConditioning(law.id.clone())),
            _ => Ok(Self {
                law,
                mode: Mode::Independent,
                tolerance_merged: false,
            }),
        }
    }

    pub fn draw(&self, rng: &mut Stream) -> Result<SymmDraw> {
        match &self.mode {
            Mode::Independent => {
                let a = self.law.sample(rng)?;
                let b = self.law.sample(rng)?;
                let a2 = self.law.sample(rng)?;
                let b2 = self.law.sample(rng)?;
                let q2 = a.q + a.m * b.q;
                let q2p = a2.q + a.m * b2.q;
                Ok(SymmDraw {
                    pi2: a.m * b.m,
                    q2,
                    qbar: q2 - q2p,
                })
            }
            Mode::Finite {
                pairs,
                cumulative,
                group_of,
                groups,
            } => {
                let total = *cumulative.last().unwrap();
                let pick = |u: f64, lo: usize, hi: usize| {
                    let base = if lo == 0 { 0.0 } else { cumulative[lo - 1] };
                    let target = base + u * (cumulative[hi - 1] - base);
                    (lo + cumulative[lo..hi].partition_point(|&c| c <= target)).min(hi - 1)
                };
                let i = pick(rng.open01(), 0, pairs.len());
                let (lo, hi) = groups[group_of[i]];
                let j = pick(rng.open01(), lo, hi);
                debug_assert!(total > 0.0);
                Ok(SymmDraw {
                    pi2: pairs[i].0,
                    q2: pairs[i].3,
                    qbar: pairs[i].3 - pairs[j].3,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmSample {
    /// `sup_k |Pi_{2k-2} Qbar_k^(2)|`.
    pub sup_qbar: f64,
    /// `sup_{k>=0} |Pi_{2k}|`.
    pub sup_pi_even: f64,
    /// `Z_inf` built from the same blocks.
    pub z: f64,
}

/// Runs blocks of two steps until the truncation policy is met.
pub fn symm_sample(sym: &PairSymmetrizer, policy: ZinfPolicy, rng: &mut Stream) -> Result<SymmSample> {
    let mut pi = 1.0f64;
    let mut z = 0.0;
    let mut sup_qbar: f64 = 0.0;
    let mut sup_pi: f64 = 1.0;
    let mut calm = 0;
    for _ in 0..policy.nmax {
        let d = sym.draw(rng)?;
        let inc = pi * d.q2;
        z += inc;
        sup_qbar = sup_qbar.max((pi * d.qbar).abs());
        pi *= d.pi2;
        sup_pi = sup_pi.max(pi.abs());
        calm = if inc.abs() <= policy.eps { calm + 1 } else { 0 };
        if pi.abs() <= policy.eps && calm >= policy.quiet {
            return Ok(SymmSample {
                sup_qbar,
                sup_pi_even: sup_pi,
                z,
            });
        }
    }
    Err(Error::NonConvergent {
        steps: policy.nmax,
        last_increment: f64::NAN,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupFunctionals {
    /// `sup_{n>=1} |Pi_{n-1} Q_n|` and the index attaining it.
    pub sup_pq: f64,
    pub argmax_pq: usize,
    /// `sup_{n>=0} |Pi_n|` and its index.
    pub sup_pi: f64,
    pub argmax_pi: usize,
    /// Running maxima of `|Pi_{n-1} Q_n|` for `n = 1..len`.
    pub running_pq: Vec<f64>,
    /// Running maxima of `|Pi_n|` for `n = 0..len`.
    pub running_pi: Vec<f64>,
}

/// Exact maxima over a realized path, compared in log space.
pub fn sup_functionals(path: &PerpetuityPath) -> Result<SupFunctionals> {
    if path.is_empty() {
        return Err(Error::InvalidParameter("path must have at least one step".into()));
    }
    let term = |n: usize| {
        let p = path.pi_abs[n - 1];
        let q = path.steps[n - 1].q.abs();
        let log = -path.logpi[n - 1] + path.steps[n - 1].log_abs_q;
        let lin = if p > 0.0 && p.is_finite() { p * q } else { log.exp() };
        (log, lin)
    };
    let (mut best_log, mut sup_pq) = term(1);
    let mut argmax_pq = 1;
    let mut running_pq = vec![sup_pq];
    for n in 2..=path.len() {
        let (log, lin) = term(n);
        if log > best_log {
            best_log = log;
            sup_pq = lin;
            argmax_pq = n;
        }
        running_pq.push(sup_pq);
    }
    let mut best = -path.logpi[0];
    let mut sup_pi = path.pi_abs[0];
    let mut argmax_pi = 0;
    let mut running_pi = vec![sup_pi];
    for n in 1..=path.len() {
        if -path.logpi[n] > best {
            best = -path.logpi[n];
            sup_pi = path.pi_abs[n];
            argmax_pi = n;
        }
        running_pi.push(sup_pi);
    }
    Ok(SupFunctionals {
        sup_pq,
        argmax_pq,
        sup_pi,
        argmax_pi,
        running_pq,
        running_pi,
    })
}
