use serde::Serialize;

use crate::brwsim::{martingale_trajectory, BrwCaps};
use crate::error::{Error, Result};
use crate::law::{choose_child, PpKind, PpLaw, TiltMode};
use crate::rng::Stream;
use crate::stats::{CompensatedSum, ExactLaw};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpineStep {
    /// Tilted configuration of displacements.
    pub config: Vec<f64>,
    /// Index of the spine child within `config`.
    pub child: usize,
    pub m: f64,
    pub q: f64,
    /// Likelihood ratio of the configuration (1 under exact tilting).
    pub likelihood: f64,
}

/// Draws one spine generation: a configuration from the tilted law and a
/// child picked with probability proportional to `e^{gamma x}`.
pub fn spine_step(pp: &PpLaw, mode: TiltMode, rng: &mut Stream) -> Result<SpineStep> {
    if mode == TiltMode::Exact && matches!(pp.kind, PpKind::HeavyGw { .. }) {
        return Err(Error::UnsupportedTilting(pp.id.clone()));
    }
    let (config, likelihood) = pp.tilted_config(rng, mode, 1 << 22)?;
    if config.is_empty() {
        return Err(Error::UnsupportedTilting(format!("{}: empty configuration drawn in importance mode", pp.id)));
    }
    let total = pp.total_weight(&config);
    let child = choose_child(pp.gamma, &config, total, rng);
    let m_gamma = pp.m_gamma();
    Ok(SpineStep {
        m: (pp.gamma * config[child]).exp() / m_gamma,
        q: total / m_gamma,
        child,
        config,
        likelihood,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sibling {
    /// `L^(u)`.
    pub weight: f64,
    pub logweight: f64,
    /// `W_0(u), ..., W_{n-k}(u)` of the unmodified subtree rooted at `u`.
    pub subtree: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpineRecord {
    pub m: f64,
    pub q: f64,
    /// `L^(v_k)`.
    pub weight: f64,
    pub logweight: f64,
    pub siblings: Vec<Sibling>,
}

/// The spine of the size-biased tree up to generation `n`, with every
/// sibling subtree reduced to its martingale trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpinePath {
    pub n: usize,
    pub steps: Vec<SpineRecord>,
    pub what: f64,
    /// Product of the per-step likelihood ratios.
    pub likelihood: f64,
    pub law_id: String,
}

impl SpinePath {
    /// `Pi_k = L^(v_k)`, with `Pi_0 = 1`.
    pub fn pi(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.steps[k - 1].weight
        }
    }

    /// `W^_k` for every `k <= n`, built from the stored records.
    pub fn what_trajectory(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.what_at(k)).collect()
    }

    /// `L^(v_k) + sum_{j<=k} sum_u L^(u) W_{k-j}(u)`, folded in index order.
    pub fn what_at(&self, k: usize) -> f64 {
        let mut acc = CompensatedSum::new();
        acc.add(self.pi(k));
        for (j, step) in self.steps[..k].iter().enumerate() {
            for s in &step.siblings {
                acc.add(s.weight * s.subtree[k - j - 1]);
            }
        }
        acc.value()
    }

    /// `sum_{k<=n} Pi_{k-1} Q_k`.
    pub fn q_majorant(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for k in 1..=self.n {
            acc.add(self.pi(k - 1) * self.steps[k - 1].q);
        }
        acc.value()
    }

    /// `R_{n,k} = sum_u (L^(u) / L^(v_{k-1})) (W_{n-k}(u) - 1)`.
    pub fn remainder(&self, k: usize) -> f64 {
        let parent = self.pi(k - 1);
        let mut acc = CompensatedSum::new();
        for s in &self.steps[k - 1].siblings {
            acc.add(s.weight / parent * (s.subtree[self.n - k] - 1.0));
        }
        acc.value()
    }
}

/// Simulates the spine to depth `n`. Spine draws use `stream.fork(0)`;
/// the `j`-th sibling at step `k` roots a plain branching random walk on
/// `stream.at(&[1, k, j])`.
pub fn simulate_what(pp: &PpLaw, n: usize, mode: TiltMode, stream: &Stream, caps: BrwCaps) -> Result<SpinePath> {
    if n > caps.gen_cap {
        return Err(Error::InvalidParameter(format!("horizon {n} exceeds the generation cap")));
    }
    let mut spine = stream.fork(0);
    let mut steps = Vec::with_capacity(n);
    let (mut weight, mut logweight, mut likelihood) = (1.0f64, 0.0f64, 1.0f64);
    let log_m = pp.m_gamma().ln();
    for k in 1..=n {
        let st = spine_step(pp, mode, &mut spine)?;
        likelihood *= st.likelihood;
        let mut siblings = Vec::with_capacity(st.config.len().saturating_sub(1));
        for (j, &x) in st.config.iter().enumerate() {
            if j == st.child {
                continue;
            }
            let sub = martingale_trajectory(pp, n - k, &stream.at(&[1, k as u64, j as u64]), caps)?;
            siblings.push(Sibling {
                weight: weight * ((pp.gamma * x).exp() / pp.m_gamma()),
                logweight: logweight + pp.gamma * x - log_m,
                subtree: sub.w,
            });
        }
        weight *= st.m;
        logweight += pp.gamma * st.config[st.child] - log_m;
        steps.push(SpineRecord {
            m: st.m,
            q: st.q,
            weight,
            logweight,
            siblings,
        });
    }
    let mut path = SpinePath {
        n,
        steps,
        what: 0.0,
        likelihood,
        law_id: pp.id.clone(),
    };
    path.what = path.what_at(n);
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpineResiduals {
    pub decomposition: f64,
    pub closed_form: f64,
    /// `1 + sum_k Pi_{k-1} (Q_k + R_{n,k})`, the uncorrected rearrangement.
    pub uncorrected: f64,
    pub uncorrected_discrepancy: f64,
    /// Largest `|log Pi_k - logweight_k|`.
    pub logweight_defect: f64,
    /// Largest `|Q_k - (M_k + sibling ratios)|`.
    pub q_defect: f64,
}

/// Residuals of the three renditions of `W^_n` on one path.
pub fn verify_spine_identity(path: &SpinePath) -> SpineResiduals {
    let n = path.n;
    let decomposition = (path.what - path.what_at(n)).abs();
    let mut closed = CompensatedSum::new();
    closed.add(path.pi(n));
    let mut uncorrected_sum = CompensatedSum::new();
    uncorrected_sum.add(1.0);
    let mut logweight_defect: f64 = 0.0;
    let mut q_defect: f64 = 0.0;
    for k in 1..=n {
        let st = &path.steps[k - 1];
        let prev = path.pi(k - 1);
        let r = path.remainder(k);
        closed.add(prev * st.q);
        closed.add(-path.pi(k));
        closed.add(prev * r);
        uncorrected_sum.add(prev * (st.q + r));
        logweight_defect = logweight_defect.max((st.weight.ln() - st.logweight).abs());
        let ratios: f64 = st.siblings.iter().map(|s| s.weight / prev).sum();
        q_defect = q_defect.max((st.q - (st.m + ratios)).abs());
    }
    SpineResiduals {
        decomposition,
        closed_form: (path.what - closed.value()).abs(),
        uncorrected: uncorrected_sum.value(),
        uncorrected_discrepancy: (path.what - uncorrected_sum.value()).abs(),
        logweight_defect,
        q_defect,
    }
}

/// Exact law of `W^_n` for a finite law, from the recursion that places an
/// independent `W^_{n-1}` under the spine child and `W_{n-1}` elsewhere.
pub fn exact_what_law(pp: &PpLaw, n: usize) -> Result<ExactLaw> {
    let tilted = pp.tilted_enumeration()?;
    let m = pp.m_gamma();
    let mut what = ExactLaw::point_mass(1.0);
    let mut w = ExactLaw::point_mass(1.0);
    for _ in 0..n {
        let mut parts = Vec::new();
        for (xs, p) in &tilted {
            let fs: Vec<f64> = xs.iter().map(|x| (pp.gamma * x).exp() / m).collect();
            let total: f64 = fs.iter().sum();
            for (i, &fi) in fs.iter().enumerate() {
                let mut acc = what.map(|v| fi * v);
                for (j, &fj) in fs.iter().enumerate() {
                    if j != i {
                        acc = acc.combine(&w, |a, b| a + fj * b)?;
                    }
                }
                parts.push((acc, p * fi / total));
            }
        }
        let next_w = crate::brwsim::exact_w_law_step(pp, &w)?;
        what = ExactLaw::mixture(&parts);
        w = next_w;
    }
    Ok(what)
}
