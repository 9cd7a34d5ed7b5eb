use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::{classify_regime, Case, MqKind, MqLaw};
use crate::rng::Stream;
use crate::stats::{mc_mean, EstimateReport};

/// Heuristic truncation of `Z_inf`: stop once `|Pi_n| <= eps` and the last
/// `quiet` increments were all at most `eps` in magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZinfPolicy {
    pub eps: f64,
    pub nmax: u64,
    pub quiet: u32,
}

impl Default for ZinfPolicy {
    fn default() -> Self {
        Self {
            eps: 1e-12,
            nmax: 1_000_000,
            quiet: 16,
        }
    }
}

impl ZinfPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || self.nmax < 1 {
            return Err(Error::InvalidParameter("need eps > 0 and nmax >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ZinfStatus {
    Truncated,
    /// `Q + M c = c` almost surely; `c` is returned exactly.
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZinfOutcome {
    pub value: f64,
    pub status: ZinfStatus,
    pub steps: u64,
    pub last_increment: f64,
}

/// Whether the law is known (in closed form) to have `Pi_n -> 0`.
fn known_convergent(law: &MqLaw) -> bool {
    classify_regime(law, 0, &mut Stream::new(0))
        .map(|r| matches!(r.case, Case::C1 | Case::C2))
        .unwrap_or(false)
}

/// Shortcut data computed once per law for repeated sampling.
#[derive(Debug, Clone)]
pub struct ZinfSampler<'a> {
    law: &'a MqLaw,
    policy: ZinfPolicy,
    fixed_point: Option<f64>,
}

impl<'a> ZinfSampler<'a> {
    pub fn new(law: &'a MqLaw, policy: ZinfPolicy) -> Result<Self> {
        policy.validate()?;
        let fixed_point = if known_convergent(law) {
            law.degenerate_fixed_point()
        } else {
            None
        };
        Ok(Self {
            law,
            policy,
            fixed_point,
        })
    }

    pub fn sample(&self, rng: &mut Stream) -> Result<ZinfOutcome> {
        if let Some(c) = self.fixed_point {
            return Ok(ZinfOutcome {
                value: c,
                status: ZinfStatus::FixedPoint,
                steps: 0,
                last_increment: 0.0,
            });
        }
        let ZinfPolicy { eps, nmax, quiet } = self.policy;
        let mut z = 0.0;
        let mut pi = 1.0f64;
        let mut calm = 0u32;
        let mut last = 0.0;
        for n in 1..=nmax {
            let d = self.law.sample(rng)?;
            let inc = if pi == 0.0 { 0.0 } else { pi * d.q };
            z += inc;
            pi *= d.m;
            last = inc.abs();
            calm = if last <= eps { calm + 1 } else { 0 };
            if !(pi.is_finite() && z.is_finite()) {
                return Err(Error::NonConvergent {
                    steps: n,
                    last_increment: last,
                });
            }
            if pi.abs() <= eps && calm >= quiet {
                return Ok(ZinfOutcome {
                    value: z,
                    status: ZinfStatus::Truncated,
                    steps: n,
                    last_increment: last,
                });
            }
        }
        Err(Error::NonConvergent {
            steps: nmax,
            last_increment: last,
        })
    }
}

pub fn simulate_zinf(law: &MqLaw, policy: ZinfPolicy, rng: &mut Stream) -> Result<ZinfOutcome> {
    ZinfSampler::new(law, policy)?.sample(rng)
}

/// `log Z_inf` for perpetuities with positive terms, accumulated in log
/// space so that heavy `Q` (e.g. `log Q` Pareto) never overflows.
/// Stops when `|Pi_n| <= eps` and the last `quiet` terms were below `eps`
/// relative to the running sum.
///
/// Laws with constant `M` in `(0, 1)` and log-Pareto `Q` use
/// [`log_pareto_log_zinf`], since a plain truncation misses the rare late
/// terms that carry the tail.
pub fn simulate_log_zinf(law: &MqLaw, policy: ZinfPolicy, rng: &mut Stream) -> Result<f64> {
    policy.validate()?;
    if let MqKind::LogParetoQ { m, beta } = law.kind {
        if m > 0.0 && m < 1.0 {
            return log_pareto_log_zinf(m, beta, policy.eps, rng);
        }
    }
    let log_eps = policy.eps.ln();
    let mut scale = f64::NEG_INFINITY;
    let mut acc = 0.0f64;
    let mut log_pi = 0.0f64;
    let mut calm = 0u32;
    let mut last = 0.0;
    for _ in 1..=policy.nmax {
        let d = law.sample(rng)?;
        if d.m_negative() || d.q_negative() || d.q == 0.0 {
            return Err(Error::InvalidParameter("log-space Z_inf needs M > 0 and Q > 0".into()));
        }
        let t = log_pi + d.log_abs_q;
        if t > scale {
            acc = acc * (scale - t).exp() + 1.0;
            scale = t;
        } else {
            acc += (t - scale).exp();
        }
        log_pi += d.log_abs_m;
        last = t - scale;
        calm = if last <= log_eps { calm + 1 } else { 0 };
        if log_pi <= log_eps && calm >= policy.quiet {
            return Ok(scale + acc.ln());
        }
    }
    Err(Error::NonConvergent {
        steps: policy.nmax,
        last_increment: last.exp(),
    })
}

/// Running log-sum-exp.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    scale: f64,
    acc: f64,
}

impl LogSum {
    fn new() -> Self {
        Self {
            scale: f64::NEG_INFINITY,
            acc: 0.0,
        }
    }

    fn add(&mut self, t: f64) {
        if t > self.scale {
            self.acc = self.acc * (self.scale - t).exp() + 1.0;
            self.scale = t;
        } else {
            self.acc += (t - self.scale).exp();
        }
    }

    fn value(&self) -> f64 {
        self.scale + self.acc.ln()
    }
}

/// Probability bound on missing any late exceedance in
/// [`log_pareto_log_zinf`].
pub const LATE_TERM_TOL: f64 = 1e-9;

/// `log Z_inf` for `M = m` in `(0, 1)` and `P{log Q > t} = t^-beta`.
///
/// With `r = -log m` the `k`-th term is `exp(T_k - (k-1) r)`. The first
/// `n0 = ceil(-log eps / r)` terms are drawn directly. After that only terms
/// with `T_k` above `(k-1) r + log eps - (r/2)(k - n0)` are drawn: their
/// indices come from geometric skips over doubling blocks, thinned to the
/// exact exceedance probability, and `T_k` is drawn conditionally. The
/// terms left out sum to at most `eps / (1 - e^{-r/2})`. Sampling stops once
/// the chance of any further exceedance is below [`LATE_TERM_TOL`].
pub fn log_pareto_log_zinf(m: f64, beta: f64, eps: f64, rng: &mut Stream) -> Result<f64> {
    if !(beta > 1.0) {
        // E log+ Q = infinity, so Z_inf = infinity almost surely.
        return Err(Error::NonConvergent {
            steps: 0,
            last_increment: f64::INFINITY,
        });
    }
    let r = -m.ln();
    let h = eps.ln();
    let drift = 0.5 * r;
    let n0 = (-h / r).ceil().max(1.0);
    let mut sum = LogSum::new();
    let mut k = 1.0f64;
    while k <= n0 {
        sum.add(rng.open01().powf(-1.0 / beta) - (k - 1.0) * r);
        k += 1.0;
    }
    // Threshold a + b k for k > n0.
    let b = r - drift;
    let a = -r + h + drift * n0;
    let threshold = |k: f64| a + b * k;
    let prob = |k: f64| {
        let t = threshold(k);
        if t <= 1.0 {
            1.0
        } else {
            t.powf(-beta)
        }
    };
    let draw_term = |k: f64, rng: &mut Stream| {
        let t = threshold(k).max(1.0) * rng.open01().powf(-1.0 / beta);
        t - (k - 1.0) * r
    };
    // Terms whose threshold is below the support start are always drawn.
    while prob(k) >= 1.0 {
        sum.add(draw_term(k, rng));
        k += 1.0;
    }
    loop {
        let remaining = prob(k) + threshold(k).powf(1.0 - beta) / (b * (beta - 1.0));
        if remaining < LATE_TERM_TOL {
            return Ok(sum.value());
        }
        let end = 2.0 * k;
        let p_top = prob(k);
        let log_miss = (-p_top).ln_1p();
        let mut j = k;
        loop {
            j += (rng.open01().ln() / log_miss).floor();
            if j >= end {
                break;
            }
            if rng.open01() * p_top < prob(j) {
                sum.add(draw_term(j, rng));
            }
            j += 1.0;
        }
        k = end;
    }
}

/// Monte Carlo mean of `Z_inf`. Replicates that fail to converge make the
/// whole estimate fail.
pub fn zinf_mean(law: &MqLaw, policy: ZinfPolicy, reps: usize, seed: u64, confidence: f64) -> Result<EstimateReport> {
    let sampler = ZinfSampler::new(law, policy)?;
    let failure = std::sync::Mutex::new(None);
    let r = mc_mean(
        |_, s| match sampler.sample(s) {
            Ok(o) => o.value,
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                f64::NAN
            }
        },
        reps,
        seed,
        &law.id,
        "zinf-mean",
        confidence,
    );
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(r),
    }
}
