use serde::Serialize;

use crate::error::Result;
use crate::law::{MqDraw, MqLaw};
use crate::rng::Stream;

/// Increments below this log-magnitude are stored as exact zeros.
pub const LOG_UNDERFLOW: f64 = -745.0;

/// One realized trajectory `(M_k, Q_k, Pi_k, Z_k)`.
///
/// `logpi[k] = S_k = -log|Pi_k|` is the primary representation; `pi_abs`
/// is the linear product kept alongside so that exactly representable
/// products (powers of two, say) compare exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PerpetuityPath {
    pub steps: Vec<MqDraw>,
    pub logpi: Vec<f64>,
    pub pi_abs: Vec<f64>,
    pub signs: Vec<i8>,
    pub z_partial: Vec<f64>,
    /// Indices `k` whose increment was below the representable range.
    pub underflow: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathRecord {
    pub k: usize,
    pub m: f64,
    pub q: f64,
    pub logpi: f64,
    pub sign: i8,
    pub z: f64,
}

impl Default for PerpetuityPath {
    fn default() -> Self {
        Self::new()
    }
}

impl PerpetuityPath {
    pub fn new() -> Self {
        Self {
            steps: Vec::new(),
            logpi: vec![0.0],
            pi_abs: vec![1.0],
            signs: vec![1],
            z_partial: vec![0.0],
            underflow: Vec::new(),
        }
    }

    pub fn from_draws(draws: impl IntoIterator<Item = MqDraw>) -> Self {
        let mut p = Self::new();
        for d in draws {
            p.push(d);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, d: MqDraw) {
        let k = self.steps.len();
        let (s_prev, pi_prev, sign_prev) = (self.logpi[k], self.pi_abs[k], self.signs[k]);
        let log_inc = -s_prev + d.log_abs_q;
        let inc = if log_inc < LOG_UNDERFLOW {
            self.underflow.push(k + 1);
            0.0
        } else {
            let mag = if pi_prev > 0.0 && pi_prev.is_finite() {
                pi_prev * d.q.abs()
            } else {
                log_inc.exp()
            };
            let neg = (sign_prev < 0) != d.q_negative();
            if neg {
                -mag
            } else {
                mag
            }
        };
        let z = self.z_partial[k] + inc;
        let s = s_prev - d.log_abs_m;
        let pi = if d.m != 0.0 && pi_prev > 0.0 {
            pi_prev * d.m.abs()
        } else {
            (-s).exp()
        };
        let sign = if d.m_negative() { -sign_prev } else { sign_prev };
        self.steps.push(d);
        self.logpi.push(s);
        self.pi_abs.push(pi);
        self.signs.push(sign);
        self.z_partial.push(z);
    }

    /// `|Pi_k| <= x`, compared linearly when the product is representable.
    pub fn abs_pi_le(&self, k: usize, x: f64) -> bool {
        let p = self.pi_abs[k];
        if p > 0.0 && p.is_finite() {
            p <= x
        } else {
            -self.logpi[k] <= x.ln()
        }
    }

    pub fn abs_pi_lt(&self, k: usize, x: f64) -> bool {
        let p = self.pi_abs[k];
        if p > 0.0 && p.is_finite() {
            p < x
        } else {
            -self.logpi[k] < x.ln()
        }
    }

    pub fn pi(&self, k: usize) -> f64 {
        f64::from(self.signs[k]) * self.pi_abs[k]
    }

    pub fn z(&self) -> f64 {
        *self.z_partial.last().unwrap()
    }

    pub fn records(&self) -> Vec<PathRecord> {
        (0..=self.len())
            .map(|k| PathRecord {
                k,
                m: if k == 0 { f64::NAN } else { self.steps[k - 1].m },
                q: if k == 0 { f64::NAN } else { self.steps[k - 1].q },
                logpi: self.logpi[k],
                sign: self.signs[k],
                z: self.z_partial[k],
            })
            .collect()
    }
}

pub fn simulate_path(law: &MqLaw, n: usize, rng: &mut Stream) -> Result<PerpetuityPath> {
    let mut p = PerpetuityPath::new();
    for _ in 0..n {
        p.push(law.sample(rng)?);
    }
    Ok(p)
}

/// `Phi_k = Q_k + M_k Phi_{k-1}` from `phi0`, using the draw order of
/// [`simulate_path`]. Returns `Phi_0..Phi_n`.
pub fn forward_ifs(law: &MqLaw, phi0: f64, n: usize, rng: &mut Stream) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(phi0);
    let mut phi = phi0;
    for _ in 0..n {
        let d = law.sample(rng)?;
        phi = d.q + d.m * phi;
        out.push(phi);
    }
    Ok(out)
}
