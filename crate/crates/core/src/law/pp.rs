use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::rng::Stream;

use super::mq::MqDraw;

#[derive(Debug, Clone, PartialEq)]
pub enum PpKind {
    /// Finitely many configurations of displacements with probabilities.
    Finite { configs: Vec<(Vec<f64>, f64)> },
    /// `Poisson(lambda)` children, all displaced by `x`.
    Poisson { lambda: f64, x: f64 },
    /// No displacement; one child with probability `1 - p`, otherwise a
    /// heavy count `N_h` with `P{N_h = k}` proportional to `P{K = k} / k`
    /// where `K = ceil(e^T)` and `T ~ Pareto(beta)` on `[1, inf)`.
    /// Under the tilted law the heavy count is distributed as `K`.
    HeavyGw { beta: f64, p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TiltMode {
    Exact,
    /// Accept an untilted draw with probability `total weight / bound`.
    Rejection { bound: Option<f64> },
    /// Untilted draw returned with its likelihood ratio.
    Importance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpLaw {
    pub id: String,
    pub gamma: f64,
    pub kind: PpKind,
    m_gamma: f64,
    /// `E[1/K]` for the heavy family.
    inv_k_mean: f64,
    /// Cumulative tilted probabilities for finite laws.
    tilted_cdf: Vec<f64>,
}

/// `E[1/ceil(e^T)]` for `T ~ Pareto(beta)` on `[1, inf)`.
fn inv_k_mean(beta: f64) -> f64 {
    let sf = |t: f64| if t <= 1.0 { 1.0 } else { t.powf(-beta) };
    let k_max: u64 = 2_000_000;
    let mut sum = 0.0;
    for k in 3..=k_max {
        let lo = ((k - 1) as f64).ln().max(1.0);
        let hi = (k as f64).ln();
        sum += (sf(lo) - sf(hi)) / k as f64;
    }
    // Beyond k_max, 1/ceil(e^t) is e^-t to relative precision 1/k_max.
    let t0 = (k_max as f64).ln();
    let steps = 20_000;
    let h = 60.0 / steps as f64;
    let dens = |t: f64| beta * t.powf(-beta - 1.0) * (-t).exp();
    let mut tail = dens(t0) + dens(t0 + 60.0);
    for i in 1..steps {
        let t = t0 + i as f64 * h;
        tail += if i % 2 == 1 { 4.0 } else { 2.0 } * dens(t);
    }
    sum + tail * h / 3.0
}

fn heavy_log_k(t: f64) -> f64 {
    if t < 36.0 {
        t.exp().ceil().ln()
    } else {
        t
    }
}

impl PpLaw {
    pub fn new(id: impl Into<String>, gamma: f64, kind: PpKind) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter("gamma must be positive".into()));
        }
        let mut inv_k = 0.0;
        let m_gamma = match &kind {
            PpKind::Finite { configs } => {
                if configs.is_empty() {
                    return Err(Error::InvalidParameter("no configurations".into()));
                }
                let total: f64 = configs.iter().map(|c| c.1).sum();
                if (total - 1.0).abs() > 1e-12 || configs.iter().any(|c| !(c.1 >= 0.0)) {
                    return Err(Error::InvalidParameter(format!(
                        "configuration probabilities sum to {total}, not 1"
                    )));
                }
                if configs.iter().flat_map(|c| &c.0).any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter("displacements must be finite".into()));
                }
                configs
                    .iter()
                    .map(|(xs, p)| p * xs.iter().map(|x| (gamma * x).exp()).sum::<f64>())
                    .sum()
            }
            PpKind::Poisson { lambda, x } => {
                if !(*lambda > 0.0) || !x.is_finite() {
                    return Err(Error::InvalidParameter("Poisson law needs lambda > 0".into()));
                }
                lambda * (gamma * x).exp()
            }
            PpKind::HeavyGw { beta, p } => {
                if !(*beta > 0.0) || !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidParameter("heavy law needs beta > 0, p in [0,1]".into()));
                }
                inv_k = inv_k_mean(*beta);
                (1.0 - p) + p / inv_k
            }
        };
        if !(m_gamma > 0.0) || !m_gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("m(gamma) = {m_gamma} is not positive and finite")));
        }
        let tilted_cdf = match &kind {
            PpKind::Finite { configs } => {
                let mut acc = 0.0;
                configs
                    .iter()
                    .map(|(xs, p)| {
                        acc += p * xs.iter().map(|x| (gamma * x).exp()).sum::<f64>() / m_gamma;
                        acc
                    })
                    .collect()
            }
            _ => Vec::new(),
        };
        Ok(Self {
            id: id.into(),
            gamma,
            kind,
            m_gamma,
            inv_k_mean: inv_k,
            tilted_cdf,
        })
    }

    /// `N` in `{nmin, nmax}` with `P{N = nmin} = p`, all displacements `x`.
    pub fn gw(nmin: usize, nmax: usize, p: f64, x: f64, gamma: f64) -> Result<Self> {
        let configs = vec![(vec![x; nmin], p), (vec![x; nmax], 1.0 - p)];
        Self::new(
            format!("gw:nmin={nmin},nmax={nmax},p={p},x={x},gamma={gamma}"),
            gamma,
            PpKind::Finite { configs },
        )
    }

    /// Two children, both displaced by `x`.
    pub fn binary(x: f64, gamma: f64) -> Result<Self> {
        Self::new(
            format!("binary:x={x},gamma={gamma}"),
            gamma,
            PpKind::Finite {
                configs: vec![(vec![x, x], 1.0)],
            },
        )
    }

    /// Deterministic binary splitting with `X = -log 2`, `gamma = 1`, so `m = 1`
    /// and every generation-`n` weight is exactly `2^-n`.
    pub fn deterministic_binary() -> Self {
        Self::binary(-std::f64::consts::LN_2, 1.0).expect("valid binary law")
    }

    pub fn with_id(mut self, id: String) -> Self {
        self.id = id;
        self
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.id.clone(), gamma, self.kind.clone())
    }

    pub fn m_gamma(&self) -> f64 {
        self.m_gamma
    }

    pub fn mean_offspring(&self) -> f64 {
        match &self.kind {
            PpKind::Finite { configs } => configs.iter().map(|(xs, p)| p * xs.len() as f64).sum(),
            PpKind::Poisson { lambda, .. } => *lambda,
            PpKind::HeavyGw { .. } => self.m_gamma,
        }
    }

    pub fn is_enumerable(&self) -> bool {
        matches!(self.kind, PpKind::Finite { .. })
    }

    pub fn enumerate(&self) -> Result<&[(Vec<f64>, f64)]> {
        match &self.kind {
            PpKind::Finite { configs } => Ok(configs),
            _ => Err(Error::NotEnumerable(self.id.clone())),
        }
    }

    /// Configurations up to a tail mass of `tail`; exact for finite laws.
    pub fn truncated_enumeration(&self, tail: f64) -> Result<Vec<(Vec<f64>, f64)>> {
        match &self.kind {
            PpKind::Finite { configs } => Ok(configs.clone()),
            PpKind::Poisson { lambda, x } => {
                let mut out = Vec::new();
                let mut pk = (-lambda).exp();
                let mut k = 0usize;
                // Past the mode the remaining mass is below pk * (k+1)/(k+1-lambda).
                loop {
                    let kf = k as f64;
                    if kf > *lambda && pk * (kf + 1.0) / (kf + 1.0 - lambda) < tail {
                        break;
                    }
                    out.push((vec![*x; k], pk));
                    k += 1;
                    pk *= lambda / k as f64;
                }
                Ok(out)
            }
            PpKind::HeavyGw { .. } => Err(Error::NotEnumerable(self.id.clone())),
        }
    }

    /// Sum of `e^{gamma x}` over a configuration.
    pub fn total_weight(&self, xs: &[f64]) -> f64 {
        xs.iter().map(|x| (self.gamma * x).exp()).sum()
    }

    fn heavy_count(&self, rng: &mut Stream, beta: f64) -> f64 {
        loop {
            let t = rng.open01().powf(-1.0 / beta);
            let k = t.exp().ceil();
            if rng.open01() * k < 1.0 {
                return k;
            }
        }
    }

    /// Draws a configuration into `out`. Returns `false` without filling
    /// when the configuration would have more than `cap` points.
    pub fn sample_into(&self, rng: &mut Stream, out: &mut Vec<f64>, cap: usize) -> bool {
        out.clear();
        match &self.kind {
            PpKind::Finite { configs } => {
                let u = rng.open01();
                let mut acc = 0.0;
                let mut pick = &configs[configs.len() - 1].0;
                for (xs, p) in configs {
                    acc += p;
                    if u < acc {
                        pick = xs;
                        break;
                    }
                }
                if pick.len() > cap {
                    return false;
                }
                out.extend_from_slice(pick);
            }
            PpKind::Poisson { lambda, x } => {
                let n: f64 = Poisson::new(*lambda).expect("lambda > 0").sample(rng);
                if n > cap as f64 {
                    return false;
                }
                out.resize(n as usize, *x);
            }
            PpKind::HeavyGw { beta, p } => {
                let n = if rng.open01() < *p { self.heavy_count(rng, *beta) } else { 1.0 };
                if n > cap as f64 {
                    return false;
                }
                out.resize(n as usize, 0.0);
            }
        }
        true
    }

    pub fn sample(&self, rng: &mut Stream) -> Vec<f64> {
        let mut v = Vec::new();
        assert!(self.sample_into(rng, &mut v, usize::MAX), "configuration too large");
        v
    }

    /// Exact tilted configuration probabilities, renormalized.
    pub fn tilted_enumeration(&self) -> Result<Vec<(Vec<f64>, f64)>> {
        let configs = self.truncated_enumeration(1e-14)?;
        let raw: Vec<f64> = configs.iter().map(|(xs, p)| p * self.total_weight(xs) / self.m_gamma).collect();
        let total: f64 = raw.iter().sum();
        Ok(configs.into_iter().zip(raw).map(|((xs, _), w)| (xs, w / total)).collect())
    }

    /// A configuration from the tilted law together with its likelihood
    /// weight (1 except in importance mode).
    pub fn tilted_config(&self, rng: &mut Stream, mode: TiltMode, cap: usize) -> Result<(Vec<f64>, f64)> {
        let mut out = Vec::new();
        match mode {
            TiltMode::Exact => {
                match &self.kind {
                    PpKind::Finite { configs } => {
                        let u = rng.open01();
                        let i = self.tilted_cdf.partition_point(|&c| c <= u).min(configs.len() - 1);
                        out.extend_from_slice(&configs[i].0);
                    }
                    PpKind::Poisson { lambda, x } => {
                        let n: f64 = Poisson::new(*lambda).expect("lambda > 0").sample(rng);
                        out.resize(1 + n as usize, *x);
                    }
                    PpKind::HeavyGw { .. } => {
                        return Err(Error::UnsupportedTilting(self.id.clone()));
                    }
                }
                Ok((out, 1.0))
            }
            TiltMode::Rejection { bound } => {
                let bound = bound.ok_or(Error::UnboundedDensity)?;
                loop {
                    if !self.sample_into(rng, &mut out, cap) {
                        return Err(Error::UnsupportedTilting(self.id.clone()));
                    }
                    let w = self.total_weight(&out);
                    if w > bound {
                        return Err(Error::UnboundedDensity);
                    }
                    if rng.open01() * bound < w {
                        return Ok((out, 1.0));
                    }
                }
            }
            TiltMode::Importance => {
                if !self.sample_into(rng, &mut out, cap) {
                    return Err(Error::UnsupportedTilting(self.id.clone()));
                }
                let w = self.total_weight(&out) / self.m_gamma;
                Ok((out, w))
            }
        }
    }

    /// One spine pair `(M, Q)` under exact tilting.
    pub fn spine_mq(&self, rng: &mut Stream) -> MqDraw {
        let log_m = self.m_gamma.ln();
        match &self.kind {
            PpKind::HeavyGw { beta, p } => {
                let heavy = rng.open01() * self.m_gamma < p / self.inv_k_mean;
                let log_n = if heavy {
                    heavy_log_k(rng.open01().powf(-1.0 / beta))
                } else {
                    0.0
                };
                MqDraw {
                    m: 1.0 / self.m_gamma,
                    q: (log_n - log_m).exp(),
                    log_abs_m: -log_m,
                    log_abs_q: log_n - log_m,
                }
            }
            _ => {
                let (xs, _) = self
                    .tilted_config(rng, TiltMode::Exact, usize::MAX)
                    .expect("exact tilting is available");
                let total = self.total_weight(&xs);
                let child = choose_child(self.gamma, &xs, total, rng);
                let m = (self.gamma * xs[child]).exp() / self.m_gamma;
                MqDraw::linear(m, total / self.m_gamma)
            }
        }
    }

    /// `M` when it is almost surely constant (equal displacements).
    pub fn spine_constant_m(&self) -> Option<f64> {
        match &self.kind {
            PpKind::Poisson { lambda, .. } => Some(1.0 / lambda),
            PpKind::HeavyGw { .. } => Some(1.0 / self.m_gamma),
            PpKind::Finite { configs } => {
                let mut xs = configs.iter().filter(|c| c.1 > 0.0).flat_map(|c| c.0.iter());
                let x0 = *xs.next()?;
                xs.all(|&x| x == x0).then(|| (self.gamma * x0).exp() / self.m_gamma)
            }
        }
    }

    /// `E Q = E W_1^2` when finite.
    pub fn spine_mean_q(&self) -> Option<f64> {
        match &self.kind {
            PpKind::Poisson { lambda, .. } => Some(1.0 + 1.0 / lambda),
            PpKind::HeavyGw { .. } => None,
            PpKind::Finite { configs } => Some(
                configs
                    .iter()
                    .map(|(xs, p)| p * (self.total_weight(xs) / self.m_gamma).powi(2))
                    .sum(),
            ),
        }
    }
}

/// Index of a child picked with probability proportional to `e^{gamma x}`.
pub fn choose_child(gamma: f64, xs: &[f64], total: f64, rng: &mut Stream) -> usize {
    let u = rng.open01() * total;
    let mut acc = 0.0;
    for (i, x) in xs.iter().enumerate() {
        acc += (gamma * x).exp();
        if u < acc {
            return i;
        }
    }
    xs.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_gamma_closed_forms() {
        assert_eq!(PpLaw::gw(1, 2, 0.5, 0.0, 1.0).unwrap().m_gamma(), 1.5);
        assert_eq!(PpLaw::deterministic_binary().m_gamma(), 1.0);
        let p = PpLaw::new("p", 0.7, PpKind::Poisson { lambda: 2.0, x: 0.0 }).unwrap();
        assert_eq!(p.m_gamma(), 2.0);
    }

    #[test]
    fn binary_weights_are_exact_halves() {
        let b = PpLaw::deterministic_binary();
        assert_eq!((b.gamma * b.enumerate().unwrap()[0].0[0]).exp(), 0.5);
    }

    #[test]
    fn tilted_gw_counts() {
        let t = PpLaw::gw(1, 2, 0.5, 0.0, 1.0).unwrap().tilted_enumeration().unwrap();
        assert!((t[0].1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((t[1].1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn tilted_poisson_is_shifted_poisson() {
        let lambda = 2.0;
        let p = PpLaw::new("p", 1.0, PpKind::Poisson { lambda, x: 0.0 }).unwrap();
        let t = p.tilted_enumeration().unwrap();
        let mass: f64 = t.iter().map(|c| c.1).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        let mut pk = (-lambda).exp();
        for (k, (xs, w)) in t.iter().enumerate().skip(1).take(20) {
            assert_eq!(xs.len(), k);
            assert!((w - pk).abs() < 1e-12, "k = {k}: {w} vs {pk}");
            pk *= lambda / k as f64;
        }
    }

    #[test]
    fn rejection_without_bound_fails() {
        let p = PpLaw::gw(1, 2, 0.5, 0.0, 1.0).unwrap();
        let mut s = Stream::new(1);
        assert_eq!(
            p.tilted_config(&mut s, TiltMode::Rejection { bound: None }, 10),
            Err(Error::UnboundedDensity)
        );
        let (xs, w) = p.tilted_config(&mut s, TiltMode::Rejection { bound: Some(2.0) }, 10).unwrap();
        assert!(xs.len() == 1 || xs.len() == 2);
        assert_eq!(w, 1.0);
    }

    #[test]
    fn heavy_inverse_mean_is_sane() {
        // Monte Carlo estimate of E[1/K].
        let beta = 4.0;
        let mut s = Stream::new(9);
        let n = 400_000;
        let mc = (0..n)
            .map(|_| (-heavy_log_k(s.open01().powf(-1.0 / beta))).exp())
            .sum::<f64>()
            / n as f64;
        let exact = inv_k_mean(beta);
        assert!((mc - exact).abs() < 0.002, "{mc} vs {exact}");
    }

    #[test]
    fn heavy_sampler_mean_matches_m() {
        let p = PpLaw::new("h", 1.0, PpKind::HeavyGw { beta: 6.0, p: 0.3 }).unwrap();
        let mut s = Stream::new(2);
        let mut buf = Vec::new();
        let n = 200_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            assert!(p.sample_into(&mut s, &mut buf, usize::MAX));
            sum += buf.len() as f64;
            sq += (buf.len() as f64).powi(2);
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - p.m_gamma()).abs() < 4.0 * se, "{mean} vs {}", p.m_gamma());
    }
}
