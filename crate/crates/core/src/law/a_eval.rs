use super::mq::MqLaw;
use crate::error::{Error, Result};
use crate::parallel::replicate;
use crate::rng::Stream;

pub const EMPIRICAL_KNOTS: usize = 512;
pub const EMPIRICAL_SAMPLES: usize = 1_000_000;

/// `A(x) = E min(log-|M|, x)`, either exact or from samples of `-log|M|`.
#[derive(Debug, Clone, PartialEq)]
pub enum AEvaluator {
    Closed(MqLaw),
    Empirical(EmpiricalA),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalA {
    knots: Vec<f64>,
    values: Vec<f64>,
    samples: usize,
    p_lt1: f64,
}

impl EmpiricalA {
    /// Builds the table from draws of `-log|M|`. `A` is exact at the knots
    /// (quantiles of the positive part) and linear in between.
    pub fn from_neglog(neglog: &[f64]) -> Self {
        let n = neglog.len();
        assert!(n > 0, "empirical A needs samples");
        let mut ys: Vec<f64> = neglog.iter().map(|y| y.max(0.0)).collect();
        ys.sort_by(f64::total_cmp);
        let p_lt1 = ys.iter().filter(|&&y| y > 0.0).count() as f64 / n as f64;
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &y in &ys {
            acc += y;
            prefix.push(acc);
        }
        let exact = |x: f64| {
            let below = ys.partition_point(|&y| y < x);
            (prefix[below] + x * (n - below) as f64) / n as f64
        };
        let mut knots = vec![0.0];
        for i in 1..EMPIRICAL_KNOTS {
            let idx = ((i as f64 / (EMPIRICAL_KNOTS - 1) as f64) * (n - 1) as f64).round() as usize;
            let k = ys[idx];
            if k > *knots.last().unwrap() {
                knots.push(k);
            }
        }
        let values = knots.iter().map(|&k| exact(k)).collect();
        Self {
            knots,
            values,
            samples: n,
            p_lt1,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let i = self.knots.partition_point(|&k| k <= x);
        if i >= self.knots.len() {
            return *self.values.last().unwrap();
        }
        let (k0, k1) = (self.knots[i - 1], self.knots[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (x - k0) / (k1 - k0)
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }
}

impl AEvaluator {
    pub fn closed(law: &MqLaw) -> Result<Self> {
        if law.analytics().is_none() || law.a_closed(1.0).is_none() {
            return Err(Error::InvalidParameter(format!("law `{}` has no closed-form A", law.id)));
        }
        Ok(Self::Closed(law.clone()))
    }

    pub fn empirical(law: &MqLaw, samples: usize, seed: u64) -> Result<Self> {
        let base = Stream::for_tag(seed, "a-evaluator");
        let draws = replicate(samples, &base, |_, s| law.sample(s).map(|d| -d.log_abs_m));
        let ys = draws.into_iter().collect::<Result<Vec<f64>>>()?;
        Ok(Self::Empirical(EmpiricalA::from_neglog(&ys)))
    }

    /// Closed form when available, else the empirical table.
    pub fn for_law(law: &MqLaw, seed: u64) -> Result<Self> {
        Self::closed(law).or_else(|_| Self::empirical(law, EMPIRICAL_SAMPLES, seed))
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, Self::Closed(_))
    }

    pub fn a(&self, x: f64) -> f64 {
        match self {
            Self::Closed(law) => law.a_closed(x).expect("closed form checked at construction"),
            Self::Empirical(e) => e.eval(x),
        }
    }

    pub fn p_lt1(&self) -> f64 {
        match self {
            Self::Closed(law) => law.analytics().expect("analytics checked").p_lt1,
            Self::Empirical(e) => e.p_lt1,
        }
    }

    /// `J(x) = x / A(x)`, with `J(x) = 0` for `x < 0` and `J(0) = 1/P{|M| < 1}`.
    pub fn j(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        if x == 0.0 {
            let p = self.p_lt1();
            return if p > 0.0 { Ok(1.0 / p) } else { Err(Error::UndefinedJ0) };
        }
        let a = self.a(x);
        if a > 0.0 {
            Ok(x / a)
        } else {
            Err(Error::DivisionDegeneracy { x })
        }
    }
}
