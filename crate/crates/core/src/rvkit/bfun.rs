use std::fmt;

use crate::error::{Error, Result};
use crate::law::parse::{split_spec, Fields};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `x^alpha`.
    Power,
    /// `x^alpha log_k x`, with `log_k` the k-fold iterated logarithm.
    PowerLogIter { k: u32 },
    /// `x^alpha exp(beta (log x)^gamma)`.
    PowerExpLogPow { beta: f64, gamma: f64 },
}

/// A regularly varying function `b(x) = x^alpha l(x)` from one of three
/// closed-form families. Below `x_min` it is extended by the constant
/// `b(x_min)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BFunctionSpec {
    pub family: Family,
    pub alpha: f64,
}

/// `1, e, e^e, ...`: the point where `log_{k+1}` vanishes.
fn tower(k: u32) -> f64 {
    (0..k).fold(1.0, |acc, _| acc.exp())
}

impl BFunctionSpec {
    pub fn new(family: Family, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        match family {
            Family::PowerLogIter { k: 0 } => {
                return Err(Error::InvalidParameter("iteration depth k must be at least 1".into()))
            }
            Family::PowerExpLogPow { beta, gamma } if !(beta >= 0.0) || !(gamma > 0.0 && gamma < 1.0) => {
                return Err(Error::InvalidParameter("need beta >= 0 and 0 < gamma < 1".into()))
            }
            _ => {}
        }
        Ok(Self { family, alpha })
    }

    pub fn power(alpha: f64) -> Result<Self> {
        Self::new(Family::Power, alpha)
    }

    pub fn x_min(&self) -> f64 {
        match self.family {
            Family::Power => 0.0,
            Family::PowerLogIter { k } => tower(k - 1),
            Family::PowerExpLogPow { .. } => 1.0,
        }
    }

    fn iter_logs(x: f64, k: u32) -> f64 {
        (0..k).fold(x, |acc, _| acc.ln())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.max(self.x_min());
        match self.family {
            Family::Power => x.powf(self.alpha),
            Family::PowerLogIter { k } => x.powf(self.alpha) * Self::iter_logs(x, k).max(0.0),
            Family::PowerExpLogPow { beta, gamma } => {
                x.powf(self.alpha) * (beta * x.ln().powf(gamma)).exp()
            }
        }
    }

    /// Derivative; zero on the plateau below `x_min`.
    pub fn derivative(&self, x: f64) -> f64 {
        if x < self.x_min() {
            return 0.0;
        }
        let a = self.alpha;
        match self.family {
            Family::Power => a * x.powf(a - 1.0),
            Family::PowerLogIter { k } => {
                let mut inner = x;
                let mut dlog = 1.0;
                for _ in 0..k {
                    dlog /= inner;
                    inner = inner.ln();
                }
                a * x.powf(a - 1.0) * inner + x.powf(a) * dlog
            }
            Family::PowerExpLogPow { beta, gamma } => {
                let l = x.ln();
                let extra = if l > 0.0 { beta * gamma * l.powf(gamma - 1.0) } else { 0.0 };
                self.eval(x) * (a + extra) / x
            }
        }
    }

    /// Parses `power:alpha=1.5`, `powerlog:alpha=1,k=2` or
    /// `powerexp:alpha=1,beta=0.5,gamma=0.5` (optionally prefixed by `b=`).
    pub fn parse(input: &str) -> Result<Self> {
        let (family, map) = split_spec(input, "b=")?;
        let mut f = Fields::new(input, map);
        let alpha = f.num("alpha", None)?;
        let family = match family {
            "power" => Family::Power,
            "powerlog" => Family::PowerLogIter {
                k: f.uint("k", Some(1))? as u32,
            },
            "powerexp" => Family::PowerExpLogPow {
                beta: f.num("beta", None)?,
                gamma: f.num("gamma", None)?,
            },
            other => {
                return Err(Error::Parse {
                    input: input.to_string(),
                    reason: format!("unknown b family `{other}`"),
                })
            }
        };
        f.finish()?;
        Self::new(family, alpha)
    }
}

impl fmt::Display for BFunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Power => write!(f, "power:alpha={}", self.alpha),
            Family::PowerLogIter { k } => write!(f, "powerlog:alpha={},k={k}", self.alpha),
            Family::PowerExpLogPow { beta, gamma } => {
                write!(f, "powerexp:alpha={},beta={beta},gamma={gamma}", self.alpha)
            }
        }
    }
}
