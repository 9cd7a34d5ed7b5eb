use super::bfun::BFunctionSpec;
use super::surrogate::{ConcaveSurrogate, SurrogateKind};
use crate::error::{Error, Result};
use crate::law::AEvaluator;

/// `phi(x) = g(x) / A(log(x+1))`, subadditive and slowly varying.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiFunction {
    pub g: ConcaveSurrogate,
    pub a: AEvaluator,
}

impl PhiFunction {
    pub fn new(g: ConcaveSurrogate, a: AEvaluator) -> Result<Self> {
        if g.kind != SurrogateKind::G {
            return Err(Error::InvalidParameter("phi is built from a g-kind surrogate".into()));
        }
        Ok(Self { g, a })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        let a = self.a.a(x.ln_1p());
        if a > 0.0 {
            Ok(self.g.value(x) / a)
        } else {
            Err(Error::DivisionDegeneracy { x })
        }
    }
}

/// A function whose regular variation is certified on a grid.
#[derive(Debug, Clone)]
pub enum RvHandle {
    B(BFunctionSpec),
    Surrogate(ConcaveSurrogate),
    Phi(PhiFunction),
}

impl RvHandle {
    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            RvHandle::B(b) => Ok(b.eval(x)),
            RvHandle::Surrogate(s) => Ok(s.value(x)),
            RvHandle::Phi(p) => p.eval(x),
        }
    }

    /// Index of regular variation: `alpha` for `b`, 0 for the slowly varying handles.
    pub fn index(&self) -> f64 {
        match self {
            RvHandle::B(b) => b.alpha,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RvReport {
    pub y: f64,
    pub target: f64,
    /// `(x, h(xy)/h(x))` along the grid.
    pub ratios: Vec<(f64, f64)>,
    /// Largest deviation from the target over the top decade of the grid.
    pub top_decade_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks `h(xy)/h(x) -> y^index` along `xs`. Passes when every point in
/// the top decade is within `tolerance` of the target.
pub fn check_regular_variation(h: &RvHandle, y: f64, xs: &[f64], tolerance: f64) -> Result<RvReport> {
    if !(y > 1.0) {
        return Err(Error::InvalidParameter("y must exceed 1".into()));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) || xs.is_empty() {
        return Err(Error::InvalidParameter("grid must be increasing".into()));
    }
    let target = y.powf(h.index());
    let top = *xs.last().unwrap() / 10.0;
    let mut ratios = Vec::with_capacity(xs.len());
    let mut dev: f64 = 0.0;
    for &x in xs {
        let hx = h.eval(x)?;
        if hx <= 0.0 {
            continue;
        }
        let r = h.eval(x * y)? / hx;
        ratios.push((x, r));
        if x >= top {
            dev = dev.max((r - target).abs());
        }
    }
    Ok(RvReport {
        y,
        target,
        ratios,
        top_decade_deviation: dev,
        tolerance,
        pass: dev <= tolerance,
    })
}

/// Empirical constant in `f(xy) <= C (f(x) + f(y))` over all grid pairs.
pub fn submultiplicative_constant(f: &ConcaveSurrogate, grid: &[f64]) -> f64 {
    let vals: Vec<f64> = grid.iter().map(|&x| f.value(x)).collect();
    let mut c: f64 = 0.0;
    for (i, &x) in grid.iter().enumerate() {
        for (j, &y) in grid.iter().enumerate().skip(i) {
            let denom = vals[i] + vals[j];
            if denom > 0.0 {
                c = c.max(f.value(x * y) / denom);
            }
        }
    }
    c
}
