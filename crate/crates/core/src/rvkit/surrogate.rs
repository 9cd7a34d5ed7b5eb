use std::f64::consts::E;

use super::bfun::BFunctionSpec;
use crate::error::{Error, Result};
use crate::stats::geometric_grid;

pub const GRID_TOL_ABS: f64 = 1e-9;
pub const GRID_TOL_REL: f64 = 1e-9;
pub const C_CAP: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateKind {
    /// `Lambda_c(x) = b(log(c+x)) - b(log c)`.
    F,
    /// `Lambda_c(x) log(c+x)`.
    G,
}

/// Concave surrogate of `b(log x)` (kind `F`) or `b(log x) log x` (kind `G`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcaveSurrogate {
    pub kind: SurrogateKind,
    pub bspec: BFunctionSpec,
    pub c: f64,
}

/// The validation grid: `0` plus a geometric grid from 1e-3 to 1e6 with 64
/// points per decade.
pub fn default_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(geometric_grid(1e-3, 1e6, 64));
    g
}

fn tol(scale: f64) -> f64 {
    GRID_TOL_ABS + GRID_TOL_REL * scale.abs()
}

impl ConcaveSurrogate {
    /// Builds the surrogate without certifying it.
    pub fn unchecked(bspec: BFunctionSpec, c: f64, kind: SurrogateKind) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() || c.ln() < bspec.x_min() {
            return Err(Error::InvalidParameter(format!(
                "shift c = {c} must satisfy log c >= x_min = {}",
                bspec.x_min()
            )));
        }
        Ok(Self { kind, bspec, c })
    }

    fn lambda(&self, x: f64) -> f64 {
        let lc = self.c.ln();
        self.bspec.eval(lc + (x / self.c).ln_1p()) - self.bspec.eval(lc)
    }

    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self.kind {
            SurrogateKind::F => self.lambda(x),
            SurrogateKind::G => self.lambda(x) * (self.c + x).ln(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        let l = (self.c + x).ln();
        let df = self.bspec.derivative(l) / (self.c + x);
        match self.kind {
            SurrogateKind::F => df,
            SurrogateKind::G => df * l + self.lambda(x) / (self.c + x),
        }
    }

    /// Right derivative at 0.
    pub fn derivative_at_zero(&self) -> f64 {
        self.derivative(0.0)
    }

    /// Grid certification: value nondecreasing, derivative nonnegative and
    /// nonincreasing, secant slopes nonincreasing. Returns the first
    /// offending grid point.
    pub fn certify(&self, grid: &[f64]) -> std::result::Result<(), f64> {
        let vals: Vec<f64> = grid.iter().map(|&x| self.value(x)).collect();
        let ders: Vec<f64> = grid.iter().map(|&x| self.derivative(x)).collect();
        if self.value(0.0) != 0.0 {
            return Err(0.0);
        }
        let d0 = self.derivative_at_zero();
        if !(d0 > 0.0 && d0.is_finite()) {
            return Err(0.0);
        }
        let mut prev_slope = f64::INFINITY;
        for i in 1..grid.len() {
            if vals[i] < vals[i - 1] - tol(vals[i - 1]) {
                return Err(grid[i]);
            }
            if ders[i] < -tol(0.0) || ders[i] > ders[i - 1] + tol(ders[i - 1]) {
                return Err(grid[i]);
            }
            let slope = (vals[i] - vals[i - 1]) / (grid[i] - grid[i - 1]);
            if slope > prev_slope + tol(prev_slope) {
                return Err(grid[i]);
            }
            prev_slope = slope;
        }
        Ok(())
    }
}

/// Builds and certifies a surrogate on the default grid.
pub fn make_surrogate(bspec: BFunctionSpec, c: f64, kind: SurrogateKind) -> Result<ConcaveSurrogate> {
    let s = ConcaveSurrogate::unchecked(bspec, c, kind)?;
    s.certify(&default_grid())
        .map_err(|at| Error::ConcavityViolation { at })?;
    Ok(s)
}

/// Smallest `c` in `e, 2e, 4e, ...` (below 1e9) for which both surrogates
/// pass certification on `grid`.
pub fn select_c(bspec: BFunctionSpec, grid: &[f64]) -> Result<f64> {
    let mut c = E;
    while c <= C_CAP {
        if c.ln() >= bspec.x_min() {
            let ok = [SurrogateKind::F, SurrogateKind::G].iter().all(|&k| {
                ConcaveSurrogate::unchecked(bspec, c, k)
                    .map(|s| s.certify(grid).is_ok())
                    .unwrap_or(false)
            });
            if ok {
                return Ok(c);
            }
        }
        c *= 2.0;
    }
    Err(Error::NoAdmissibleC { cap: C_CAP })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rvkit::bfun::Family;

    #[test]
    fn lambda_examples() {
        let b = BFunctionSpec::power(1.0).unwrap();
        let f = ConcaveSurrogate::unchecked(b, E, SurrogateKind::F).unwrap();
        assert_eq!(f.value(0.0), 0.0);
        assert!((f.value(E * E - E) - 1.0).abs() < 1e-15);
        assert!((f.derivative_at_zero() - 1.0 / E).abs() < 1e-15);
    }

    #[test]
    fn f_alone_accepts_e_for_identity() {
        let b = BFunctionSpec::power(1.0).unwrap();
        assert!(make_surrogate(b, E, SurrogateKind::F).is_ok());
        assert!(matches!(
            make_surrogate(b, E, SurrogateKind::G),
            Err(Error::ConcavityViolation { .. })
        ));
    }

    /// Second derivative of g for b(y) = y^alpha at x = 0 with l = log c,
    /// written out by hand: alpha = 1 gives (2 - l)/c^2, alpha = 2 gives
    /// (6 l - 2 l^2)/c^2. Concavity needs l >= 2 and l >= 3 respectively.
    #[test]
    fn select_c_matches_hand_thresholds() {
        let grid = default_grid();
        let oracle = |threshold: f64| {
            let mut c = E;
            while c.ln() < threshold {
                c *= 2.0;
            }
            c
        };
        let c1 = select_c(BFunctionSpec::power(1.0).unwrap(), &grid).unwrap();
        assert_eq!(c1, oracle(2.0));
        assert_eq!(c1, 4.0 * E);
        let c2 = select_c(BFunctionSpec::power(2.0).unwrap(), &grid).unwrap();
        assert_eq!(c2, oracle(3.0));
        for c in [c1, c2] {
            let s = ConcaveSurrogate::unchecked(BFunctionSpec::power(2.0).unwrap(), c2, SurrogateKind::G).unwrap();
            assert!(s.certify(&grid).is_ok(), "c = {c}");
        }
    }

    #[test]
    fn select_c_for_other_families() {
        let grid = default_grid();
        for fam in [
            Family::PowerLogIter { k: 1 },
            Family::PowerLogIter { k: 2 },
            Family::PowerExpLogPow { beta: 0.5, gamma: 0.5 },
        ] {
            let b = BFunctionSpec::new(fam, 1.5).unwrap();
            let c = select_c(b, &grid).unwrap();
            assert!(c.ln() >= b.x_min());
            make_surrogate(b, c, SurrogateKind::F).unwrap();
            make_surrogate(b, c, SurrogateKind::G).unwrap();
        }
    }

    #[test]
    fn huge_alpha_has_no_admissible_c() {
        let b = BFunctionSpec::power(40.0).unwrap();
        assert!(matches!(select_c(b, &default_grid()), Err(Error::NoAdmissibleC { .. })));
    }
}
