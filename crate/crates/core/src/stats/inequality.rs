use serde::{Deserialize, Serialize};

use super::tail::CurvePoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SlackRule {
    /// `lhs.hi <= constant * rhs.lo + slack` at every grid point.
    Constant { constant: f64, slack: f64 },
    /// Some constant exists: the ratio curve must be finite and must not
    /// grow across the upper half of the resolved grid.
    Existential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCheck {
    pub t: f64,
    pub lhs: CurvePoint,
    pub rhs: CurvePoint,
    pub ratio: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub points: Vec<PointCheck>,
    pub pass: bool,
    /// Smallest constant that would make the point estimates satisfy the
    /// inequality on the resolved grid.
    pub best_constant: Option<f64>,
}

/// A right-hand point is resolved when its band is tight enough for the
/// ratio to mean something.
fn resolved(p: &CurvePoint) -> bool {
    p.estimate > 0.0 && p.lo >= 0.25 * p.estimate
}

pub fn inequality_check(lhs: &[CurvePoint], rhs: &[CurvePoint], rule: SlackRule) -> InequalityReport {
    assert_eq!(lhs.len(), rhs.len(), "curves must share a grid");
    let mut points: Vec<PointCheck> = lhs
        .iter()
        .zip(rhs)
        .map(|(l, r)| PointCheck {
            t: l.t,
            lhs: *l,
            rhs: *r,
            ratio: resolved(r).then(|| l.estimate / r.estimate),
            pass: true,
        })
        .collect();
    let ratios: Vec<f64> = points.iter().filter_map(|p| p.ratio).collect();
    let best_constant = ratios.iter().copied().reduce(f64::max);
    let pass = match rule {
        SlackRule::Constant { constant, slack } => {
            for p in &mut points {
                p.pass = p.lhs.hi <= constant * p.rhs.lo + slack;
            }
            points.iter().all(|p| p.pass)
        }
        SlackRule::Existential => {
            let finite = ratios.iter().all(|r| r.is_finite());
            let stable = if ratios.len() < 2 {
                false
            } else {
                let (low, high) = ratios.split_at(ratios.len() / 2);
                let lmax = low.iter().copied().fold(0.0, f64::max);
                let hmax = high.iter().copied().fold(0.0, f64::max);
                hmax <= 2.0 * lmax.max(f64::MIN_POSITIVE) || hmax == 0.0
            };
            for p in &mut points {
                p.pass = p.ratio.is_none_or(f64::is_finite);
            }
            finite && stable
        }
    };
    InequalityReport {
        points,
        pass,
        best_constant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(t: f64, e: f64, w: f64) -> CurvePoint {
        CurvePoint {
            t,
            estimate: e,
            lo: (e - w).max(0.0),
            hi: e + w,
        }
    }

    #[test]
    fn constant_rule() {
        let l = [pt(1.0, 0.1, 0.01)];
        let r = [pt(1.0, 0.1, 0.01)];
        assert!(inequality_check(&l, &r, SlackRule::Constant { constant: 2.0, slack: 0.0 }).pass);
        assert!(!inequality_check(&l, &r, SlackRule::Constant { constant: 1.0, slack: 0.0 }).pass);
    }

    #[test]
    fn existential_rule_detects_growth() {
        let ts: Vec<f64> = (1..=8).map(f64::from).collect();
        let r: Vec<_> = ts.iter().map(|&t| pt(t, 0.5 / t, 0.001 / t)).collect();
        let bounded: Vec<_> = ts.iter().map(|&t| pt(t, 1.0 / t, 0.001)).collect();
        let growing: Vec<_> = ts.iter().map(|&t| pt(t, 0.05 * t / t.powi(0), 0.001)).collect();
        let a = inequality_check(&bounded, &r, SlackRule::Existential);
        assert!(a.pass);
        assert!((a.best_constant.unwrap() - 2.0).abs() < 1e-12);
        assert!(!inequality_check(&growing, &r, SlackRule::Existential).pass);
    }

    proptest! {
        #[test]
        fn monotone_in_slack(l in 0.0f64..1.0, r in 0.0f64..1.0, c in 0.5f64..4.0, s in 0.0f64..0.5, ds in 0.0f64..0.5) {
            let lc = [pt(1.0, l, 0.01)];
            let rc = [pt(1.0, r, 0.01)];
            let a = inequality_check(&lc, &rc, SlackRule::Constant { constant: c, slack: s });
            let b = inequality_check(&lc, &rc, SlackRule::Constant { constant: c, slack: s + ds });
            prop_assert!(!a.pass || b.pass);
        }
    }
}
