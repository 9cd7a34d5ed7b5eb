use serde::Serialize;

use super::mq::{LogMoment, MqLaw};
use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Case {
    /// `|M| <= 1` a.s. and `P{|M| < 1} > 0`.
    C1,
    /// `P{|M| > 1} > 0` and `Pi_n -> 0`.
    C2,
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Subcase {
    /// `E log M` finite and negative.
    A1,
    /// `E log M = -inf`.
    A2,
    /// `E log+ M = E log- M = inf`.
    A3,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub case: Case,
    pub subcase: Subcase,
    /// True when the verdict rests on sampling rather than closed forms.
    pub empirical: bool,
    pub evidence: String,
}

/// Decides the regime from analytics, or from `budget` draws of `log|M|`.
/// The sampled verdict is evidence only: it checks the sign of the drift
/// at three standard errors and cannot see infinite means.
pub fn classify_regime(law: &MqLaw, budget: usize, rng: &mut Stream) -> Result<RegimeReport> {
    if let Some(a) = law.analytics() {
        let subcase = match a.log_moment {
            LogMoment::Finite(v) if v < 0.0 => Subcase::A1,
            LogMoment::NegInf => Subcase::A2,
            LogMoment::Undefined => Subcase::A3,
            _ => Subcase::None,
        };
        let case = if a.p_gt1 == 0.0 {
            if a.p_lt1 > 0.0 {
                Case::C1
            } else {
                Case::Divergent
            }
        } else {
            match a.log_moment {
                LogMoment::Finite(v) if v < 0.0 => Case::C2,
                LogMoment::NegInf => Case::C2,
                LogMoment::Undefined => {
                    return Err(Error::Inconclusive(
                        "E log|M| undefined and P{|M| > 1} > 0: the J-criterion is not available in closed form".into(),
                    ))
                }
                _ => Case::Divergent,
            }
        };
        let subcase = if case == Case::Divergent { Subcase::None } else { subcase };
        return Ok(RegimeReport {
            case,
            subcase,
            empirical: false,
            evidence: format!(
                "closed form: P(|M|<1) = {}, P(|M|>1) = {}, E log|M| = {:?}",
                a.p_lt1, a.p_gt1, a.log_moment
            ),
        });
    }
    if budget < 2 {
        return Err(Error::Inconclusive("no analytics and no sampling budget".into()));
    }
    let mut logs = Vec::with_capacity(budget);
    for _ in 0..budget {
        logs.push(law.sample(rng)?.log_abs_m);
    }
    let n = budget as f64;
    let gt = logs.iter().filter(|&&l| l > 0.0).count();
    let lt = logs.iter().filter(|&&l| l < 0.0).count();
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let evidence = format!("{budget} draws: {lt} with |M|<1, {gt} with |M|>1, mean log|M| = {mean} (se {se})");
    let case = if gt == 0 && lt > 0 {
        Case::C1
    } else if lt == 0 {
        Case::Divergent
    } else if mean + 3.0 * se < 0.0 {
        Case::C2
    } else if mean - 3.0 * se > 0.0 {
        Case::Divergent
    } else {
        return Err(Error::Inconclusive(evidence));
    };
    Ok(RegimeReport {
        case,
        subcase: if case == Case::Divergent || !mean.is_finite() || mean >= 0.0 {
            Subcase::None
        } else {
            Subcase::A1
        },
        empirical: true,
        evidence,
    })
}
