//! Laws of the perpetuity driver `(M, Q)` and of the reproduction point
//! process, with closed-form analytics and the induced spine laws.

pub mod a_eval;
pub mod induced;
pub mod mq;
pub mod parse;
pub mod pp;
pub mod regime;

pub use a_eval::{AEvaluator, EmpiricalA};
pub use induced::{estimate_m_gamma, induced_m_law, induced_mq_law, induced_q_and_w1_law};
pub use mq::{Analytics, Dependence, LogMoment, MqDraw, MqKind, MqLaw};
pub use parse::{parse_law, Law, CATALOGUE};
pub use pp::{choose_child, PpKind, PpLaw, TiltMode};
pub use regime::{classify_regime, Case, RegimeReport, Subcase};
