//! Estimators, exact oracles, inequality checkers and moment diagnostics.

pub mod estimate;
pub mod exact;
pub mod inequality;
pub mod ks;
pub mod moment;
pub mod tail;
pub mod ui;

pub use estimate::{
    combined_sigma, compensated_sum, mc_mean, welford_tree, z_quantile, CompensatedSum,
    EstimateReport, Welford, DEFAULT_CONFIDENCE,
};
pub use exact::{dp_exact_zn, ExactLaw};
pub use inequality::{inequality_check, InequalityReport, PointCheck, SlackRule};
pub use ks::{ks_one_sample, ks_two_sample, KsReport, KS_CRIT_1PCT};
pub use moment::{diagnose, moment_growth_diagnostic, BatchSchedule, MomentDiagnostic, TracePoint, Verdict};
pub use tail::{geometric_grid, tail_curve, wilson, CurvePoint};
pub use ui::{spine_a_evaluator, uniform_integrability_check, UiReport};
