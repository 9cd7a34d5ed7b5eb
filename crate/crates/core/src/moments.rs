//! Growth diagnostics for the moment conditions on `Z_inf` and `W_1`.

use crate::error::{Error, Result};
use crate::law::{MqLaw, PpLaw};
use crate::perpsim::{simulate_log_zinf, ZinfPolicy};
use crate::rvkit::BFunctionSpec;
use crate::stats::{diagnose, spine_a_evaluator, BatchSchedule, MomentDiagnostic};

/// Truncation used for `log Z_inf` in the diagnostics. Terms below `1e-10`
/// of the running sum cannot move `b(log+ Z)` at the resolution of the
/// growth test.
pub const MOMENT_POLICY: ZinfPolicy = ZinfPolicy {
    eps: 1e-10,
    nmax: 1_000_000,
    quiet: 4,
};

/// Diagnostic on `b(log+ Z_inf)` for a perpetuity with positive terms.
pub fn perpetuity_moment_diagnostic(law: &MqLaw, b: &BFunctionSpec, schedule: &BatchSchedule, seed: u64) -> Result<MomentDiagnostic> {
    let failure = std::sync::Mutex::new(None);
    let d = diagnose(
        |s| match simulate_log_zinf(law, MOMENT_POLICY, s) {
            Ok(lz) => b.eval(lz.max(0.0)),
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                f64::NAN
            }
        },
        schedule,
        seed,
        "perp-moment",
    );
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(d),
    }
}

/// Diagnostic on `E W_1 b(log+ W_1) J(log+ W_1)`, sampled as
/// `b(log+ Q) J(log+ Q)` for the size-biased spine `Q`.
pub fn w1_moment_diagnostic(pp: &PpLaw, b: &BFunctionSpec, schedule: &BatchSchedule, seed: u64) -> Result<MomentDiagnostic> {
    let a = spine_a_evaluator(pp, seed)?;
    a.j(1.0).map_err(|_| Error::DivisionDegeneracy { x: 1.0 })?;
    Ok(diagnose(
        |s| {
            let lq = pp.spine_mq(s).log_abs_q;
            if lq <= 0.0 {
                return 0.0;
            }
            b.eval(lq) * a.j(lq).unwrap_or(f64::INFINITY)
        },
        schedule,
        seed,
        "w1-moment",
    ))
}
