use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use perpetua::brwsim::BrwCaps;
use perpetua::law::{parse_law, Law};
use perpetua::perpsim::ZinfPolicy;
use perpetua::rvkit::BFunctionSpec;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_REPLICATES: usize = 10_000;
pub const THREADS_ENV: &str = "PERPETUA_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InequalityKind {
    /// Symmetrized supremum against `|Z_inf|`.
    Symm,
    /// Supremum of the even products against the symmetrized supremum.
    Tailin,
    /// Supremum of the BRW martingale against its limit.
    Tailsup,
    /// Expected ladder epoch against `2 J(|log x|)`.
    Ladder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    PerpMoment,
    PerpLadder,
    PerpWald,
    BrwMartingale,
    BrwFixpoint,
    SpineIdentity,
    SpineSizebias,
    UiCheck,
    Inequality(InequalityKind),
}

pub const EXPERIMENTS: &[&str] = &[
    "perp-moment",
    "perp-ladder",
    "perp-wald",
    "brw-martingale",
    "brw-fixpoint",
    "spine-identity",
    "spine-sizebias",
    "ui-check",
    "inequality:symm",
    "inequality:tailin",
    "inequality:tailsup",
    "inequality:ladder",
];

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s.trim() {
            "perp-moment" => Experiment::PerpMoment,
            "perp-ladder" => Experiment::PerpLadder,
            "perp-wald" => Experiment::PerpWald,
            "brw-martingale" => Experiment::BrwMartingale,
            "brw-fixpoint" => Experiment::BrwFixpoint,
            "spine-identity" => Experiment::SpineIdentity,
            "spine-sizebias" => Experiment::SpineSizebias,
            "ui-check" => Experiment::UiCheck,
            "inequality:symm" => Experiment::Inequality(InequalityKind::Symm),
            "inequality:tailin" => Experiment::Inequality(InequalityKind::Tailin),
            "inequality:tailsup" => Experiment::Inequality(InequalityKind::Tailsup),
            "inequality:ladder" => Experiment::Inequality(InequalityKind::Ladder),
            other => {
                return Err(CliError::Config(format!(
                    "unknown experiment `{other}` (expected one of {})",
                    EXPERIMENTS.join(", ")
                )))
            }
        })
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::PerpMoment => "perp-moment",
            Experiment::PerpLadder => "perp-ladder",
            Experiment::PerpWald => "perp-wald",
            Experiment::BrwMartingale => "brw-martingale",
            Experiment::BrwFixpoint => "brw-fixpoint",
            Experiment::SpineIdentity => "spine-identity",
            Experiment::SpineSizebias => "spine-sizebias",
            Experiment::UiCheck => "ui-check",
            Experiment::Inequality(InequalityKind::Symm) => "inequality:symm",
            Experiment::Inequality(InequalityKind::Tailin) => "inequality:tailin",
            Experiment::Inequality(InequalityKind::Tailsup) => "inequality:tailsup",
            Experiment::Inequality(InequalityKind::Ladder) => "inequality:ladder",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub eps: Option<f64>,
    pub nmax: Option<u64>,
    pub pop_cap: Option<usize>,
    pub gen_cap: Option<usize>,
    pub confidence: Option<f64>,
}

/// A partially specified scenario, as read from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub law: Option<String>,
    pub bspec: Option<String>,
    pub experiment: Option<String>,
    pub horizon: Option<usize>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub policy: PolicyFile,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read scenario {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("malformed scenario {}: {e}", path.display())))
    }

    /// Field-wise `self` where set, else `lower`.
    pub fn over(self, lower: ScenarioFile) -> ScenarioFile {
        ScenarioFile {
            seed: self.seed.or(lower.seed),
            replicates: self.replicates.or(lower.replicates),
            law: self.law.or(lower.law),
            bspec: self.bspec.or(lower.bspec),
            experiment: self.experiment.or(lower.experiment),
            horizon: self.horizon.or(lower.horizon),
            output: self.output.or(lower.output),
            threads: self.threads.or(lower.threads),
            policy: PolicyFile {
                eps: self.policy.eps.or(lower.policy.eps),
                nmax: self.policy.nmax.or(lower.policy.nmax),
                pop_cap: self.policy.pop_cap.or(lower.policy.pop_cap),
                gen_cap: self.policy.gen_cap.or(lower.policy.gen_cap),
                confidence: self.policy.confidence.or(lower.policy.confidence),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Policy {
    pub zinf: ZinfPolicy,
    pub caps: BrwCaps,
    pub confidence: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub replicates: usize,
    pub law: Law,
    pub bspec: Option<BFunctionSpec>,
    pub experiment: Experiment,
    pub horizon: Option<usize>,
    pub policy: Policy,
    pub output: Option<PathBuf>,
    pub threads: usize,
    pub timing: bool,
}

fn positive<T: PartialOrd + Default + fmt::Display>(name: &str, v: T) -> CliResult<T> {
    if v > T::default() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl Scenario {
    /// Resolves a merged scenario against the defaults and validates it.
    /// Threads fall back to `PERPETUA_THREADS`, then to the pool default.
    pub fn resolve(file: ScenarioFile, timing: bool) -> CliResult<Self> {
        let law_spec = file.law.ok_or_else(|| CliError::Config("a law is required (--law)".into()))?;
        let law = parse_law(&law_spec).map_err(|e| CliError::Config(e.to_string()))?;
        let experiment: Experiment = file
            .experiment
            .ok_or_else(|| CliError::Config("an experiment is required (--experiment)".into()))?
            .parse()?;
        let bspec = file
            .bspec
            .map(|b| BFunctionSpec::parse(&b).map_err(|e| CliError::Config(e.to_string())))
            .transpose()?;
        let replicates = positive("replicates", file.replicates.unwrap_or(DEFAULT_REPLICATES))?;
        if replicates < 2 {
            return Err(CliError::Config("replicates must be at least 2".into()));
        }
        let defaults = ZinfPolicy::default();
        let caps = BrwCaps::default();
        let p = &file.policy;
        let zinf = ZinfPolicy {
            eps: positive("eps", p.eps.unwrap_or(defaults.eps))?,
            nmax: positive("nmax", p.nmax.unwrap_or(defaults.nmax))?,
            quiet: defaults.quiet,
        };
        if !zinf.eps.is_finite() {
            return Err(CliError::Config("eps must be finite".into()));
        }
        let caps = BrwCaps {
            pop_cap: positive("pop-cap", p.pop_cap.unwrap_or(caps.pop_cap))?,
            gen_cap: positive("gen-cap", p.gen_cap.unwrap_or(caps.gen_cap))?,
        };
        let confidence = p.confidence.unwrap_or(perpetua::stats::DEFAULT_CONFIDENCE);
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(CliError::Config(format!("confidence must lie in (0, 1), got {confidence}")));
        }
        let horizon = file.horizon.map(|h| positive("horizon", h)).transpose()?;
        let threads = match file.threads {
            Some(t) => t,
            None => threads_from_env()?,
        };
        Ok(Scenario {
            seed: file.seed.unwrap_or(DEFAULT_SEED),
            replicates,
            law,
            bspec,
            experiment,
            horizon,
            policy: Policy { zinf, caps, confidence },
            output: file.output,
            threads,
            timing,
        })
    }
}

/// `PERPETUA_THREADS`, or 0 (the pool default) when unset.
pub fn threads_from_env() -> CliResult<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV}=`{v}` is not a thread count"))),
        _ => Ok(0),
    }
}
