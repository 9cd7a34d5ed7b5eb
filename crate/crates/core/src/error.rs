use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot parse `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("surrogate failed the concavity certification at x = {at}")]
    ConcavityViolation { at: f64 },

    #[error("no admissible shift constant c below {cap}")]
    NoAdmissibleC { cap: f64 },

    #[error("A(log(x+1)) vanishes at x = {x}: P{{|M|<1}} = 0")]
    DivisionDegeneracy { x: f64 },

    #[error("J(0) is undefined because P{{|M|<1}} = 0")]
    UndefinedJ0,

    #[error("sampler for law `{law}` emitted M = 0")]
    SamplerViolation { law: String },

    #[error("regime classification inconclusive: {0}")]
    Inconclusive(String),

    #[error("induced M-law is the point mass at 1 (not supercritical)")]
    DegenerateBrw,

    #[error("law `{0}` has no finite enumeration")]
    NotEnumerable(String),

    #[error("rejection tilting requires an a.s. bound on the total exponential weight")]
    UnboundedDensity,

    #[error("law `{0}` does not support tilting in the requested mode")]
    UnsupportedTilting(String),

    #[error("no convergence after {steps} steps (last |increment| = {last_increment:e})")]
    NonConvergent { steps: u64, last_increment: f64 },

    #[error("exact conditioning on the block product is unavailable for law `{0}`")]
    UnsupportedConditioning(String),

    #[error("no eta with positive empirical alpha (eta = {eta})")]
    BadEta { eta: f64 },

    #[error("population {population} exceeds the cap at generation {generation}")]
    PopulationExplosion {
        generation: usize,
        population: usize,
        partial: Vec<f64>,
    },

    #[error("population is extinct")]
    Extinct,

    #[error("exact support exceeds {limit} atoms")]
    SupportExplosion { limit: usize },
}
