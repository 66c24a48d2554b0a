use thiserror::Error;

/// Errors produced by the optimizer, simulator and data loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    Validation(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("selection does not match bucket: {0}")]
    InvalidSelection(String),

    #[error("total inventory of the selection is zero; GMROI is undefined")]
    ZeroInventory,

    #[error("no selection meets the service floor {floor} (max achievable {max_achievable})")]
    Infeasible { floor: f64, max_achievable: f64 },

    #[error("Dinkelbach did not converge within {0} iterations")]
    MaxIterationsExceeded(usize),

    #[error("warm start lambda {lambda} exceeds the optimal ratio (W = {value})")]
    InvalidWarmStart { lambda: f64, value: f64 },

    #[error("multiplier bracketing failed after {doublings} doublings (service {reached} < floor {floor})")]
    BracketingFailed {
        doublings: u32,
        reached: f64,
        floor: f64,
    },

    #[error("exact solver state space {states} exceeds cap {cap}")]
    BudgetOverflow { states: u64, cap: u64 },

    #[error("integer service grid overflows: {0}")]
    ServiceGridOverflow(String),

    #[error("enumeration of {count} selections exceeds limit {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("subproblem solver `{solver}` failed: {source}")]
    SubproblemFailure {
        solver: String,
        #[source]
        source: Box<Error>,
    },

    #[error("certification failed: {0}")]
    CertificationFailed(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// The innermost error, looking through subproblem wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::SubproblemFailure { source, .. } => source.root(),
            e => e,
        }
    }

    /// Short machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Validation(_) | Error::InvalidSelection(_) => "validation",
            Error::InvalidConfig(_) => "config",
            Error::ZeroInventory => "zero_inventory",
            Error::Infeasible { .. } => "infeasible",
            Error::MaxIterationsExceeded(_) => "max_iterations",
            Error::InvalidWarmStart { .. } => "warm_start",
            Error::BracketingFailed { .. } => "bracketing_failed",
            Error::BudgetOverflow { .. } => "budget_overflow",
            Error::ServiceGridOverflow(_) => "service_grid_overflow",
            Error::TooLarge { .. } => "too_large",
            Error::SubproblemFailure { .. } => "subproblem_failure",
            Error::CertificationFailed(_) => "certification_failed",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
