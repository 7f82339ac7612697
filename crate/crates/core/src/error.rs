use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("integral diverges: {0}")]
    DivergentIntegral(String),

    #[error("quadrature did not converge on [{a}, {b}] (error estimate {estimate:e})")]
    QuadratureFailure { a: f64, b: f64, estimate: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (gap {gap:e} >= tol {tol:e})")]
    NoConvergence { iterations: usize, gap: f64, tol: f64 },

    #[error("modulus vanishes at x = {x:e} > 0")]
    ModulusNotPositive { x: f64 },

    #[error("dominance precondition failed at t = {t}: {detail}")]
    DominancePreconditionFailed { t: f64, detail: String },

    #[error("weights must be strictly positive, got u({t}) = {u:e}, v({t}) = {v:e}")]
    StrictPositivityViolated { t: f64, u: f64, v: f64 },

    #[error("penalty n = {n} is below the growth constant {bound}")]
    NTooSmall { n: f64, bound: f64 },

    #[error("search refinement stalled after {rounds} rounds (objective spread {spread:e})")]
    SearchBudgetExceeded { rounds: usize, spread: f64 },

    #[error("degenerate time grid: step {index} has length {dt:e}")]
    DegenerateGrid { index: usize, dt: f64 },

    #[error(
        "regression normal equations are rank-deficient at step {step} ({basis_len} basis functions, {n_paths} paths)"
    )]
    RegressionSingular { step: usize, basis_len: usize, n_paths: usize },

    #[error("implicit Picard step did not converge at step {step} (gap {gap:e})")]
    NoPicardConvergence { step: usize, gap: f64 },

    #[error("solutions live on different grids or ensembles: {0}")]
    GridMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config field `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigInvalid { field: field.into(), message: message.into() }
    }

    /// Stable machine-readable tag, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DivergentIntegral(_) => "DivergentIntegral",
            Error::QuadratureFailure { .. } => "QuadratureFailure",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::ModulusNotPositive { .. } => "ModulusNotPositive",
            Error::DominancePreconditionFailed { .. } => "DominancePreconditionFailed",
            Error::StrictPositivityViolated { .. } => "StrictPositivityViolated",
            Error::NTooSmall { .. } => "NTooSmall",
            Error::SearchBudgetExceeded { .. } => "SearchBudgetExceeded",
            Error::DegenerateGrid { .. } => "DegenerateGrid",
            Error::RegressionSingular { .. } => "RegressionSingular",
            Error::NoPicardConvergence { .. } => "NoPicardConvergence",
            Error::GridMismatch(_) => "GridMismatch",
            Error::InvalidInput(_) => "InvalidInput",
            Error::ConfigInvalid { .. } => "ConfigInvalid",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
