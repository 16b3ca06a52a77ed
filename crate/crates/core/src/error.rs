use thiserror::Error;

/// Errors raised by the solver, the verification suites and persistence.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite sample at index ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid exponent p = {0}: must satisfy p >= 1")]
    InvalidExponent(f64),

    #[error("weight overflow: field not in weighted space at this resolution")]
    WeightOverflow,

    #[error("nonzero-mean vorticity (integral {mean:.3e}): use velocity_total")]
    NonzeroMean { mean: f64 },

    #[error("contraction condition violated: ||b||_inf = {0:.6} >= 1")]
    ContractionViolated(f64),

    #[error("pressure fixed point did not converge in {iterations} iterations (last relative update {update:.3e})")]
    PressureNotConverged { iterations: usize, update: f64 },

    #[error("density positivity violated: min(1 + b) = {0:.6}")]
    DensityNotPositive(f64),

    #[error("density perturbation too large: ||b||_inf = {0:.6} >= 0.9")]
    DensityTooLarge(f64),

    #[error("CFL violation: dt = {dt:.6e} exceeds limit {limit:.6e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("non-finite state detected at tau = {0:.6}")]
    Blowup(f64),

    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },

    #[error("eigensolver did not converge; residuals {0:?}")]
    EigenNotConverged(Vec<f64>),

    #[error("decay fit: {0}")]
    Fit(String),

    #[error("Picard iterate {index}: {source}")]
    Picard { index: usize, source: Box<Error> },

    #[error("Picard non-contraction: {norm} increased for 3 consecutive iterates")]
    NonContraction { norm: String },

    #[error("checkpoint corrupted: {0}")]
    Corrupt(String),

    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// True for failures of the numerics (as opposed to invalid input or IO).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::WeightOverflow
            | Error::ContractionViolated(_)
            | Error::PressureNotConverged { .. }
            | Error::DensityTooLarge(_)
            | Error::Cfl { .. }
            | Error::Blowup(_)
            | Error::EigenNotConverged(_)
            | Error::NonContraction { .. } => true,
            Error::Picard { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
