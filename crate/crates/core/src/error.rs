use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{quantity} = {value:.6e} lies outside the validity window [{lo:.6e}, {hi:.6e}]")]
    Domain {
        quantity: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid dispersion model: {0}")]
    InvalidModel(String),

    #[error("calibration failed: {reason} (residuals {residuals:?})")]
    Calibration { reason: String, residuals: Vec<f64> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "frequency grid does not cover the phase-matching band: edge intensity is {edge_ratio:.3e} of the peak (limit {limit:.1e})"
    )]
    GridCoverage { edge_ratio: f64, limit: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Fock cutoff {cutoff} too small: truncation weight {weight:.3e}; try cutoff {suggested}")]
    Cutoff {
        cutoff: usize,
        weight: f64,
        suggested: usize,
    },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("measurement settings are not informationally complete: {0}")]
    NotInformationallyComplete(String),

    #[error("inconsistent loss budget: {0}")]
    InconsistentBudget(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// Input/validation errors as opposed to failures of a numerical procedure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::InvalidModel(_)
                | Error::InvalidParameter(_)
                | Error::GridMismatch(_)
                | Error::NotInformationallyComplete(_)
                | Error::Config(_)
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::InvalidModel(_) => "invalid_model",
            Error::Calibration { .. } => "calibration",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::GridCoverage { .. } => "grid_coverage",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::Cutoff { .. } => "cutoff",
            Error::Estimation(_) => "estimation",
            Error::NotInformationallyComplete(_) => "not_informationally_complete",
            Error::InconsistentBudget(_) => "inconsistent_budget",
            Error::Numeric(_) => "numeric",
            Error::Config(_) => "config",
        }
    }
}
