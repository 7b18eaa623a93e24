use thiserror::Error;

/// Errors reported by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} is infinite for Pareto shape {shape}")]
    InfiniteMoment { what: &'static str, shape: f64 },

    #[error("risk level must lie strictly inside (0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("loss sample is empty")]
    EmptySample,

    #[error("expected surplus {0} is not positive")]
    NonPositiveSurplus(f64),

    #[error("exponential tilt overflow guard: omega * (a2 - a1) = {0} exceeds 500")]
    TiltOverflow(f64),

    #[error("{method} did not converge within {iterations} iterations")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("no feasible contract: every evaluated point had non-positive surplus")]
    AllInfeasible,

    #[error("second-derivative block is not positive definite (smallest eigenvalue {0:e})")]
    IndefiniteHessian(f64),

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("the price of risk lambda is required for psi-function analytics")]
    MissingLambda,

    #[error("{value} lies outside the support of {what}")]
    OutOfSupport { what: &'static str, value: f64 },

    #[error("sample-size search exhausted its budget: n = {n_max} still gives RMSE {rmse:.4} above target {target}")]
    BudgetExhausted { n_max: f64, rmse: f64, target: f64 },

    #[error("every replicate failed ({0} attempted)")]
    AllReplicatesFailed(usize),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InfiniteMoment { .. } => "infinite_moment",
            Error::InvalidLevel(_) => "invalid_level",
            Error::EmptySample => "empty_sample",
            Error::NonPositiveSurplus(_) => "non_positive_surplus",
            Error::TiltOverflow(_) => "tilt_overflow",
            Error::NonConvergence { .. } => "non_convergence",
            Error::DegenerateData(_) => "degenerate_data",
            Error::AllInfeasible => "all_infeasible",
            Error::IndefiniteHessian(_) => "indefinite_hessian",
            Error::Singular(_) => "singular",
            Error::MissingLambda => "missing_lambda",
            Error::OutOfSupport { .. } => "out_of_support",
            Error::BudgetExhausted { .. } => "budget_exhausted",
            Error::AllReplicatesFailed(_) => "all_replicates_failed",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite and > 0, got {value}"
        )))
    }
}

pub(crate) fn ensure_nonnegative(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite and >= 0, got {value}"
        )))
    }
}

pub(crate) fn ensure_level(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(eps))
    }
}
