use thiserror::Error;

/// Everything that can go wrong inside the lab.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("conditioning on a zero-mass event ({0})")]
    ConditioningOnNull(&'static str),

    #[error("weight ratio undefined: no set has positive mass under the target distribution")]
    UndefinedRatio,

    #[error("infeasible: no concept in the class contains the positive sample")]
    Infeasible,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
