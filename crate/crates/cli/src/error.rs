use bayes_stack::baselearners::BaseLearnerError;
use bayes_stack::features::FeatureError;
use bayes_stack::mcmc::McmcError;
use bayes_stack::metrics::MetricsError;
use bayes_stack::models::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, unreadable or malformed input, failed preconditions.
    #[error("{0}")]
    Input(String),
    /// R-hat above the limit or too many divergent transitions.
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<McmcError> for CliError {
    fn from(e: McmcError) -> Self {
        match e {
            McmcError::SamplingFailure { .. } | McmcError::Divergence { .. } => CliError::Convergence(e.to_string()),
            McmcError::InvalidConfig(_) | McmcError::InvalidInit(_) => CliError::Input(e.to_string()),
            McmcError::Dimension { .. } | McmcError::InsufficientDraws(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Mcmc(inner) => inner.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<BaseLearnerError> for CliError {
    fn from(e: BaseLearnerError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::LengthMismatch { .. } | MetricsError::TooFew { .. } | MetricsError::Undefined(_) => {
                CliError::Input(e.to_string())
            }
            MetricsError::Domain(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(format!("json: {e}"))
    }
}
