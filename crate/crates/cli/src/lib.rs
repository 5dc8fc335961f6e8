//! Experiment driver for likelihood-ratio OOD detection.
//!
//! Every stage reads and writes files under the run's output directory, so
//! any stage can be rerun once its inputs exist. See [`pipeline`] for the
//! file layout.

pub mod config;
pub mod pipeline;
pub mod provenance;

use seqood::baselines::BaselineError;
use seqood::genmodel::ModelError;
use seqood::llr::LlrError;
use seqood::metrics::MetricError;
use seqood::numcore::NumError;
use seqood::seqdata::SeqError;

pub use config::RunConfig;

/// Driver failure, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SeqError> for CliError {
    fn from(e: SeqError) -> Self {
        match e {
            SeqError::InvalidSpec(_) | SeqError::MotifTooLong { .. } | SeqError::MotifPlacement { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NumError> for CliError {
    fn from(e: NumError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidConfig(_) => CliError::Config(e.to_string()),
            ModelError::NonFinite { .. } | ModelError::Numeric(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::InvalidConfig(_) => CliError::Config(e.to_string()),
            BaselineError::NonFinite { .. } | BaselineError::SingularCovariance | BaselineError::Numeric(_) => {
                CliError::Numeric(e.to_string())
            }
            BaselineError::Checkpoint(m) => m.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::NonFinite | MetricError::ZeroVariance => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<LlrError> for CliError {
    fn from(e: LlrError) -> Self {
        match e {
            LlrError::Model(m) => m.into(),
            LlrError::Metric(m) => m.into(),
            LlrError::InvalidArgument(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}
