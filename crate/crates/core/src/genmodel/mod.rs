//! Autoregressive density models: a one-layer LSTM trained with the
//! `numcore` tape, and an interpolated n-gram fitted in closed form.

pub mod checkpoint;
mod config;
pub mod lstm;
mod model;
pub mod ngram;
mod train;

pub use config::{ARConfig, ModelKind, TrainConfig};
pub use model::{log_likelihoods, Checkpoint, DensityModel};
pub use train::{mean_nll, train_ar, train_ar_logged, TrainLog};

use crate::numcore::NumError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("no training data")]
    EmptyData,
    #[error("empty sequence")]
    EmptySequence,
    #[error("symbol code {symbol} outside model alphabet of size {alphabet_size}")]
    AlphabetMismatch { symbol: u8, alphabet_size: usize },
    #[error("models disagree: {0}")]
    Incompatible(String),
    #[error("parameter shapes: {0}")]
    ShapeMismatch(String),
    #[error("loss became non-finite at step {step}")]
    NonFinite { step: u64 },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint fingerprint mismatch (stored {stored}, computed {actual})")]
    FingerprintMismatch { stored: String, actual: String },
    #[error("checkpoint format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error(transparent)]
    Numeric(#[from] NumError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
