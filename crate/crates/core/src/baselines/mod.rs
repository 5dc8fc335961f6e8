//! Classifier-based OOD baselines on a small 1-D CNN.

mod classifier;
mod mahalanobis;
mod scores;

pub use classifier::{
    forward_tape, im2col, train_classifier, train_ensemble, Classifier, ClassifierConfig, ClassifierNodes, Variant,
    PARAM_NAMES,
};
pub use mahalanobis::{score_mahalanobis, MahalanobisFit, Regularization};
pub use scores::{
    ensemble_score, neg_entropy, score_all, score_binary_logodds, score_kplus1, score_max_prob, score_neg_entropy,
    score_odin, score_odin_features,
};

use crate::genmodel::ModelError;
use crate::numcore::NumError;

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("invalid classifier config: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("no training data")]
    EmptyData,
    #[error("sequence {0} has no class label")]
    MissingLabel(String),
    #[error("label {label} outside 0..{classes}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("training sequences must share one length")]
    UnequalLengths,
    #[error("sequence length {len} is shorter than the filter width {width}")]
    TooShort { len: usize, width: usize },
    #[error("symbol code {symbol} outside alphabet of size {alphabet_size}")]
    AlphabetMismatch { symbol: u8, alphabet_size: usize },
    #[error("score needs a {0} classifier")]
    WrongVariant(&'static str),
    #[error("ensemble has no members")]
    EmptyEnsemble,
    #[error("covariance is singular after regularization")]
    SingularCovariance,
    #[error("loss became non-finite at step {step}")]
    NonFinite { step: u64 },
    #[error(transparent)]
    Numeric(#[from] NumError),
    #[error(transparent)]
    Checkpoint(#[from] ModelError),
}
