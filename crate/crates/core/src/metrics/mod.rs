//! Detector evaluation: AUROC, AUPRC, FPR at a TPR target, Pearson
//! correlation, and report assembly.
//!
//! The in-distribution class is positive throughout. AUROC gives ties half
//! credit; AUPRC and the curve tables treat tied scores as one threshold.

mod curves;
mod report;

pub use curves::{auprc, auroc, fpr_at_tpr, pearson, pr_points, roc_points, CurvePoint};
pub use report::{
    build_report, is_known_method, per_class_auroc_vs_distance, summarize_runs, ClassDistanceRow, CorrelationRow,
    CurveRow, EvalReport, HistRow, MeanStderr, MethodRow, ReportOptions, ScoreRecord, SummaryRow,
};

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("non-finite score")]
    NonFinite,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("{0}")]
    InvalidArgument(String),
    #[error("need at least two OOD classes, found {0}")]
    TooFewClasses(usize),
    #[error("record {0} lacks {1}")]
    MissingCovariate(String, &'static str),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("method {0:?} missing from a run")]
    MissingMethod(String),
    #[error("record {0} has no in/OOD label")]
    Unlabeled(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
