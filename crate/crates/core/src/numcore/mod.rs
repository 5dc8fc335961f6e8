//! Dense `f64` tensors, a reverse-mode tape, Adam, and a finite-difference
//! gradient checker. Enough machinery to train small LSTMs and CNNs.

mod gradcheck;
pub mod linalg;
mod optim;
mod tape;
mod tensor;

pub use gradcheck::finite_diff_check;
pub use optim::{adam_step, clip_global_norm, AdamConfig, OptimizerState};
pub use tape::{one_hot, Gradients, NodeId, Tape};
pub use tensor::{log_softmax_at, sigmoid, softmax, softmax_rows, Tensor};

pub(crate) use tensor::gemm;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NumError {
    #[error("invalid tensor shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("shape {shape:?} does not hold {len} elements")]
    LengthMismatch { shape: Vec<usize>, len: usize },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("column slice {start}..{end} out of range for {cols} columns")]
    SliceOutOfRange { start: usize, end: usize, cols: usize },
    #[error("{rows} rows cannot be split into segments of {seg}")]
    SegmentMismatch { rows: usize, seg: usize },
    #[error("expected a scalar, found shape {0:?}")]
    NonScalar(Vec<usize>),
    #[error("node {0} is not on this tape")]
    DanglingNode(usize),
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
}
