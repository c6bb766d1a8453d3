//! From-scratch linear-kernel SVM: a binary SMO trainer, a one-vs-rest
//! multiclass wrapper, and a versioned model file format.
//!
//! The trainer solves the dual soft-margin problem
//!
//! ```text
//! maximize   W(a) = sum(a_i) - 1/2 * sum_ij a_i a_j y_i y_j <x_i, x_j>
//! subject to 0 <= a_i <= c  and  sum(a_i y_i) = 0
//! ```
//!
//! by optimizing one pair of multipliers at a time. The kernel is always
//! the plain dot product, so the weight vector is carried explicitly and
//! prediction is a single dot product plus bias.

mod model_io;
mod multiclass;
mod smo;

pub use model_io::{
    deserialize_model, load_model_file, save_model_file, serialize_model, MODEL_MAGIC,
    MODEL_VERSION,
};
pub use multiclass::{train_multiclass, MulticlassModel};
pub use smo::{
    max_kkt_violation, max_kkt_violation_raw, train_binary, train_binary_with_trace,
    train_raw_with_trace, BinaryModel,
    TrainMeta, TrainParams,
};

use thiserror::Error;

/// Errors from training, prediction, and model files.
#[derive(Debug, Error)]
pub enum SvmError {
    #[error("training set is empty")]
    EmptyInput,
    #[error("{samples} samples but {labels} labels")]
    LengthMismatch { samples: usize, labels: usize },
    #[error("labels must be -1 or +1, got {0}")]
    InvalidLabel(f64),
    #[error("training set contains only one class")]
    SingleClass,
    #[error("invalid training params: {0}")]
    InvalidParams(String),
    #[error("model file is not version {expected}: header {found:?}")]
    VersionMismatch { expected: u32, found: String },
    #[error("model file checksum mismatch (stored {stored:016x}, computed {computed:016x})")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error("model file line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
