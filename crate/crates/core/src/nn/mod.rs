//! Minimal dense-tensor neural-network kernels: forward and backward passes
//! for the classifier's layers, the loss, the Adam optimizer and a
//! finite-difference gradient checker.
//!
//! Kernels are generic over the float width: training runs at `f32`,
//! gradient checks at `f64`.

mod adam;
mod batchnorm;
mod checkpoint;
mod conv;
mod dense;
mod dropout;
mod gradcheck;
mod loss;
mod pool;
mod tensor;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use batchnorm::{
    batch_norm_backward, batch_norm_forward, BatchNormCache, BatchNormGrads, BatchNormParams,
};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use conv::{conv1d_backward, conv1d_forward, Conv1dCache, Conv1dGrads, Conv1dParams};
pub use dense::{dense_sigmoid_backward, dense_sigmoid_forward, DenseGrads, DenseParams};
pub use dropout::{dropout_backward, dropout_forward, DropoutMask};
pub use gradcheck::{central_diff_grad, max_rel_error, GradCheckReport};
pub use loss::{bce_grad, bce_loss, sigmoid, BCE_CLIP};
pub use pool::{global_max_pool, global_max_pool_backward};
pub use tensor::{Mode, Scalar, Tensor};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty input")]
    EmptyInput,
    #[error("batch size {0} too small for train-mode batch norm")]
    DegenerateBatch(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("checkpoint format error: {0}")]
    BadCheckpoint(String),
}
