//! Encoder-decoder behavior-cloning policy and its gradient engine.
//!
//! A residual convolutional encoder reads the RGB, depth and mask planes, an
//! MLP reads the current pose, and a stack of grouped residual 1-d
//! convolutions decodes the joined features into a Gaussian translation
//! action and a quaternion-difference action.

mod gradcheck;
mod io;
mod loss;
mod model;
mod network;
mod tape;

pub use gradcheck::{gradcheck, relative_error, GradcheckReport, FD_STEP, REL_FLOOR};
pub use io::{decode_policy, encode_policy, load_policy, save_policy, POLICY_MAGIC};
pub use loss::{
    hybrid_loss, loss_with_head_grads, ActionPrediction, LossTerms, LossWeights, LOGVAR_MAX, LOGVAR_MIN,
};
pub use model::{policy_init, Observation, Policy};
pub use network::{Architecture, Init, PolicyConfig, TensorSpec, IMAGE_CHANNELS};
pub use tape::{gemm, ConvGeom, NodeId, Tape};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("invalid policy config: {0}")]
    BadConfig(String),
    #[error("input has {actual} values, expected {expected}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("policy file: {0}")]
    Format(String),
    #[error("{0}")]
    Io(String),
}
