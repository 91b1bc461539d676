//! Behavior-cloning training loop, evaluation metrics and prediction plots.

mod eval;
mod samples;
mod train;
mod viz;

pub use eval::{evaluate, metrics, predict, zero_action_baseline, EvalReport, PredictionRecord};
pub use samples::{build_samples, load_samples, Sample};
pub use train::{save_curves, train, EpochRecord, TrainConfig, TrainOutcome, CURVES_HEADER};
pub use viz::{render_path_ppm, render_predictions_ppm, visualize_predictions, write_ppm};

use crate::dataset::DatasetError;
use crate::policy::PolicyError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("training split is empty")]
    EmptyTrain,
    #[error("evaluation split is empty")]
    EmptyEval,
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss { epoch: usize, batch: usize, detail: String },
    #[error("degenerate quaternion in sample {0}")]
    DegenerateQuaternion(usize),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}
