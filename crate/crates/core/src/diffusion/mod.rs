//! Masked block diffusion: noise schedule, attention masks, the reference
//! denoising predictor, the NELBO objective and its gradient, and SGD
//! training.

mod checkpoint;
mod loss;
mod mask;
mod predictor;
mod schedule;
mod train;

use thiserror::Error;

use crate::fragment::FragmentError;

pub use checkpoint::{Checkpoint, CheckpointError, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use loss::{
    forward_mask, loss_and_gradient, loss_gradient, nelbo, nelbo_loss, LossReport, NoiseDraw,
};
pub use mask::{build_infer_mask, build_train_mask, AttentionMask, MaskLayout};
pub use predictor::{
    adjust_logits, predict, predict_with_exclusions, BlockScorer, PredictorParams, ProbTable,
    Sampling,
};
pub use schedule::{NoiseSchedule, ScheduleValue, T_MIN};
pub use train::{train, train_from, TrainOptions, TrainReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffusionError {
    #[error("diffusion time {0} outside (0, 1]")]
    OutOfRange(f64),
    #[error("context window contains a MASK token")]
    MaskInContext,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("temperature must be positive and nucleus mass in (0, 1]; got {temperature}, {nucleus}")]
    BadSampling { temperature: f64, nucleus: f64 },
    #[error("token id {0} exceeds vocabulary size {1}")]
    TokenOutOfRange(u32, usize),
    #[error("loss requires a fully clean block tensor")]
    NotClean,
    #[error(transparent)]
    Fragment(#[from] FragmentError),
}
