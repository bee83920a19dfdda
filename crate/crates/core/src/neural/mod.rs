//! Neural AE-DQN for text environments.

mod agent;
mod encoder;
pub mod kernels;
mod mlp;
mod replay;
mod train;

use thiserror::Error;

pub use agent::{
    act, admissible, aen_update, argmax_over, compute_targets, epsilon_greedy, train_step, AgentConfig, DqnAgent,
    DqnVariant, EliminationSnapshot, TrainWorkspace,
};
pub use encoder::{FeatureEncoder, Features, FrameHistory, FRAME_WINDOW};
pub use mlp::{Layer, Mlp, Workspace};
pub use replay::{ReplayBuffer, ReplayMeta, Transition};
pub use train::{evaluate, load_checkpoint, run_training, save_checkpoint, Checkpoint, EvalPoint, RngStreams, TrainingLog};

use crate::eliminator::ElimError;
use crate::linalg::LinalgError;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value during training: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Elim(#[from] ElimError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
