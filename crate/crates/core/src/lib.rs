//! Action elimination for reinforcement learning.

pub mod eliminator;
pub mod experiment;
pub mod env;
pub mod gridworld;
pub mod linalg;
pub mod minizork;
pub mod neural;
pub mod record;
mod serde_inf;
pub mod synthetic;
pub mod tabular;

pub use eliminator::{ArmModel, BetaMode, ElimError, EliminationConfig, EliminationScore};
pub use gridworld::{GridConfig, GridError, GridState, GridStep, GridWorld};
pub use linalg::{LinalgError, SpdMatrix};
pub use record::EpisodeRecord;
