//! Per-episode log rows shared by every experiment kind.

use serde::{Deserialize, Serialize};

/// One CSV row. Optional columns are left empty when not applicable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub episode: usize,
    /// Environment steps taken when the episode ended.
    pub global_step: u64,
    pub train_return: f64,
    pub eval_return: Option<f64>,
    pub length: usize,
    pub mean_admissible: f64,
    /// Ground-truth valid actions missing from the admissible set, summed
    /// over the episode's steps.
    pub eliminated_valid: Option<u64>,
}

pub const CSV_COLUMNS: [&str; 8] = [
    "seed",
    "episode",
    "global_step",
    "train_return",
    "eval_return",
    "length",
    "mean_admissible",
    "eliminated_valid",
];
