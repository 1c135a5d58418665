//! Outcome of a single trial.

use serde::{Deserialize, Serialize};

/// The recommendation at stopping time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    /// Index into a finite arm set.
    Arm(usize),
    /// Unit direction for the sphere.
    Direction(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub instance: String,
    pub seed: u64,
    /// Number of samples drawn; equals the cap when `incomplete`.
    pub tau: u64,
    pub answer: Answer,
    /// Meaningful only when `!incomplete`.
    pub correct: bool,
    pub support_size: usize,
    pub wall_time_s: f64,
    pub incomplete: bool,
}
