//! Environments: budgeted maze navigation and the air-combat surrogate.
//!
//! Each instance owns its RNG and is stepped by exactly one worker;
//! concurrency happens across instances, never within one.

use std::collections::{BTreeMap, HashSet};

use crate::pamdp::{ActionSpec, HybridAction};

pub mod combat;
pub mod maze;

/// Result of one environment step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: BTreeMap<String, f64>,
}

/// Common surface the training harness drives.
pub trait Environment: Send {
    fn action_spec(&self) -> &ActionSpec;
    fn obs_dim(&self) -> usize;
    /// Discrete indices that draw from a finite budget.
    fn resource_ids(&self) -> HashSet<usize>;
    /// Deterministic reset; the seed feeds only in-episode stochasticity.
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &HybridAction) -> StepOutcome;
    /// Steps remaining before the episode cap.
    fn max_steps(&self) -> usize;
}
