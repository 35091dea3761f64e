//! Training harness: configuration, environment construction, the training
//! loop, checkpointing, evaluation and plot emission.

pub mod checkpoint;
pub mod config;
pub mod evaluate;
pub mod plot;
pub mod train;

pub use checkpoint::Checkpoint;
pub use config::RunConfig;
pub use evaluate::{evaluate, EvalSummary};
pub use train::{train, MetricsRecord, TrainArtifacts};

use crate::env::combat::{CombatConfig, CombatEnv};
use crate::env::maze::{MazeConfig, MazeEnv};
use crate::env::Environment;
use crate::error::Result;

/// Layout used when `env=maze` and no `env_file` is given: a 7x7 room split
/// by a wall with gaps at top and bottom; a dash crosses it directly.
pub const BENCH7_MAZE: &str = include_str!("../../mazes/bench7.maze");

/// Builds a fresh environment instance from the run config.
pub fn make_env(cfg: &RunConfig) -> Result<Box<dyn Environment>> {
    match cfg.env.as_str() {
        "maze" => {
            let mc = if cfg.env_file.is_empty() {
                MazeConfig::parse(BENCH7_MAZE)?
            } else {
                MazeConfig::load(&cfg.env_file)?
            };
            Ok(Box::new(MazeEnv::new(mc)?))
        }
        "combat" => Ok(Box::new(CombatEnv::new(CombatConfig::default())?)),
        other => Err(crate::error::TartError::InvalidConfig(format!(
            "unknown env {other:?}"
        ))),
    }
}

/// Per-component divisors that bring raw observations into roughly [-1, 1]
/// before they reach the policy networks.
pub fn obs_scale(cfg: &RunConfig, env: &dyn Environment) -> Result<Vec<f64>> {
    match cfg.env.as_str() {
        "maze" => {
            let mc = if cfg.env_file.is_empty() {
                MazeConfig::parse(BENCH7_MAZE)?
            } else {
                MazeConfig::load(&cfg.env_file)?
            };
            let (w, h) = (mc.width() as f64, mc.height() as f64);
            let mut s = vec![w, h, w, h, 1.0];
            s.extend(std::iter::repeat(1.0).take(8));
            Ok(s)
        }
        _ => Ok(vec![1.0; env.obs_dim()]),
    }
}
