//! Versioned JSON checkpoints binding agent state to its run config.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::Agent;
use crate::error::{Result, TartError};
use crate::harness::config::{env_hash, RunConfig};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Snapshot of a ChaCha stream: seed plus position, enough to resume the
/// exact sample sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub word_pos_lo: u64,
    pub word_pos_hi: u64,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        let pos = rng.get_word_pos();
        Self {
            seed: rng.get_seed(),
            word_pos_lo: pos as u64,
            word_pos_hi: (pos >> 64) as u64,
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_word_pos(((self.word_pos_hi as u128) << 64) | self.word_pos_lo as u128);
        rng
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: RunConfig,
    /// Identity of the environment the agent was trained on.
    pub env_hash: u64,
    pub env_steps: u64,
    pub update: usize,
    /// Base seed of the fixed evaluation episode set used during training.
    pub eval_seed_base: u64,
    pub agent: Agent,
    pub sample_rng: RngState,
    pub env_seed_rngs: Vec<RngState>,
}

impl Checkpoint {
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        if let Some(dir) = path.as_ref().parent() {
            std::fs::create_dir_all(dir)?;
        }
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| {
            TartError::Checkpoint(format!("{}: {e}", path.as_ref().display()))
        })?;
        let ckpt: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| TartError::Checkpoint(format!("malformed checkpoint: {e}")))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(TartError::Checkpoint(format!(
                "version {} unsupported (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }

    /// Rejects use against an environment other than the training one.
    pub fn check_env(&self, cfg: &RunConfig) -> Result<()> {
        let h = env_hash(cfg)?;
        if h != self.env_hash {
            return Err(TartError::Checkpoint(format!(
                "environment hash mismatch: checkpoint trained on {:?} ({:#x}), got {:?} ({h:#x})",
                self.config.env, self.env_hash, cfg.env
            )));
        }
        Ok(())
    }
}
