//! Flat key=value run configuration with include support.
//!
//! The format is deliberately diff-friendly: one key per line, `#` comments,
//! and `include other.cfg` lines resolved relative to the including file.
//! Ablation variants are expressed as one-key diffs on top of a base file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TartError};

/// Everything a training run needs; round-trips losslessly through the
/// key=value text form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: String,
    /// Maze layout file; empty selects the built-in benchmark maze.
    pub env_file: String,
    pub variant: String,
    pub seed: u64,
    pub total_steps: u64,
    pub rollout_steps: usize,
    pub workers: usize,
    /// Updates between greedy evaluations.
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Updates between checkpoints (0 = final only).
    pub checkpoint_every: usize,
    pub out_dir: String,

    // Composite objective weights.
    pub w_nce: f64,
    pub w_vq: f64,
    pub w_commit: f64,
    pub repr_lr: f64,
    /// Max segments per representation update.
    pub repr_batch: usize,
    /// Updates of representation-only training before PPO starts
    /// (0 = fully joint).
    pub pretrain_updates: usize,

    // Encoder / codebook.
    pub latent_dim: usize,
    pub enc_hidden: Vec<usize>,
    pub window: usize,
    pub temperature: f64,
    pub num_codes: usize,
    pub beta: f64,

    // Policy / PPO.
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub logstd_init: f64,
    /// Steps a sampled tactic code stays fixed during rollouts.
    pub code_commit: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: "maze".into(),
            env_file: String::new(),
            variant: "tart".into(),
            seed: 0,
            total_steps: 200_000,
            rollout_steps: 4096,
            workers: 4,
            eval_every: 1,
            eval_episodes: 20,
            checkpoint_every: 10,
            out_dir: "runs".into(),
            w_nce: 1.0,
            w_vq: 1.0,
            w_commit: 0.25,
            repr_lr: 1e-3,
            repr_batch: 256,
            pretrain_updates: 0,
            latent_dim: 16,
            enc_hidden: vec![64, 64],
            window: 8,
            temperature: 0.1,
            num_codes: 16,
            beta: 0.25,
            hidden: vec![64, 64],
            lr: 3e-4,
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch: 256,
            value_coef: 0.5,
            entropy_coef: 0.01,
            logstd_init: -0.3,
            code_commit: 1,
        }
    }
}

fn fmt_f64(v: f64) -> String {
    // Shortest round-trip form, matching serde_json's float rendering.
    let mut buf = ryu_like(v);
    if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("NaN") {
        buf.push_str(".0");
    }
    buf
}

fn ryu_like(v: f64) -> String {
    // format! already picks a shortest representation that round-trips.
    format!("{v}")
}

fn fmt_list(xs: &[usize]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|e| TartError::InvalidConfig(format!("bad list entry {p:?}: {e}")))
        })
        .collect()
}

impl RunConfig {
    /// All keys in a stable order, as strings.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let f = fmt_f64;
        vec![
            ("env", self.env.clone()),
            ("env_file", self.env_file.clone()),
            ("variant", self.variant.clone()),
            ("seed", self.seed.to_string()),
            ("total_steps", self.total_steps.to_string()),
            ("rollout_steps", self.rollout_steps.to_string()),
            ("workers", self.workers.to_string()),
            ("eval_every", self.eval_every.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
            ("out_dir", self.out_dir.clone()),
            ("w_nce", f(self.w_nce)),
            ("w_vq", f(self.w_vq)),
            ("w_commit", f(self.w_commit)),
            ("repr_lr", f(self.repr_lr)),
            ("repr_batch", self.repr_batch.to_string()),
            ("pretrain_updates", self.pretrain_updates.to_string()),
            ("latent_dim", self.latent_dim.to_string()),
            ("enc_hidden", fmt_list(&self.enc_hidden)),
            ("window", self.window.to_string()),
            ("temperature", f(self.temperature)),
            ("num_codes", self.num_codes.to_string()),
            ("beta", f(self.beta)),
            ("hidden", fmt_list(&self.hidden)),
            ("lr", f(self.lr)),
            ("gamma", f(self.gamma)),
            ("lambda", f(self.lambda)),
            ("clip", f(self.clip)),
            ("epochs", self.epochs.to_string()),
            ("minibatch", self.minibatch.to_string()),
            ("value_coef", f(self.value_coef)),
            ("entropy_coef", f(self.entropy_coef)),
            ("logstd_init", f(self.logstd_init)),
            ("code_commit", self.code_commit.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_pairs() {
            out.push_str(&k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        macro_rules! num {
            () => {
                value.trim().parse().map_err(|e| {
                    TartError::InvalidConfig(format!("bad value for {key}: {value:?} ({e})"))
                })?
            };
        }
        match key {
            "env" => self.env = value.trim().to_string(),
            "env_file" => self.env_file = value.trim().to_string(),
            "variant" => self.variant = value.trim().to_string(),
            "seed" => self.seed = num!(),
            "total_steps" => self.total_steps = num!(),
            "rollout_steps" => self.rollout_steps = num!(),
            "workers" => self.workers = num!(),
            "eval_every" => self.eval_every = num!(),
            "eval_episodes" => self.eval_episodes = num!(),
            "checkpoint_every" => self.checkpoint_every = num!(),
            "out_dir" => self.out_dir = value.trim().to_string(),
            "w_nce" => self.w_nce = num!(),
            "w_vq" => self.w_vq = num!(),
            "w_commit" => self.w_commit = num!(),
            "repr_lr" => self.repr_lr = num!(),
            "repr_batch" => self.repr_batch = num!(),
            "pretrain_updates" => self.pretrain_updates = num!(),
            "latent_dim" => self.latent_dim = num!(),
            "enc_hidden" => self.enc_hidden = parse_list(value)?,
            "window" => self.window = num!(),
            "temperature" => self.temperature = num!(),
            "num_codes" => self.num_codes = num!(),
            "beta" => self.beta = num!(),
            "hidden" => self.hidden = parse_list(value)?,
            "lr" => self.lr = num!(),
            "gamma" => self.gamma = num!(),
            "lambda" => self.lambda = num!(),
            "clip" => self.clip = num!(),
            "epochs" => self.epochs = num!(),
            "minibatch" => self.minibatch = num!(),
            "value_coef" => self.value_coef = num!(),
            "entropy_coef" => self.entropy_coef = num!(),
            "logstd_init" => self.logstd_init = num!(),
            "code_commit" => self.code_commit = num!(),
            _ => {
                return Err(TartError::InvalidConfig(format!("unknown config key {key:?}")));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text, None)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path.parent())?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_text(&mut self, text: &str, base: Option<&Path>) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(inc) = line.strip_prefix("include ") {
                let target = match base {
                    Some(dir) => dir.join(inc.trim()),
                    None => PathBuf::from(inc.trim()),
                };
                let nested = std::fs::read_to_string(&target)?;
                self.apply_text(&nested, target.parent())?;
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                TartError::InvalidConfig(format!("line {}: expected key=value", lineno + 1))
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.env != "maze" && self.env != "combat" {
            return Err(TartError::InvalidConfig(format!("unknown env {:?}", self.env)));
        }
        if self.total_steps < 1 {
            return Err(TartError::InvalidConfig("total_steps must be >= 1".into()));
        }
        if self.w_nce < 0.0 || self.w_vq < 0.0 || self.w_commit < 0.0 {
            return Err(TartError::InvalidConfig("loss weights must be >= 0".into()));
        }
        if self.workers < 1 {
            return Err(TartError::InvalidConfig("workers must be >= 1".into()));
        }
        if self.rollout_steps < 1 || self.eval_episodes < 1 {
            return Err(TartError::InvalidConfig(
                "rollout_steps and eval_episodes must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Key diff against another config; used to verify one-key ablations.
    pub fn diff_keys(&self, other: &Self) -> Vec<String> {
        self.to_pairs()
            .into_iter()
            .zip(other.to_pairs())
            .filter(|(a, b)| a.1 != b.1)
            .map(|(a, _)| a.0)
            .collect()
    }
}

/// Stable 64-bit FNV-1a hash, used to bind checkpoints to the environment
/// they were trained on.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Hash of the environment-identity portion of a config (env kind plus the
/// layout file content when present).
pub fn env_hash(cfg: &RunConfig) -> Result<u64> {
    let mut ident = cfg.env.clone();
    if !cfg.env_file.is_empty() {
        ident.push('\n');
        ident.push_str(&std::fs::read_to_string(&cfg.env_file)?);
    }
    Ok(fnv1a(ident.as_bytes()))
}

/// Ordered key=value map form, handy for results tables.
pub fn pairs_to_map(pairs: &[(String, String)]) -> BTreeMap<String, String> {
    pairs.iter().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_losslessly() {
        let mut cfg = RunConfig::default();
        cfg.seed = 99;
        cfg.w_nce = 0.125;
        cfg.lr = 3.3e-5;
        cfg.enc_hidden = vec![32];
        cfg.env_file = "mazes/bench7.maze".into();
        let text = cfg.to_text();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn rejects_unknown_key_and_bad_value() {
        assert!(RunConfig::parse("nonsense=1\n").is_err());
        assert!(RunConfig::parse("seed=abc\n").is_err());
        assert!(RunConfig::parse("w_nce=-1\n").is_err());
        assert!(RunConfig::parse("env=warehouse\n").is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = RunConfig::parse("# comment\n\nseed=7\n").unwrap();
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn include_applies_base_then_overrides() {
        let dir = std::env::temp_dir().join(format!("tart-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("base.cfg"), "seed=5\nlr=0.001\n").unwrap();
        std::fs::write(dir.join("run.cfg"), "include base.cfg\nlr=0.01\n").unwrap();
        let cfg = RunConfig::load(dir.join("run.cfg")).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.lr, 0.01);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn diff_keys_isolates_single_change() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.w_nce = 0.0;
        assert_eq!(a.diff_keys(&b), vec!["w_nce".to_string()]);
    }
}
