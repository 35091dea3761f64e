//! Vector-quantized tactic codebook.
//!
//! Encoder outputs are snapped to their nearest codebook entry. Codes are
//! trained with the usual pair of squared-distance losses (codebook side and
//! commitment side), gradients cross the quantization step via the
//! straight-through estimator, and usage is tracked with an EMA so collapsed
//! codes can be re-seeded from recent encoder outputs.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TartError};

/// EMA usage below this counts as a dead code.
pub const DEAD_CODE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Codebook {
    /// Code vectors, `entries[k]` is the d-dim embedding of code k.
    pub entries: Vec<Vec<f64>>,
    /// Per-code EMA of usage frequency.
    pub usage_counts: Vec<f64>,
    /// Commitment loss weight beta.
    pub beta: f64,
    /// EMA decay for usage tracking.
    pub usage_decay: f64,
}

impl Codebook {
    pub fn new<R: Rng>(num_codes: usize, dim: usize, beta: f64, rng: &mut R) -> Result<Self> {
        if num_codes < 2 {
            return Err(TartError::InvalidConfig("codebook needs K_c >= 2".into()));
        }
        if beta <= 0.0 {
            return Err(TartError::InvalidConfig("beta must be > 0".into()));
        }
        let entries = (0..num_codes)
            .map(|_| (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect())
            .collect();
        Ok(Self {
            entries,
            usage_counts: vec![1.0 / num_codes as f64; num_codes],
            beta,
            usage_decay: 0.99,
        })
    }

    pub fn num_codes(&self) -> usize {
        self.entries.len()
    }

    pub fn dim(&self) -> usize {
        self.entries[0].len()
    }

    /// Folds a batch of selected indices into the usage EMA.
    pub fn update_usage(&mut self, indices: &[usize]) {
        if indices.is_empty() {
            return;
        }
        let k = self.num_codes();
        let mut freq = vec![0.0; k];
        for &i in indices {
            freq[i] += 1.0 / indices.len() as f64;
        }
        for i in 0..k {
            self.usage_counts[i] =
                self.usage_decay * self.usage_counts[i] + (1.0 - self.usage_decay) * freq[i];
        }
    }

    pub fn dead_codes(&self) -> Vec<usize> {
        (0..self.num_codes())
            .filter(|&k| self.usage_counts[k] < DEAD_CODE_THRESHOLD)
            .collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest codebook entry by Euclidean distance, lowest index on ties.
pub fn quantize(z: &[f64], cb: &Codebook) -> Result<(usize, Vec<f64>)> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(TartError::InvalidInput("non-finite encoder output".into()));
    }
    if z.len() != cb.dim() {
        return Err(TartError::DimensionMismatch {
            expected: cb.dim(),
            got: z.len(),
        });
    }
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, e) in cb.entries.iter().enumerate() {
        let d = sq_dist(z, e);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    Ok((best, cb.entries[best].clone()))
}

/// VQ loss pair: `codebook_loss = ||sg(z) - e||^2` pulls the selected code
/// toward the encoding; `commitment_loss = beta * ||z - sg(e)||^2` pulls the
/// encoding toward its code.
pub fn vq_losses(z: &[f64], e_sel: &[f64], beta: f64) -> (f64, f64) {
    let d = sq_dist(z, e_sel);
    (d, beta * d)
}

/// Gradient of `codebook_loss` w.r.t. the selected code entry.
pub fn codebook_loss_grad(z: &[f64], e_sel: &[f64]) -> Vec<f64> {
    e_sel.iter().zip(z).map(|(e, zz)| 2.0 * (e - zz)).collect()
}

/// Gradient of `commitment_loss` w.r.t. the encoder output z.
pub fn commitment_loss_grad(z: &[f64], e_sel: &[f64], beta: f64) -> Vec<f64> {
    z.iter()
        .zip(e_sel)
        .map(|(zz, e)| 2.0 * beta * (zz - e))
        .collect()
}

/// Straight-through estimator: forward value is exactly `e_sel`; any
/// downstream gradient w.r.t. the output is copied unchanged to `z`.
pub fn straight_through_forward(e_sel: &[f64]) -> Vec<f64> {
    e_sel.to_vec()
}

/// The backward half of the straight-through estimator.
pub fn straight_through_backward(dout: &[f64]) -> Vec<f64> {
    dout.to_vec()
}

/// Perplexity of the empirical code distribution plus the current dead-code
/// count. Perplexity 1 means total collapse, `K_c` means uniform usage.
pub fn codebook_metrics(indices: &[usize], cb: &Codebook) -> (f64, usize) {
    assert!(!indices.is_empty(), "codebook_metrics needs indices");
    let k = cb.num_codes();
    let mut p = vec![0.0; k];
    for &i in indices {
        p[i] += 1.0 / indices.len() as f64;
    }
    let entropy: f64 = p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum();
    (entropy.exp(), cb.dead_codes().len())
}

/// Replaces dead codes with recent encoder outputs plus small noise.
/// Returns the indices that were re-seeded; an empty pool is a warning no-op.
pub fn reinit_dead_codes<R: Rng>(
    cb: &mut Codebook,
    recent_z_pool: &[Vec<f64>],
    rng: &mut R,
) -> (Vec<usize>, bool) {
    let dead = cb.dead_codes();
    if dead.is_empty() {
        return (Vec::new(), false);
    }
    if recent_z_pool.is_empty() {
        return (Vec::new(), true);
    }
    let mean_usage = cb.usage_counts.iter().sum::<f64>() / cb.num_codes() as f64;
    let noise = Normal::new(0.0, 1e-3).unwrap();
    for &k in &dead {
        let src = &recent_z_pool[rng.gen_range(0..recent_z_pool.len())];
        cb.entries[k] = src.iter().map(|&v| v + noise.sample(rng)).collect();
        cb.usage_counts[k] = mean_usage;
    }
    (dead, false)
}
