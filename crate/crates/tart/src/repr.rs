//! Temporal action-representation learning.
//!
//! Two encoders map a resource-usage context and the maneuver window that
//! follows it onto the unit sphere. An InfoNCE loss over in-batch negatives
//! ties the two together, so the latent captures which maneuvers follow
//! which resource decisions; `ln N - loss` is the usual mutual-information
//! lower bound. The window latent is additionally quantized against the
//! tactic codebook (see [`crate::vq`]).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TartError};
use crate::nn::{normalize, normalize_backward, Act, Adam, Mlp};
use crate::pamdp::{flatten_action, ActionSpec, TrajectorySegment};
use crate::vq::{
    codebook_loss_grad, codebook_metrics, commitment_loss_grad, quantize, reinit_dead_codes,
    vq_losses, Codebook,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    /// Window length H.
    pub window: usize,
    /// InfoNCE temperature.
    pub temperature: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            hidden: vec![64, 64],
            window: 8,
            temperature: 0.1,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim < 2 {
            return Err(TartError::InvalidConfig("latent_dim must be >= 2".into()));
        }
        if self.temperature <= 0.0 {
            return Err(TartError::InvalidConfig("temperature must be > 0".into()));
        }
        if self.window < 1 {
            return Err(TartError::InvalidConfig("window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Anchor-context and maneuver-window encoders. No parameter sharing: the
/// inputs are shaped differently.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemporalEncoders {
    pub config: EncoderConfig,
    /// Width of one (state ++ flat action) row.
    pub row_dim: usize,
    pub anchor: Mlp,
    pub window: Mlp,
}

impl TemporalEncoders {
    pub fn new<R: Rng>(row_dim: usize, config: EncoderConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut anchor_sizes = vec![row_dim];
        anchor_sizes.extend(&config.hidden);
        anchor_sizes.push(config.latent_dim);
        let mut window_sizes = vec![row_dim * config.window];
        window_sizes.extend(&config.hidden);
        window_sizes.push(config.latent_dim);
        Ok(Self {
            row_dim,
            anchor: Mlp::new(anchor_sizes, Act::Tanh, rng),
            window: Mlp::new(window_sizes, Act::Tanh, rng),
            config,
        })
    }

    /// Encodes the resource-event context to a unit-norm latent.
    pub fn encode_anchor(&self, anchor_context: &[f64]) -> Result<Vec<f64>> {
        self.anchor.check_input(anchor_context)?;
        Ok(normalize(&self.anchor.forward(anchor_context)).0)
    }

    /// Encodes H flattened (state ++ action) rows to a unit-norm latent.
    /// Rows are consumed in order, so permuting them changes the output.
    pub fn encode_window(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let flat = self.flatten_window(rows)?;
        Ok(normalize(&self.window.forward(&flat)).0)
    }

    pub fn flatten_window(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        if rows.len() != self.config.window {
            return Err(TartError::DimensionMismatch {
                expected: self.config.window,
                got: rows.len(),
            });
        }
        let mut flat = Vec::with_capacity(self.row_dim * rows.len());
        for row in rows {
            if row.len() != self.row_dim {
                return Err(TartError::DimensionMismatch {
                    expected: self.row_dim,
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Ok(flat)
    }

    /// Anchor input for a segment: state ++ flattened action at the event.
    pub fn anchor_input(spec: &ActionSpec, seg: &TrajectorySegment) -> Vec<f64> {
        let (state, action) = &seg.anchor_context;
        let mut x = state.clone();
        x.extend(flatten_action(spec, action));
        x
    }

    pub fn window_rows(spec: &ActionSpec, seg: &TrajectorySegment) -> Vec<Vec<f64>> {
        seg.window
            .iter()
            .map(|(s, a)| {
                let mut row = s.clone();
                row.extend(flatten_action(spec, a));
                row
            })
            .collect()
    }
}

/// A batch of paired unit-norm embeddings; anchor i goes with positive i.
#[derive(Debug, Clone)]
pub struct ContrastiveBatch {
    pub anchors: Vec<Vec<f64>>,
    pub positives: Vec<Vec<f64>>,
}

impl ContrastiveBatch {
    pub fn validate(&self) -> Result<()> {
        let n = self.anchors.len();
        if n < 2 || self.positives.len() != n {
            return Err(TartError::InvalidInput(
                "contrastive batch needs N >= 2 paired rows".into(),
            ));
        }
        for row in self.anchors.iter().chain(&self.positives) {
            let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-5 {
                return Err(TartError::InvalidInput(format!(
                    "embedding norm {norm} not unit"
                )));
            }
        }
        Ok(())
    }
}

/// InfoNCE loss over in-batch negatives:
/// `-(1/N) sum_i log( exp(a_i.p_i/tau) / sum_j exp(a_i.p_j/tau) )`.
pub fn infonce_loss(batch: &ContrastiveBatch, temperature: f64) -> Result<f64> {
    Ok(infonce_loss_grad(batch, temperature)?.0)
}

/// InfoNCE loss plus its gradients w.r.t. the (unit-norm) anchor and
/// positive embeddings.
pub fn infonce_loss_grad(
    batch: &ContrastiveBatch,
    temperature: f64,
) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    batch.validate()?;
    if temperature <= 0.0 {
        return Err(TartError::InvalidInput("temperature must be > 0".into()));
    }
    let n = batch.anchors.len();
    let d = batch.anchors[0].len();
    let inv_tau = 1.0 / temperature;

    let mut loss = 0.0;
    let mut d_anchors = vec![vec![0.0; d]; n];
    let mut d_positives = vec![vec![0.0; d]; n];
    for i in 0..n {
        let logits: Vec<f64> = (0..n)
            .map(|j| {
                batch.anchors[i]
                    .iter()
                    .zip(&batch.positives[j])
                    .map(|(a, p)| a * p)
                    .sum::<f64>()
                    * inv_tau
            })
            .collect();
        let logp = crate::nn::log_softmax(&logits);
        loss -= logp[i] / n as f64;
        // dL/dlogit_ij = (softmax_ij - delta_ij) / N
        for j in 0..n {
            let dl = (logp[j].exp() - if i == j { 1.0 } else { 0.0 }) / n as f64 * inv_tau;
            for k in 0..d {
                d_anchors[i][k] += dl * batch.positives[j][k];
                d_positives[j][k] += dl * batch.anchors[i][k];
            }
        }
    }
    Ok((loss, d_anchors, d_positives))
}

/// Mutual-information lower bound implied by an InfoNCE loss.
pub fn mi_estimate(loss: f64, batch_size: usize) -> f64 {
    (batch_size as f64).ln() - loss
}

/// Scalars reported by one representation update.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReprStats {
    pub nce_loss: f64,
    pub mi_estimate: f64,
    pub codebook_loss: f64,
    pub commitment_loss: f64,
    pub perplexity: f64,
    pub dead_codes: usize,
    pub batch_size: usize,
}

/// Encoders, codebook and their optimizers, updated jointly on segment
/// batches with the weighted composite objective.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReprLearner {
    pub encoders: TemporalEncoders,
    pub codebook: Codebook,
    pub w_nce: f64,
    pub w_vq: f64,
    pub w_commit: f64,
    opt_anchor: Adam,
    opt_window: Adam,
    opt_codebook: Adam,
}

impl ReprLearner {
    pub fn new<R: Rng>(
        row_dim: usize,
        config: EncoderConfig,
        num_codes: usize,
        beta: f64,
        weights: (f64, f64, f64),
        lr: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let encoders = TemporalEncoders::new(row_dim, config, rng)?;
        let codebook = Codebook::new(num_codes, encoders.config.latent_dim, beta, rng)?;
        let n_anchor = encoders.anchor.n_params();
        let n_window = encoders.window.n_params();
        let n_code = num_codes * encoders.config.latent_dim;
        Ok(Self {
            encoders,
            codebook,
            w_nce: weights.0,
            w_vq: weights.1,
            w_commit: weights.2,
            opt_anchor: Adam::new(n_anchor, lr),
            opt_window: Adam::new(n_window, lr),
            opt_codebook: Adam::new(n_code, lr),
        })
    }

    /// One gradient step on a batch of segments. Returns the update stats,
    /// or `None` when the batch is too small for a contrastive update.
    pub fn update(
        &mut self,
        spec: &ActionSpec,
        segments: &[TrajectorySegment],
        rng: &mut impl Rng,
    ) -> Result<Option<ReprStats>> {
        if segments.len() < 2 {
            return Ok(None);
        }
        let n = segments.len();
        let tau = self.encoders.config.temperature;

        // Forward both encoders, keeping caches for backprop.
        let mut anchor_caches = Vec::with_capacity(n);
        let mut window_caches = Vec::with_capacity(n);
        let mut anchors = Vec::with_capacity(n);
        let mut positives = Vec::with_capacity(n);
        let mut norms_a = Vec::with_capacity(n);
        let mut norms_w = Vec::with_capacity(n);
        for seg in segments {
            let xa = TemporalEncoders::anchor_input(spec, seg);
            self.encoders.anchor.check_input(&xa)?;
            let ca = self.encoders.anchor.forward_cache(&xa);
            let (za, na) = normalize(ca.output());
            let xw = self
                .encoders
                .flatten_window(&TemporalEncoders::window_rows(spec, seg))?;
            let cw = self.encoders.window.forward_cache(&xw);
            let (zw, nw) = normalize(cw.output());
            anchor_caches.push(ca);
            window_caches.push(cw);
            anchors.push(za);
            positives.push(zw);
            norms_a.push(na);
            norms_w.push(nw);
        }

        let batch = ContrastiveBatch {
            anchors: anchors.clone(),
            positives: positives.clone(),
        };
        let (nce, mut d_anchors, mut d_positives) = infonce_loss_grad(&batch, tau)?;
        for row in d_anchors.iter_mut().chain(d_positives.iter_mut()) {
            for v in row.iter_mut() {
                *v *= self.w_nce;
            }
        }

        // Quantize window latents; commitment pulls z_m toward its code,
        // the codebook loss pulls the code toward z_m.
        let d = self.encoders.config.latent_dim;
        let mut code_grad = vec![0.0; self.codebook.num_codes() * d];
        let mut indices = Vec::with_capacity(n);
        let mut cb_loss = 0.0;
        let mut commit_loss = 0.0;
        for i in 0..n {
            let (k, e_sel) = quantize(&positives[i], &self.codebook)?;
            indices.push(k);
            let (cl, ml) = vq_losses(&positives[i], &e_sel, self.codebook.beta);
            cb_loss += cl / n as f64;
            commit_loss += ml / n as f64;
            let gc = codebook_loss_grad(&positives[i], &e_sel);
            for j in 0..d {
                code_grad[k * d + j] += self.w_vq * gc[j] / n as f64;
            }
            let gz = commitment_loss_grad(&positives[i], &e_sel, self.codebook.beta);
            for j in 0..d {
                d_positives[i][j] += self.w_commit * gz[j] / n as f64;
            }
        }

        // Backprop through the normalization and the MLPs.
        let mut grad_anchor = vec![0.0; self.encoders.anchor.n_params()];
        let mut grad_window = vec![0.0; self.encoders.window.n_params()];
        for i in 0..n {
            let da = normalize_backward(&anchors[i], norms_a[i], &d_anchors[i]);
            self.encoders
                .anchor
                .backward(&anchor_caches[i], &da, &mut grad_anchor);
            let dw = normalize_backward(&positives[i], norms_w[i], &d_positives[i]);
            self.encoders
                .window
                .backward(&window_caches[i], &dw, &mut grad_window);
        }
        self.opt_anchor
            .step(&mut self.encoders.anchor.params, &grad_anchor);
        self.opt_window
            .step(&mut self.encoders.window.params, &grad_window);

        // Codebook entries live in a flat view for Adam.
        let mut flat: Vec<f64> = self.codebook.entries.iter().flatten().copied().collect();
        self.opt_codebook.step(&mut flat, &code_grad);
        for (k, entry) in self.codebook.entries.iter_mut().enumerate() {
            entry.copy_from_slice(&flat[k * d..(k + 1) * d]);
        }

        self.codebook.update_usage(&indices);
        let (perplexity, dead) = codebook_metrics(&indices, &self.codebook);
        if dead > 0 {
            reinit_dead_codes(&mut self.codebook, &positives, rng);
        }

        Ok(Some(ReprStats {
            nce_loss: nce,
            mi_estimate: mi_estimate(nce, n),
            codebook_loss: cb_loss,
            commitment_loss: commit_loss,
            perplexity,
            dead_codes: dead,
            batch_size: n,
        }))
    }
}

/// Trains a pair of fresh encoders on raw scalar-pair samples and returns
/// the final-ish InfoNCE MI estimate (mean over the last 20 evaluations).
/// Used as the standalone mutual-information estimator harness.
pub fn train_mi_estimator(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    config: &EncoderConfig,
    steps: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> Result<f64> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    assert_eq!(xs.len(), ys.len());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let in_dim = xs[0].len();
    let mut cfg = config.clone();
    cfg.window = 1;
    let mut enc = TemporalEncoders::new(in_dim, cfg, &mut rng)?;
    let mut opt_a = Adam::new(enc.anchor.n_params(), lr);
    let mut opt_w = Adam::new(enc.window.n_params(), lr);
    let tau = enc.config.temperature;

    let mut tail = std::collections::VecDeque::with_capacity(20);
    let idx_all: Vec<usize> = (0..xs.len()).collect();
    for _ in 0..steps {
        let idx: Vec<usize> = idx_all
            .choose_multiple(&mut rng, batch_size.min(xs.len()))
            .copied()
            .collect();
        let mut caches_a = Vec::new();
        let mut caches_w = Vec::new();
        let mut za = Vec::new();
        let mut zw = Vec::new();
        let mut na = Vec::new();
        let mut nw = Vec::new();
        for &i in &idx {
            let ca = enc.anchor.forward_cache(&xs[i]);
            let (u, nn) = normalize(ca.output());
            caches_a.push(ca);
            za.push(u);
            na.push(nn);
            let cw = enc.window.forward_cache(&ys[i]);
            let (u, nn) = normalize(cw.output());
            caches_w.push(cw);
            zw.push(u);
            nw.push(nn);
        }
        let batch = ContrastiveBatch {
            anchors: za.clone(),
            positives: zw.clone(),
        };
        let (loss, d_a, d_w) = infonce_loss_grad(&batch, tau)?;
        let mut ga = vec![0.0; enc.anchor.n_params()];
        let mut gw = vec![0.0; enc.window.n_params()];
        for i in 0..idx.len() {
            let da = normalize_backward(&za[i], na[i], &d_a[i]);
            enc.anchor.backward(&caches_a[i], &da, &mut ga);
            let dw = normalize_backward(&zw[i], nw[i], &d_w[i]);
            enc.window.backward(&caches_w[i], &dw, &mut gw);
        }
        opt_a.step(&mut enc.anchor.params, &ga);
        opt_w.step(&mut enc.window.params, &gw);
        if tail.len() == 20 {
            tail.pop_front();
        }
        tail.push_back(mi_estimate(loss, idx.len()));
    }
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn encoders(seed: u64) -> TemporalEncoders {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TemporalEncoders::new(
            3,
            EncoderConfig {
                latent_dim: 4,
                hidden: vec![8],
                window: 2,
                temperature: 0.1,
            },
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn anchor_output_is_unit_norm_and_deterministic() {
        let enc = encoders(1);
        let z1 = enc.encode_anchor(&[0.3, -0.5, 0.9]).unwrap();
        let z2 = enc.encode_anchor(&[0.3, -0.5, 0.9]).unwrap();
        assert_eq!(z1, z2);
        let norm: f64 = z1.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-5);
    }

    #[test]
    fn anchor_rejects_wrong_width() {
        assert!(encoders(1).encode_anchor(&[0.0; 5]).is_err());
    }

    #[test]
    fn window_rejects_wrong_horizon() {
        let enc = encoders(1);
        assert!(enc.encode_window(&[vec![0.0; 3]]).is_err());
        assert!(enc.encode_window(&vec![vec![0.0; 3]; 3]).is_err());
    }

    #[test]
    fn window_is_order_sensitive() {
        let enc = encoders(2);
        let a = vec![1.0, 0.0, -1.0];
        let b = vec![-0.5, 2.0, 0.3];
        let fwd = enc.encode_window(&[a.clone(), b.clone()]).unwrap();
        let rev = enc.encode_window(&[b, a]).unwrap();
        let diff: f64 = fwd.iter().zip(&rev).map(|(x, y)| (x - y).abs()).sum();
        assert!(diff > 1e-6);
    }

    fn uniform_batch(n: usize, d: usize) -> ContrastiveBatch {
        // All embeddings identical: every pairwise similarity is equal.
        let row = normalize(&vec![1.0; d]).0;
        ContrastiveBatch {
            anchors: vec![row.clone(); n],
            positives: vec![row; n],
        }
    }

    #[test]
    fn infonce_uniform_similarities_is_ln_n() {
        let loss = infonce_loss(&uniform_batch(4, 3), 0.1).unwrap();
        assert!((loss - 4.0_f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn infonce_saturated_diagonal_is_near_zero() {
        // Orthogonal unit embeddings with a tiny temperature: the diagonal
        // dominates each softmax row.
        let n = 4;
        let mut anchors = Vec::new();
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            anchors.push(e);
        }
        let batch = ContrastiveBatch {
            positives: anchors.clone(),
            anchors,
        };
        let loss = infonce_loss(&batch, 0.01).unwrap();
        assert!(loss.abs() < 1e-9, "loss = {loss}");
    }

    #[test]
    fn infonce_rejects_small_or_unnormalized_batches() {
        let b = uniform_batch(1, 3);
        assert!(infonce_loss(&b, 0.1).is_err());
        let mut b = uniform_batch(4, 3);
        b.anchors[0] = vec![2.0, 0.0, 0.0];
        assert!(infonce_loss(&b, 0.1).is_err());
    }

    #[test]
    fn infonce_nonnegative_on_random_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        use rand::Rng;
        for _ in 0..200 {
            let n = rng.gen_range(2..12);
            let d = rng.gen_range(2..8);
            let mk = |rng: &mut ChaCha8Rng| {
                (0..n)
                    .map(|_| {
                        let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        normalize(&raw).0
                    })
                    .collect::<Vec<_>>()
            };
            let batch = ContrastiveBatch {
                anchors: mk(&mut rng),
                positives: mk(&mut rng),
            };
            let loss = infonce_loss(&batch, 0.2).unwrap();
            assert!(loss >= 0.0);
            assert!(mi_estimate(loss, n) <= (n as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn infonce_embedding_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        use rand::Rng;
        let n = 5;
        let d = 3;
        let raw: Vec<f64> = (0..2 * n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // Loss as a function of the raw (pre-normalization) coordinates so
        // finite differences stay on the sphere.
        let loss_fn = |flat: &[f64]| {
            let mut anchors = Vec::new();
            let mut positives = Vec::new();
            for i in 0..n {
                anchors.push(normalize(&flat[i * d..(i + 1) * d]).0);
                positives.push(normalize(&flat[(n + i) * d..(n + i + 1) * d]).0);
            }
            infonce_loss(&ContrastiveBatch { anchors, positives }, 0.3).unwrap()
        };
        let mut anchors = Vec::new();
        let mut positives = Vec::new();
        let mut norms = Vec::new();
        for i in 0..2 * n {
            let (u, nn) = normalize(&raw[i * d..(i + 1) * d]);
            if i < n {
                anchors.push(u);
            } else {
                positives.push(u);
            }
            norms.push(nn);
        }
        let batch = ContrastiveBatch {
            anchors: anchors.clone(),
            positives: positives.clone(),
        };
        let (_, d_a, d_p) = infonce_loss_grad(&batch, 0.3).unwrap();
        let mut grad = Vec::new();
        for i in 0..n {
            grad.extend(normalize_backward(&anchors[i], norms[i], &d_a[i]));
        }
        for i in 0..n {
            grad.extend(normalize_backward(&positives[i], norms[n + i], &d_p[i]));
        }
        let fd = crate::testutil::finite_diff(&raw, loss_fn);
        assert!(crate::testutil::max_rel_err(&grad, &fd) < 1e-4);
    }

    #[test]
    fn repr_learner_reduces_nce_on_correlated_data() {
        use crate::pamdp::HybridAction;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        use rand::Rng;
        let spec = ActionSpec::uniform(2, 1, -1.0, 1.0).unwrap();
        // Segments where the window deterministically mirrors the anchor
        // state, so the MI bound should become clearly positive.
        let make_segments = |rng: &mut ChaCha8Rng| {
            (0..32)
                .map(|_| {
                    let s: f64 = rng.gen_range(-1.0..1.0);
                    TrajectorySegment {
                        anchor_t: 0,
                        anchor_context: (vec![s, -s], HybridAction::new(1, vec![s])),
                        window: (0..2)
                            .map(|_| (vec![s, s * s], HybridAction::new(0, vec![-s])))
                            .collect(),
                    }
                })
                .collect::<Vec<_>>()
        };
        let mut learner = ReprLearner::new(
            2 + spec.flat_dim(),
            EncoderConfig {
                latent_dim: 8,
                hidden: vec![32],
                window: 2,
                temperature: 0.1,
            },
            4,
            0.25,
            (1.0, 1.0, 0.25),
            3e-3,
            &mut rng,
        )
        .unwrap();
        let first = learner
            .update(&spec, &make_segments(&mut rng), &mut rng)
            .unwrap()
            .unwrap();
        let mut last = first.clone();
        for _ in 0..300 {
            last = learner
                .update(&spec, &make_segments(&mut rng), &mut rng)
                .unwrap()
                .unwrap();
        }
        assert!(
            last.mi_estimate > first.mi_estimate + 0.5,
            "first {:.3}, last {:.3}",
            first.mi_estimate,
            last.mi_estimate
        );
        assert!(last.perplexity >= 1.0);
    }

    #[test]
    fn repr_learner_skips_tiny_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let spec = ActionSpec::uniform(2, 1, -1.0, 1.0).unwrap();
        let mut learner = ReprLearner::new(
            2 + spec.flat_dim(),
            EncoderConfig {
                latent_dim: 4,
                hidden: vec![8],
                window: 2,
                temperature: 0.1,
            },
            4,
            0.25,
            (1.0, 1.0, 0.25),
            1e-3,
            &mut rng,
        )
        .unwrap();
        assert!(learner.update(&spec, &[], &mut rng).unwrap().is_none());
    }
}
