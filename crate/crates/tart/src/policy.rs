//! Tactic-conditioned hybrid policy, critic, GAE and clipped-surrogate
//! updates.
//!
//! The policy factors the hybrid action as discrete resource head x tactic
//! code head x squashed-Gaussian maneuver head, with the chosen codebook
//! entry concatenated to the observation before the maneuver network. The
//! joint log-probability is the sum of the three terms; PPO ratios are taken
//! over that joint. Backprop is explicit, mirroring [`crate::nn`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TartError};
use crate::nn::{log_softmax, softmax, Act, Adam, Mlp};
use crate::pamdp::{ActionSpec, HybridAction};
use crate::vq::Codebook;

const LOGSTD_MIN: f64 = -5.0;
const LOGSTD_MAX: f64 = 2.0;
const LN_2PI: f64 = 1.8378770664093453;

/// How the maneuver head is conditioned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conditioning {
    /// Sample a tactic code from the policy's code head; condition on the
    /// selected codebook entry.
    Codebook,
    /// Deterministic continuous tactic vector (quantization bypassed).
    ContinuousTactic,
    /// No conditioning (plain hybrid PPO).
    None,
    /// Continuous latent decoded to a hybrid action (HyAR-style reduced
    /// form): argmax over the first K_d latent dims picks the discrete
    /// action, the remainder are the continuous params.
    LatentDecode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyConfig {
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
    /// Steps a sampled tactic code stays fixed (1 = re-select every step).
    pub code_commit: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
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

/// Distribution parameters plus value estimate at one observation.
#[derive(Debug, Clone)]
pub struct PolicyOutput {
    pub discrete_probs: Vec<f64>,
    pub code_probs: Vec<f64>,
    pub maneuver_mean: Vec<f64>,
    pub maneuver_logstd: Vec<f64>,
    pub value: f64,
}

/// One acting decision.
#[derive(Debug, Clone)]
pub struct ActResult {
    pub action: HybridAction,
    pub code: usize,
    /// Pre-squash maneuver sample; stored for exact re-evaluation.
    pub maneuver_u: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    Greedy,
}

/// Flat storage for one update's worth of on-policy experience.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RolloutBatch {
    pub obs: Vec<Vec<f64>>,
    pub discrete: Vec<usize>,
    pub codes: Vec<usize>,
    pub maneuver_u: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

/// Scalars reported by one PPO update.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Policy {
    pub spec: ActionSpec,
    pub obs_dim: usize,
    /// Per-component divisor applied to raw observations.
    pub obs_scale: Vec<f64>,
    pub cond: Conditioning,
    /// Width of the conditioning vector appended to the observation.
    pub cond_dim: usize,
    pub config: PolicyConfig,
    pub discrete_net: Mlp,
    /// Code logits (Codebook) or tactic vector (ContinuousTactic).
    pub code_net: Option<Mlp>,
    pub maneuver_net: Mlp,
    pub value_net: Mlp,
    pub logstd: Vec<f64>,
    opt_discrete: Adam,
    opt_code: Option<Adam>,
    opt_maneuver: Adam,
    opt_value: Adam,
    opt_logstd: Adam,
}

impl Policy {
    pub fn new<R: Rng>(
        spec: &ActionSpec,
        obs_dim: usize,
        obs_scale: Vec<f64>,
        cond: Conditioning,
        cond_dim: usize,
        num_codes: usize,
        config: PolicyConfig,
        rng: &mut R,
    ) -> Result<Self> {
        spec.validate()?;
        let p = spec.max_param_dim();
        if spec.param_dims.iter().any(|&d| d != p) {
            return Err(TartError::InvalidConfig(
                "policy requires uniform param dims across branches".into(),
            ));
        }
        if obs_scale.len() != obs_dim {
            return Err(TartError::DimensionMismatch {
                expected: obs_dim,
                got: obs_scale.len(),
            });
        }
        let mk = |in_dim: usize, out_dim: usize, rng: &mut R| {
            let mut sizes = vec![in_dim];
            sizes.extend(&config.hidden);
            sizes.push(out_dim);
            Mlp::new(sizes, Act::Tanh, rng)
        };
        let (cond_dim, code_net) = match cond {
            Conditioning::Codebook => (cond_dim, Some(mk(obs_dim, num_codes, rng))),
            Conditioning::ContinuousTactic => (cond_dim, Some(mk(obs_dim, cond_dim, rng))),
            Conditioning::None | Conditioning::LatentDecode => (0, None),
        };
        let maneuver_out = match cond {
            Conditioning::LatentDecode => spec.num_discrete + p,
            _ => p,
        };
        let discrete_net = mk(obs_dim, spec.num_discrete, rng);
        let maneuver_net = mk(obs_dim + cond_dim, maneuver_out, rng);
        let value_net = mk(obs_dim, 1, rng);
        let logstd = vec![config.logstd_init; maneuver_out];
        Ok(Self {
            opt_discrete: Adam::new(discrete_net.n_params(), config.lr),
            opt_code: code_net.as_ref().map(|n| Adam::new(n.n_params(), config.lr)),
            opt_maneuver: Adam::new(maneuver_net.n_params(), config.lr),
            opt_value: Adam::new(value_net.n_params(), config.lr),
            opt_logstd: Adam::new(logstd.len(), config.lr),
            spec: spec.clone(),
            obs_dim,
            obs_scale,
            cond,
            cond_dim,
            config,
            discrete_net,
            code_net,
            maneuver_net,
            value_net,
            logstd,
        })
    }

    fn scaled_obs(&self, obs: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != self.obs_dim {
            return Err(TartError::DimensionMismatch {
                expected: self.obs_dim,
                got: obs.len(),
            });
        }
        Ok(obs
            .iter()
            .zip(&self.obs_scale)
            .map(|(o, s)| o / s)
            .collect())
    }

    fn effective_logstd(&self) -> Vec<f64> {
        self.logstd
            .iter()
            .map(|&l| l.clamp(LOGSTD_MIN, LOGSTD_MAX))
            .collect()
    }

    /// Squash bounds per maneuver output dimension.
    fn bounds(&self, discrete: usize) -> Vec<(f64, f64)> {
        match self.cond {
            Conditioning::LatentDecode => {
                let mut b = vec![(-1.0, 1.0); self.spec.num_discrete];
                b.extend(self.spec.param_bounds[0].iter().copied());
                b
            }
            _ => self.spec.param_bounds[discrete].clone(),
        }
    }

    /// Full distribution parameters at one observation.
    pub fn policy_output(&self, obs: &[f64], codebook: Option<&Codebook>) -> Result<PolicyOutput> {
        let x = self.scaled_obs(obs)?;
        let discrete_probs = softmax(&self.discrete_net.forward(&x));
        let (code_probs, cond_vec) = self.conditioning(&x, None, codebook)?;
        let mut xm = x.clone();
        xm.extend(&cond_vec);
        let maneuver_mean = self.maneuver_net.forward(&xm);
        Ok(PolicyOutput {
            discrete_probs,
            code_probs,
            maneuver_mean,
            maneuver_logstd: self.effective_logstd(),
            value: self.value_net.forward(&x)[0],
        })
    }

    /// Resolves the code distribution and conditioning vector. When `code`
    /// is given, conditions on that code instead of the mode.
    fn conditioning(
        &self,
        x: &[f64],
        code: Option<usize>,
        codebook: Option<&Codebook>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        match self.cond {
            Conditioning::Codebook => {
                let cb = codebook.ok_or_else(|| {
                    TartError::InvalidInput("codebook required for Codebook conditioning".into())
                })?;
                let net = self.code_net.as_ref().unwrap();
                let probs = softmax(&net.forward(x));
                let k = code.unwrap_or(0);
                Ok((probs, cb.entries[k].clone()))
            }
            Conditioning::ContinuousTactic => {
                let net = self.code_net.as_ref().unwrap();
                let tactic: Vec<f64> = net.forward(x).iter().map(|v| v.tanh()).collect();
                Ok((vec![1.0], tactic))
            }
            Conditioning::None | Conditioning::LatentDecode => Ok((vec![1.0], Vec::new())),
        }
    }

    /// Samples (or takes the mode of) a hybrid action. `forced_code` keeps a
    /// previously selected tactic code for macro-step commitment.
    pub fn act<R: Rng>(
        &self,
        obs: &[f64],
        codebook: Option<&Codebook>,
        mode: ActMode,
        forced_code: Option<usize>,
        rng: &mut R,
    ) -> Result<ActResult> {
        let x = self.scaled_obs(obs)?;
        let logstd = self.effective_logstd();

        // Tactic code.
        let (code, code_logp, cond_vec) = match self.cond {
            Conditioning::Codebook => {
                let cb = codebook.ok_or_else(|| {
                    TartError::InvalidInput("codebook required for Codebook conditioning".into())
                })?;
                let logits = self.code_net.as_ref().unwrap().forward(&x);
                let logp = log_softmax(&logits);
                let k = match forced_code {
                    Some(k) => k,
                    None => match mode {
                        ActMode::Greedy => argmax(&logp),
                        ActMode::Sample => sample_categorical(&logp, rng),
                    },
                };
                (k, logp[k], cb.entries[k].clone())
            }
            Conditioning::ContinuousTactic => {
                let tactic: Vec<f64> = self
                    .code_net
                    .as_ref()
                    .unwrap()
                    .forward(&x)
                    .iter()
                    .map(|v| v.tanh())
                    .collect();
                (0, 0.0, tactic)
            }
            Conditioning::None | Conditioning::LatentDecode => (0, 0.0, Vec::new()),
        };

        // Discrete resource action.
        let (discrete, discrete_logp) = match self.cond {
            Conditioning::LatentDecode => (0, 0.0), // decoded from the latent below
            _ => {
                let logp = log_softmax(&self.discrete_net.forward(&x));
                let d = match mode {
                    ActMode::Greedy => argmax(&logp),
                    ActMode::Sample => sample_categorical(&logp, rng),
                };
                (d, logp[d])
            }
        };

        // Maneuver (or latent) head.
        let mut xm = x.clone();
        xm.extend(&cond_vec);
        let mean = self.maneuver_net.forward(&xm);
        let mut u = Vec::with_capacity(mean.len());
        for (j, &m) in mean.iter().enumerate() {
            let s = logstd[j].exp();
            u.push(match mode {
                ActMode::Greedy => m,
                ActMode::Sample => {
                    let n: f64 = rng.sample(rand_distr::StandardNormal);
                    m + s * n
                }
            });
        }
        let bounds = self.bounds(discrete);
        let squashed = squash(&u, &bounds);
        let maneuver_logp = squashed_log_prob(&u, &mean, &logstd, &bounds);

        let (action, value) = match self.cond {
            Conditioning::LatentDecode => {
                let kd = self.spec.num_discrete;
                let d = argmax(&squashed[..kd]);
                (
                    HybridAction::new(d, squashed[kd..].to_vec()),
                    self.value_net.forward(&x)[0],
                )
            }
            _ => (
                HybridAction::new(discrete, squashed),
                self.value_net.forward(&x)[0],
            ),
        };
        Ok(ActResult {
            action,
            code,
            maneuver_u: u,
            log_prob: discrete_logp + code_logp + maneuver_logp,
            value,
        })
    }

    /// Log-probabilities, entropies and values of stored decisions under the
    /// current parameters. Pure forward pass (the update path recomputes
    /// with caches internally).
    pub fn evaluate_actions(
        &self,
        batch: &RolloutBatch,
        codebook: Option<&Codebook>,
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mut log_probs = Vec::with_capacity(batch.len());
        let mut entropies = Vec::with_capacity(batch.len());
        let mut values = Vec::with_capacity(batch.len());
        for i in 0..batch.len() {
            let ev = self.eval_one(
                &batch.obs[i],
                batch.discrete[i],
                batch.codes[i],
                &batch.maneuver_u[i],
                codebook,
            )?;
            log_probs.push(ev.log_prob);
            entropies.push(ev.entropy);
            values.push(ev.value);
        }
        Ok((log_probs, entropies, values))
    }

    fn eval_one(
        &self,
        obs: &[f64],
        discrete: usize,
        code: usize,
        u: &[f64],
        codebook: Option<&Codebook>,
    ) -> Result<EvalOne> {
        let x = self.scaled_obs(obs)?;
        let logstd = self.effective_logstd();

        let (discrete_logp, discrete_entropy) = match self.cond {
            Conditioning::LatentDecode => (0.0, 0.0),
            _ => {
                let logp = log_softmax(&self.discrete_net.forward(&x));
                (logp[discrete], categorical_entropy(&logp))
            }
        };
        let (code_logp, code_entropy, cond_vec) = match self.cond {
            Conditioning::Codebook => {
                let cb = codebook.ok_or_else(|| {
                    TartError::InvalidInput("codebook required".into())
                })?;
                let logp = log_softmax(&self.code_net.as_ref().unwrap().forward(&x));
                (logp[code], categorical_entropy(&logp), cb.entries[code].clone())
            }
            Conditioning::ContinuousTactic => {
                let tactic: Vec<f64> = self
                    .code_net
                    .as_ref()
                    .unwrap()
                    .forward(&x)
                    .iter()
                    .map(|v| v.tanh())
                    .collect();
                (0.0, 0.0, tactic)
            }
            Conditioning::None | Conditioning::LatentDecode => (0.0, 0.0, Vec::new()),
        };
        let mut xm = x.clone();
        xm.extend(&cond_vec);
        let mean = self.maneuver_net.forward(&xm);
        if u.len() != mean.len() {
            return Err(TartError::DimensionMismatch {
                expected: mean.len(),
                got: u.len(),
            });
        }
        let bounds = self.bounds(discrete);
        let maneuver_logp = squashed_log_prob(u, &mean, &logstd, &bounds);
        let gauss_entropy: f64 = logstd
            .iter()
            .map(|l| l + 0.5 * (LN_2PI + 1.0))
            .sum();
        Ok(EvalOne {
            log_prob: discrete_logp + code_logp + maneuver_logp,
            entropy: discrete_entropy + code_entropy + gauss_entropy,
            value: self.value_net.forward(&x)[0],
            discrete_entropy,
            code_entropy,
        })
    }

    /// One PPO update over the batch; advantages are normalized in place.
    pub fn ppo_update<R: Rng>(
        &mut self,
        batch: &mut RolloutBatch,
        codebook: Option<&Codebook>,
        rng: &mut R,
    ) -> Result<UpdateStats> {
        if batch.is_empty() {
            return Err(TartError::InvalidInput("empty rollout batch".into()));
        }
        normalize_advantages(&mut batch.advantages);
        let n = batch.len();
        let cfg = self.config.clone();
        let mut stats = UpdateStats::default();
        let mut stat_count = 0usize;

        let mut indices: Vec<usize> = (0..n).collect();
        for _ in 0..cfg.epochs {
            shuffle(&mut indices, rng);
            for chunk in indices.chunks(cfg.minibatch.max(1)) {
                let s = self.update_minibatch(batch, chunk, codebook)?;
                stats.policy_loss += s.policy_loss;
                stats.value_loss += s.value_loss;
                stats.entropy += s.entropy;
                stats.approx_kl += s.approx_kl;
                stats.clip_fraction += s.clip_fraction;
                stat_count += 1;
            }
        }
        let c = stat_count.max(1) as f64;
        stats.policy_loss /= c;
        stats.value_loss /= c;
        stats.entropy /= c;
        stats.approx_kl /= c;
        stats.clip_fraction /= c;
        if !stats.policy_loss.is_finite() || !stats.value_loss.is_finite() {
            return Err(TartError::NonFiniteLoss(format!("{stats:?}")));
        }
        Ok(stats)
    }

    fn update_minibatch(
        &mut self,
        batch: &RolloutBatch,
        idx: &[usize],
        codebook: Option<&Codebook>,
    ) -> Result<UpdateStats> {
        let m = idx.len() as f64;
        let cfg = &self.config;
        let mut grad_discrete = vec![0.0; self.discrete_net.n_params()];
        let mut grad_code = self.code_net.as_ref().map(|n| vec![0.0; n.n_params()]);
        let mut grad_maneuver = vec![0.0; self.maneuver_net.n_params()];
        let mut grad_value = vec![0.0; self.value_net.n_params()];
        let mut grad_logstd = vec![0.0; self.logstd.len()];
        let mut stats = UpdateStats::default();

        let logstd = self.effective_logstd();
        for &i in idx {
            let x = self.scaled_obs(&batch.obs[i])?;
            let adv = batch.advantages[i];
            let u = &batch.maneuver_u[i];
            let discrete = batch.discrete[i];
            let code = batch.codes[i];

            // Forward with caches.
            let use_discrete = self.cond != Conditioning::LatentDecode;
            let discrete_cache = use_discrete.then(|| self.discrete_net.forward_cache(&x));
            let discrete_logp = discrete_cache.as_ref().map(|c| log_softmax(c.output()));
            let (code_cache, code_logp, cond_vec, tactic_raw) = match self.cond {
                Conditioning::Codebook => {
                    let cb = codebook
                        .ok_or_else(|| TartError::InvalidInput("codebook required".into()))?;
                    let c = self.code_net.as_ref().unwrap().forward_cache(&x);
                    let lp = log_softmax(c.output());
                    (Some(c), Some(lp), cb.entries[code].clone(), None)
                }
                Conditioning::ContinuousTactic => {
                    let c = self.code_net.as_ref().unwrap().forward_cache(&x);
                    let raw = c.output().to_vec();
                    let tactic: Vec<f64> = raw.iter().map(|v| v.tanh()).collect();
                    (Some(c), None, tactic, Some(raw))
                }
                _ => (None, None, Vec::new(), None),
            };
            let mut xm = x.clone();
            xm.extend(&cond_vec);
            let maneuver_cache = self.maneuver_net.forward_cache(&xm);
            let mean = maneuver_cache.output().to_vec();
            let value_cache = self.value_net.forward_cache(&x);
            let value = value_cache.output()[0];

            let bounds = self.bounds(discrete);
            let maneuver_logp = squashed_log_prob(u, &mean, &logstd, &bounds);
            let new_logp = discrete_logp.as_ref().map_or(0.0, |lp| lp[discrete])
                + code_logp.as_ref().map_or(0.0, |lp| lp[code])
                + maneuver_logp;
            let old_logp = batch.log_probs[i];
            let ratio = (new_logp - old_logp).exp();
            let clipped_ratio = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
            let unclipped = ratio * adv;
            let clipped = clipped_ratio * adv;
            let surrogate = unclipped.min(clipped);
            // Gradient flows only when the unclipped branch is active.
            let dsurr_dlogp = if unclipped <= clipped { ratio * adv } else { 0.0 };

            stats.policy_loss += -surrogate / m;
            stats.value_loss += (value - batch.value_targets[i]).powi(2) / m;
            stats.approx_kl += (old_logp - new_logp) / m;
            if (ratio - 1.0).abs() > cfg.clip {
                stats.clip_fraction += 1.0 / m;
            }

            // Loss = -surrogate + c_v * value_err^2 - c_e * entropy, averaged
            // over the minibatch. d(loss)/d(new_logp):
            let dlogp = -dsurr_dlogp / m;

            // Discrete head: d(logp[a])/dlogits = onehot - softmax, plus the
            // entropy bonus gradient.
            if let (Some(cache), Some(lp)) = (&discrete_cache, &discrete_logp) {
                let probs: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
                let h = categorical_entropy(lp);
                stats.entropy += h / m;
                let mut dlogits = vec![0.0; probs.len()];
                for k in 0..probs.len() {
                    let onehot = if k == discrete { 1.0 } else { 0.0 };
                    dlogits[k] = dlogp * (onehot - probs[k])
                        + cfg.entropy_coef / m * probs[k] * (lp[k] + h);
                }
                self.discrete_net
                    .backward(cache, &dlogits, &mut grad_discrete);
            }

            // Code head.
            match self.cond {
                Conditioning::Codebook => {
                    let cache = code_cache.as_ref().unwrap();
                    let lp = code_logp.as_ref().unwrap();
                    let probs: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
                    let h = categorical_entropy(lp);
                    stats.entropy += h / m;
                    let mut dlogits = vec![0.0; probs.len()];
                    for k in 0..probs.len() {
                        let onehot = if k == code { 1.0 } else { 0.0 };
                        dlogits[k] = dlogp * (onehot - probs[k])
                            + cfg.entropy_coef / m * probs[k] * (lp[k] + h);
                    }
                    self.code_net.as_ref().unwrap().backward(
                        cache,
                        &dlogits,
                        grad_code.as_mut().unwrap(),
                    );
                }
                Conditioning::ContinuousTactic => {
                    // Gradient reaches the tactic network through the
                    // maneuver net's input; handled below.
                }
                _ => {}
            }

            // Maneuver head: logp gradient w.r.t. mean and logstd, entropy
            // bonus w.r.t. logstd.
            let mut dmean = vec![0.0; mean.len()];
            for j in 0..mean.len() {
                let s = logstd[j].exp();
                let z = (u[j] - mean[j]) / s;
                dmean[j] = dlogp * (z / s);
                let dlogstd_logp = dlogp * (z * z - 1.0);
                let dlogstd_entropy = -cfg.entropy_coef / m; // dH/dlogstd = 1
                let within = self.logstd[j] > LOGSTD_MIN && self.logstd[j] < LOGSTD_MAX;
                if within {
                    grad_logstd[j] += dlogstd_logp + dlogstd_entropy;
                }
            }
            stats.entropy += logstd
                .iter()
                .map(|l| l + 0.5 * (LN_2PI + 1.0))
                .sum::<f64>()
                / m;
            let dxm = self
                .maneuver_net
                .backward(&maneuver_cache, &dmean, &mut grad_maneuver);
            if self.cond == Conditioning::ContinuousTactic {
                let raw = tactic_raw.as_ref().unwrap();
                let dcond = &dxm[self.obs_dim..];
                let dtactic_raw: Vec<f64> = dcond
                    .iter()
                    .zip(raw)
                    .map(|(d, r)| d * (1.0 - r.tanh() * r.tanh()))
                    .collect();
                self.code_net.as_ref().unwrap().backward(
                    code_cache.as_ref().unwrap(),
                    &dtactic_raw,
                    grad_code.as_mut().unwrap(),
                );
            }

            // Value head.
            let dvalue = 2.0 * cfg.value_coef * (value - batch.value_targets[i]) / m;
            self.value_net
                .backward(&value_cache, &[dvalue], &mut grad_value);
        }

        self.opt_discrete
            .step(&mut self.discrete_net.params, &grad_discrete);
        if let (Some(net), Some(opt), Some(g)) = (
            self.code_net.as_mut(),
            self.opt_code.as_mut(),
            grad_code.as_ref(),
        ) {
            opt.step(&mut net.params, g);
        }
        self.opt_maneuver
            .step(&mut self.maneuver_net.params, &grad_maneuver);
        self.opt_value.step(&mut self.value_net.params, &grad_value);
        self.opt_logstd.step(&mut self.logstd, &grad_logstd);
        Ok(stats)
    }
}

struct EvalOne {
    log_prob: f64,
    entropy: f64,
    value: f64,
    #[allow(dead_code)]
    discrete_entropy: f64,
    #[allow(dead_code)]
    code_entropy: f64,
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn sample_categorical<R: Rng>(log_probs: &[f64], rng: &mut R) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if r < acc {
            return i;
        }
    }
    log_probs.len() - 1
}

fn categorical_entropy(log_probs: &[f64]) -> f64 {
    -log_probs.iter().map(|lp| lp.exp() * lp).sum::<f64>()
}

/// Maps pre-squash samples to the bounded interval via tanh + affine.
pub fn squash(u: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    u.iter()
        .zip(bounds)
        .map(|(&x, &(lo, hi))| lo + (x.tanh() + 1.0) * 0.5 * (hi - lo))
        .collect()
}

/// Log-density of the squashed action expressed through its pre-squash
/// sample u, with the exact tanh and affine corrections.
pub fn squashed_log_prob(u: &[f64], mean: &[f64], logstd: &[f64], bounds: &[(f64, f64)]) -> f64 {
    let mut lp = 0.0;
    for j in 0..u.len() {
        let s = logstd[j].exp();
        let z = (u[j] - mean[j]) / s;
        lp += -0.5 * z * z - logstd[j] - 0.5 * LN_2PI;
        // log(1 - tanh(u)^2) = 2 (ln 2 - u - softplus(-2u))
        lp -= 2.0 * ((2.0_f64).ln() - u[j] - softplus(-2.0 * u[j]));
        lp -= ((bounds[j].1 - bounds[j].0) * 0.5).ln();
    }
    lp
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// In-place Fisher-Yates shuffle driven by the caller's RNG.
fn shuffle<R: Rng>(xs: &mut [usize], rng: &mut R) {
    for i in (1..xs.len()).rev() {
        let j = rng.gen_range(0..=i);
        xs.swap(i, j);
    }
}

fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for a in adv.iter_mut() {
        *a = (*a - mean) / std;
    }
}

/// Generalized advantage estimation with bootstrap cut at done flags.
/// `last_value` bootstraps the final step when the rollout was truncated
/// mid-episode. Returns (advantages, value_targets).
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
    last_value: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n);
    assert_eq!(dones.len(), n);
    let mut advantages = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let (next_value, not_done) = if dones[t] {
            (0.0, 0.0)
        } else if t + 1 < n {
            (values[t + 1], 1.0)
        } else {
            (last_value, 1.0)
        };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        next_adv = delta + gamma * lambda * not_done * next_adv;
        advantages[t] = next_adv;
    }
    let targets = advantages
        .iter()
        .zip(values)
        .map(|(a, v)| a + v)
        .collect();
    (advantages, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_policy(cond: Conditioning, seed: u64) -> (Policy, Codebook) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = ActionSpec::uniform(2, 1, -1.0, 1.0).unwrap();
        let cb = Codebook::new(2, 3, 0.25, &mut rng).unwrap();
        let policy = Policy::new(
            &spec,
            4,
            vec![1.0; 4],
            cond,
            3,
            2,
            PolicyConfig {
                hidden: vec![8],
                minibatch: 16,
                ..Default::default()
            },
            &mut rng,
        )
        .unwrap();
        (policy, cb)
    }

    fn obs() -> Vec<f64> {
        vec![0.3, -0.2, 0.8, 0.1]
    }

    #[test]
    fn greedy_is_deterministic() {
        let (p, cb) = tiny_policy(Conditioning::Codebook, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = p
            .act(&obs(), Some(&cb), ActMode::Greedy, None, &mut rng)
            .unwrap();
        let b = p
            .act(&obs(), Some(&cb), ActMode::Greedy, None, &mut rng)
            .unwrap();
        assert_eq!(a.action, b.action);
        assert_eq!(a.code, b.code);
        assert_eq!(a.log_prob, b.log_prob);
    }

    #[test]
    fn sampled_actions_stay_in_bounds() {
        for cond in [
            Conditioning::Codebook,
            Conditioning::None,
            Conditioning::ContinuousTactic,
            Conditioning::LatentDecode,
        ] {
            let (p, cb) = tiny_policy(cond, 2);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..10_000 {
                let r = p
                    .act(&obs(), Some(&cb), ActMode::Sample, None, &mut rng)
                    .unwrap();
                let (_, clipped) =
                    crate::pamdp::validate_action(&p.spec, &r.action).unwrap();
                assert!(!clipped, "{cond:?} produced out-of-bounds params");
            }
        }
    }

    #[test]
    fn evaluate_matches_act_log_prob() {
        for cond in [
            Conditioning::Codebook,
            Conditioning::None,
            Conditioning::ContinuousTactic,
        ] {
            let (p, cb) = tiny_policy(cond, 3);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..50 {
                let r = p
                    .act(&obs(), Some(&cb), ActMode::Sample, None, &mut rng)
                    .unwrap();
                let batch = RolloutBatch {
                    obs: vec![obs()],
                    discrete: vec![r.action.discrete],
                    codes: vec![r.code],
                    maneuver_u: vec![r.maneuver_u.clone()],
                    log_probs: vec![r.log_prob],
                    ..Default::default()
                };
                let (lp, _, v) = p.evaluate_actions(&batch, Some(&cb)).unwrap();
                assert!((lp[0] - r.log_prob).abs() < 1e-6);
                assert!((v[0] - r.value).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn uniform_discrete_head_entropy_is_ln_2() {
        let (mut p, cb) = tiny_policy(Conditioning::Codebook, 4);
        // Zero the discrete net so logits are uniform, and the code net so
        // the code term is ln K_c.
        for w in p.discrete_net.params.iter_mut() {
            *w = 0.0;
        }
        for w in p.code_net.as_mut().unwrap().params.iter_mut() {
            *w = 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = p
            .act(&obs(), Some(&cb), ActMode::Sample, None, &mut rng)
            .unwrap();
        let batch = RolloutBatch {
            obs: vec![obs()],
            discrete: vec![r.action.discrete],
            codes: vec![r.code],
            maneuver_u: vec![r.maneuver_u],
            log_probs: vec![r.log_prob],
            ..Default::default()
        };
        let (_, ent, _) = p.evaluate_actions(&batch, Some(&cb)).unwrap();
        let gauss: f64 = p
            .effective_logstd()
            .iter()
            .map(|l| l + 0.5 * (LN_2PI + 1.0))
            .sum();
        let expected = 2.0_f64.ln() + 2.0_f64.ln() + gauss;
        assert!((ent[0] - expected).abs() < 1e-9);
    }

    #[test]
    fn discrete_marginal_is_normalized() {
        let (p, cb) = tiny_policy(Conditioning::Codebook, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = p
            .act(&obs(), Some(&cb), ActMode::Sample, None, &mut rng)
            .unwrap();
        // Hold code and maneuver fixed; sum the discrete component over K_d.
        let mut total = 0.0;
        let mut rest = 0.0;
        for d in 0..p.spec.num_discrete {
            let batch = RolloutBatch {
                obs: vec![obs()],
                discrete: vec![d],
                codes: vec![r.code],
                maneuver_u: vec![r.maneuver_u.clone()],
                log_probs: vec![0.0],
                ..Default::default()
            };
            let (lp, _, _) = p.evaluate_actions(&batch, Some(&cb)).unwrap();
            // Subtract the shared code+maneuver part by evaluating d=0 once.
            if d == 0 {
                let out = p.policy_output(&obs(), Some(&cb)).unwrap();
                rest = lp[0] - out.discrete_probs[0].ln();
            }
            total += (lp[0] - rest).exp();
        }
        assert!((total - 1.0).abs() < 1e-6, "total = {total}");
    }

    #[test]
    fn gae_telescoping_and_td0() {
        let (adv, targets) =
            gae_advantages(&[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0], &[false, false, true], 1.0, 1.0, 0.0);
        assert_eq!(adv, vec![3.0, 2.0, 1.0]);
        assert_eq!(targets, vec![3.0, 2.0, 1.0]);

        let (adv, _) = gae_advantages(
            &[1.0, 2.0],
            &[0.5, 0.25],
            &[false, true],
            0.9,
            0.0,
            123.0,
        );
        assert!((adv[0] - (1.0 + 0.9 * 0.25 - 0.5)).abs() < 1e-12);
        assert!((adv[1] - (2.0 - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn gae_done_cuts_bootstrap() {
        let (adv, _) = gae_advantages(&[1.0], &[0.3], &[true], 0.99, 0.0, 55.0);
        assert!((adv[0] - (1.0 - 0.3)).abs() < 1e-12);
    }

    fn collect_batch(
        p: &Policy,
        cb: &Codebook,
        n: usize,
        reward_fn: impl Fn(&ActResult) -> f64,
        rng: &mut ChaCha8Rng,
    ) -> RolloutBatch {
        let mut b = RolloutBatch::default();
        for _ in 0..n {
            let r = p
                .act(&obs(), Some(cb), ActMode::Sample, None, rng)
                .unwrap();
            b.obs.push(obs());
            b.discrete.push(r.action.discrete);
            b.codes.push(r.code);
            b.maneuver_u.push(r.maneuver_u.clone());
            b.log_probs.push(r.log_prob);
            b.rewards.push(reward_fn(&r));
            b.values.push(r.value);
            b.dones.push(true);
        }
        let (adv, targets) = gae_advantages(&b.rewards, &b.values, &b.dones, 1.0, 1.0, 0.0);
        b.advantages = adv;
        b.value_targets = targets;
        b
    }

    #[test]
    fn same_params_means_unit_ratio_and_zero_clip() {
        let (mut p, cb) = tiny_policy(Conditioning::Codebook, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut batch = collect_batch(&p, &cb, 64, |_| 0.0, &mut rng);
        // First minibatch sees unchanged params: clip fraction must be 0.
        p.config.epochs = 1;
        p.config.minibatch = 64;
        let stats = p.ppo_update(&mut batch, Some(&cb), &mut rng).unwrap();
        assert!(stats.clip_fraction.abs() < 1e-12);
        assert!(stats.approx_kl.abs() < 1e-9);
    }

    #[test]
    fn positive_advantage_increases_action_probability() {
        let (mut p, cb) = tiny_policy(Conditioning::Codebook, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = p
            .act(&obs(), Some(&cb), ActMode::Sample, None, &mut rng)
            .unwrap();
        let mut batch = RolloutBatch {
            obs: vec![obs()],
            discrete: vec![r.action.discrete],
            codes: vec![r.code],
            maneuver_u: vec![r.maneuver_u.clone()],
            log_probs: vec![r.log_prob],
            rewards: vec![1.0],
            values: vec![0.0],
            dones: vec![true],
            advantages: vec![1.0],
            value_targets: vec![1.0],
        };
        // Advantage normalization with a single sample zeroes the mean, so
        // run the single gradient step manually on raw advantage.
        p.config.epochs = 1;
        p.config.minibatch = 1;
        p.config.entropy_coef = 0.0;
        let before = p.evaluate_actions(&batch, Some(&cb)).unwrap().0[0];
        p.update_minibatch(&batch, &[0], Some(&cb)).unwrap();
        let after = p.evaluate_actions(&batch, Some(&cb)).unwrap().0[0];
        assert!(after >= before, "logp fell from {before} to {after}");
        batch.advantages = vec![1.0];
        let _ = &batch;
    }

    #[test]
    fn zero_advantage_leaves_policy_gradient_zero() {
        let (mut p, cb) = tiny_policy(Conditioning::Codebook, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut batch = collect_batch(&p, &cb, 32, |_| 0.0, &mut rng);
        batch.advantages = vec![0.0; 32];
        batch.value_targets = batch.values.clone();
        p.config.entropy_coef = 0.0;
        p.config.epochs = 1;
        p.config.minibatch = 32;
        let discrete_before = p.discrete_net.params.clone();
        // Advantages are all zero, value targets equal values: every
        // gradient is exactly zero and Adam must not move any parameter.
        let stats = p.ppo_update(&mut batch, Some(&cb), &mut rng).unwrap();
        assert!(stats.policy_loss.abs() < 1e-12);
        assert_eq!(p.discrete_net.params, discrete_before);
    }

    /// Full-parameter finite-difference check of the PPO minibatch loss.
    #[test]
    fn ppo_loss_gradients_match_finite_differences() {
        let (p, cb) = tiny_policy(Conditioning::Codebook, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut batch = collect_batch(&p, &cb, 4, |_| 1.0, &mut rng);
        batch.advantages = vec![0.7, -0.3, 1.2, 0.1];
        batch.value_targets = vec![0.5, -0.5, 0.2, 0.0];

        // Scalar loss replicated exactly as update_minibatch computes it.
        let loss_for = |p: &Policy| -> f64 {
            let cfg = &p.config;
            let logstd = p.effective_logstd();
            let mut total = 0.0;
            let m = batch.len() as f64;
            for i in 0..batch.len() {
                let x = p.scaled_obs(&batch.obs[i]).unwrap();
                let dlp = log_softmax(&p.discrete_net.forward(&x));
                let clp = log_softmax(&p.code_net.as_ref().unwrap().forward(&x));
                let mut xm = x.clone();
                xm.extend(cb.entries[batch.codes[i]].clone());
                let mean = p.maneuver_net.forward(&xm);
                let bounds = p.bounds(batch.discrete[i]);
                let lp = dlp[batch.discrete[i]]
                    + clp[batch.codes[i]]
                    + squashed_log_prob(&batch.maneuver_u[i], &mean, &logstd, &bounds);
                let ratio = (lp - batch.log_probs[i]).exp();
                let adv = batch.advantages[i];
                let surr = (ratio * adv).min(ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * adv);
                let value = p.value_net.forward(&x)[0];
                let h = categorical_entropy(&dlp)
                    + categorical_entropy(&clp)
                    + logstd.iter().map(|l| l + 0.5 * (LN_2PI + 1.0)).sum::<f64>();
                total += (-surr
                    + cfg.value_coef * (value - batch.value_targets[i]).powi(2)
                    - cfg.entropy_coef * h)
                    / m;
            }
            total
        };

        // Analytic gradients from one minibatch pass (Adam not applied).
        let mut probe = p.clone();
        probe.opt_discrete = Adam::new(probe.discrete_net.n_params(), 0.0);
        probe.opt_code = Some(Adam::new(probe.code_net.as_ref().unwrap().n_params(), 0.0));
        probe.opt_maneuver = Adam::new(probe.maneuver_net.n_params(), 0.0);
        probe.opt_value = Adam::new(probe.value_net.n_params(), 0.0);
        probe.opt_logstd = Adam::new(probe.logstd.len(), 0.0);
        // Reconstruct gradients by diffing Adam-free params is impossible;
        // instead re-derive them with finite differences on each net.
        for (name, extract) in [
            ("discrete", 0usize),
            ("code", 1),
            ("maneuver", 2),
            ("value", 3),
            ("logstd", 4),
        ] {
            let base = match extract {
                0 => p.discrete_net.params.clone(),
                1 => p.code_net.as_ref().unwrap().params.clone(),
                2 => p.maneuver_net.params.clone(),
                3 => p.value_net.params.clone(),
                _ => p.logstd.clone(),
            };
            let fd = crate::testutil::finite_diff(&base, |vals| {
                let mut q = p.clone();
                match extract {
                    0 => q.discrete_net.params = vals.to_vec(),
                    1 => q.code_net.as_mut().unwrap().params = vals.to_vec(),
                    2 => q.maneuver_net.params = vals.to_vec(),
                    3 => q.value_net.params = vals.to_vec(),
                    _ => q.logstd = vals.to_vec(),
                }
                loss_for(&q)
            });
            // Analytic side: capture gradients via a single SGD-like probe.
            let mut q = p.clone();
            let analytic = grad_probe(&mut q, &batch, &cb, extract);
            assert!(
                crate::testutil::max_rel_err(&analytic, &fd) < 1e-4,
                "{name} gradient mismatch"
            );
        }
    }

    /// Runs update_minibatch with optimizers replaced by plain recorders and
    /// returns the gradient of the requested parameter group.
    fn grad_probe(
        p: &mut Policy,
        batch: &RolloutBatch,
        cb: &Codebook,
        group: usize,
    ) -> Vec<f64> {
        // Plain SGD with lr so small Adam's moment history is irrelevant:
        // run with lr = h and recover grad = (before - after) / h is too
        // lossy; instead temporarily expose gradients by zero-lr Adam and
        // capturing m (first moment equals 0.1 * grad after one step).
        let set_lr = |a: &mut Adam| {
            a.lr = 0.0;
            a.t = 0;
            a.m.iter_mut().for_each(|x| *x = 0.0);
            a.v.iter_mut().for_each(|x| *x = 0.0);
        };
        set_lr(&mut p.opt_discrete);
        if let Some(o) = p.opt_code.as_mut() {
            set_lr(o);
        }
        set_lr(&mut p.opt_maneuver);
        set_lr(&mut p.opt_value);
        set_lr(&mut p.opt_logstd);
        let idx: Vec<usize> = (0..batch.len()).collect();
        p.update_minibatch(batch, &idx, Some(cb)).unwrap();
        let m = match group {
            0 => &p.opt_discrete.m,
            1 => &p.opt_code.as_ref().unwrap().m,
            2 => &p.opt_maneuver.m,
            3 => &p.opt_value.m,
            _ => &p.opt_logstd.m,
        };
        // After one Adam step with zero lr, m = (1 - beta1) * grad.
        m.iter().map(|x| x / 0.1).collect()
    }

    #[test]
    fn bandit_conditioning_separates_codes() {
        // Two fixed opposite codes; reward +a for code 1, -a for code 0.
        // After training, the maneuver means conditioned on each code must
        // sit on opposite sides with a clear margin.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec = ActionSpec::uniform(1, 1, -1.0, 1.0).unwrap();
        let mut cb = Codebook::new(2, 2, 0.25, &mut rng).unwrap();
        cb.entries = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let mut p = Policy::new(
            &spec,
            1,
            vec![1.0],
            Conditioning::Codebook,
            2,
            2,
            PolicyConfig {
                hidden: vec![16],
                lr: 3e-3,
                epochs: 2,
                minibatch: 64,
                entropy_coef: 0.02,
                ..Default::default()
            },
            &mut rng,
        )
        .unwrap();
        let o = vec![0.0];
        for _ in 0..200 {
            let mut b = RolloutBatch::default();
            for _ in 0..64 {
                let r = p.act(&o, Some(&cb), ActMode::Sample, None, &mut rng).unwrap();
                let reward = if r.code == 0 {
                    r.action.params[0]
                } else {
                    -r.action.params[0]
                };
                b.obs.push(o.clone());
                b.discrete.push(0);
                b.codes.push(r.code);
                b.maneuver_u.push(r.maneuver_u.clone());
                b.log_probs.push(r.log_prob);
                b.rewards.push(reward);
                b.values.push(r.value);
                b.dones.push(true);
            }
            let (adv, tgt) = gae_advantages(&b.rewards, &b.values, &b.dones, 1.0, 1.0, 0.0);
            b.advantages = adv;
            b.value_targets = tgt;
            p.ppo_update(&mut b, Some(&cb), &mut rng).unwrap();
        }
        let mean_for = |code: usize| {
            let x = p.scaled_obs(&o).unwrap();
            let mut xm = x;
            xm.extend(cb.entries[code].clone());
            squash(&p.maneuver_net.forward(&xm), &p.bounds(0))[0]
        };
        let m0 = mean_for(0);
        let m1 = mean_for(1);
        assert!(
            (m0 - m1).abs() > 0.5,
            "code-conditioned means too close: {m0} vs {m1}"
        );
        assert!(m0 > m1, "code 0 should prefer +1, got {m0} vs {m1}");
    }
}
