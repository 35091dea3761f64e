//! Training loop: rollout collection, representation update, PPO update,
//! periodic evaluation and checkpointing.
//!
//! All randomness derives from the run seed. With workers=1 the loop is
//! strictly single-threaded and the metrics log is byte-reproducible;
//! wall-clock timing goes to a separate file so the log stays comparable.

use std::io::Write as _;
use std::path::PathBuf;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{build_variant, Agent};
use crate::env::Environment;
use crate::error::{Result, TartError};
use crate::harness::checkpoint::{Checkpoint, RngState, CHECKPOINT_VERSION};
use crate::harness::config::{env_hash, RunConfig};
use crate::harness::evaluate::greedy_episodes;
use crate::harness::{make_env, obs_scale};
use crate::pamdp::{extract_segments, Transition};
use crate::policy::{gae_advantages, ActMode, Conditioning, Policy, RolloutBatch};
use crate::repr::ReprStats;
use crate::vq::Codebook;

/// One line of the metrics log. Optional fields are omitted when a variant
/// does not produce them, so downstream plotting can detect missing columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub update: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eval_return_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eval_return_std: Option<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nce_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mi_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub codebook_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub commitment_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub perplexity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dead_codes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub code_usage: Option<Vec<f64>>,
    /// Weighted composite objective: PPO terms plus representation terms.
    pub total_loss: f64,
}

#[derive(Debug)]
pub struct TrainArtifacts {
    pub out_dir: PathBuf,
    pub metrics: Vec<MetricsRecord>,
    pub final_checkpoint: PathBuf,
    pub env_steps: u64,
}

/// Per-worker rollout state persisting across updates so episodes span
/// rollout boundaries correctly.
struct WorkerState {
    env: Box<dyn Environment>,
    obs: Vec<f64>,
    /// (code, remaining commitment steps) while a tactic code is held.
    committed: Option<(usize, usize)>,
    act_rng: ChaCha8Rng,
    seed_rng: ChaCha8Rng,
}

struct WorkerYield {
    batch: RolloutBatch,
    traj: Vec<Transition>,
}

fn collect_rollout(
    policy: &Policy,
    codebook: Option<&Codebook>,
    w: &mut WorkerState,
    steps: usize,
    gamma: f64,
    lambda: f64,
) -> Result<WorkerYield> {
    let mut batch = RolloutBatch::default();
    let mut traj = Vec::with_capacity(steps);
    let commit_len = policy.config.code_commit.max(1);
    for _ in 0..steps {
        let forced = w.committed.and_then(|(code, left)| (left > 0).then_some(code));
        let r = policy.act(&w.obs, codebook, ActMode::Sample, forced, &mut w.act_rng)?;
        w.committed = match w.committed {
            Some((code, left)) if left > 0 => Some((code, left - 1)),
            _ => Some((r.code, commit_len - 1)),
        };
        let outcome = w.env.step(&r.action);
        batch.obs.push(w.obs.clone());
        batch.discrete.push(r.action.discrete);
        batch.codes.push(r.code);
        batch.maneuver_u.push(r.maneuver_u);
        batch.log_probs.push(r.log_prob);
        batch.rewards.push(outcome.reward);
        batch.values.push(r.value);
        batch.dones.push(outcome.done);
        traj.push(Transition {
            state: w.obs.clone(),
            action: r.action,
            reward: outcome.reward,
            next_state: outcome.obs.clone(),
            done: outcome.done,
            info: outcome.info,
        });
        if outcome.done {
            let seed = w.seed_rng.next_u64();
            w.obs = w.env.reset(seed);
            w.committed = None;
        } else {
            w.obs = outcome.obs;
        }
    }
    let last_value = if *batch.dones.last().unwrap_or(&true) {
        0.0
    } else {
        policy.policy_output(&w.obs, codebook)?.value
    };
    let (adv, targets) = gae_advantages(
        &batch.rewards,
        &batch.values,
        &batch.dones,
        gamma,
        lambda,
        last_value,
    );
    batch.advantages = adv;
    batch.value_targets = targets;
    Ok(WorkerYield { batch, traj })
}

fn merge_batches(parts: Vec<RolloutBatch>) -> RolloutBatch {
    let mut out = RolloutBatch::default();
    for mut p in parts {
        out.obs.append(&mut p.obs);
        out.discrete.append(&mut p.discrete);
        out.codes.append(&mut p.codes);
        out.maneuver_u.append(&mut p.maneuver_u);
        out.log_probs.append(&mut p.log_probs);
        out.rewards.append(&mut p.rewards);
        out.values.append(&mut p.values);
        out.dones.append(&mut p.dones);
        out.advantages.append(&mut p.advantages);
        out.value_targets.append(&mut p.value_targets);
    }
    out
}

fn codebook_of(agent: &Agent) -> Option<&Codebook> {
    if agent.policy.cond == Conditioning::Codebook {
        agent.repr.as_ref().map(|r| &r.codebook)
    } else {
        None
    }
}

/// Composite objective value for reporting: the PPO surrogate terms plus
/// the weighted representation terms (zero when absent).
pub fn composite_loss(
    policy_loss: f64,
    value_loss: f64,
    entropy: f64,
    value_coef: f64,
    entropy_coef: f64,
    repr: Option<(&ReprStats, f64, f64, f64)>,
) -> f64 {
    let mut total = policy_loss + value_coef * value_loss - entropy_coef * entropy;
    if let Some((s, w_nce, w_vq, w_commit)) = repr {
        total += w_nce * s.nce_loss + w_vq * s.codebook_loss + w_commit * s.commitment_loss;
    }
    total
}

pub fn train(cfg: &RunConfig) -> Result<TrainArtifacts> {
    cfg.validate()?;
    let out_dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join("config.txt"), cfg.to_text())?;
    let t_start = std::time::Instant::now();

    let probe = make_env(cfg)?;
    let spec = probe.action_spec().clone();
    let obs_dim = probe.obs_dim();
    let scale = obs_scale(cfg, &*probe)?;
    let resource_ids = probe.resource_ids();
    drop(probe);

    // Deterministic RNG tree rooted at the run seed.
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut init_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
    let mut sample_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
    let eval_seed_base = master.next_u64();

    let mut agent = build_variant(cfg, &spec, obs_dim, scale, &mut init_rng)?;

    let mut workers = Vec::with_capacity(cfg.workers);
    for _ in 0..cfg.workers {
        let mut env = make_env(cfg)?;
        let mut seed_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        let act_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        let first = seed_rng.next_u64();
        let obs = env.reset(first);
        workers.push(WorkerState {
            env,
            obs,
            committed: None,
            act_rng,
            seed_rng,
        });
    }
    let mut eval_env = make_env(cfg)?;

    let per_worker = (cfg.rollout_steps / cfg.workers).max(1);
    let rollout_total = (per_worker * cfg.workers) as u64;
    let updates = (cfg.total_steps / rollout_total) as usize;

    let metrics_path = out_dir.join("metrics.jsonl");
    let mut metrics_file = std::fs::File::create(&metrics_path)?;
    let mut metrics = Vec::new();
    let mut env_steps: u64 = 0;

    let save_ckpt = |agent: &Agent,
                     env_steps: u64,
                     update: usize,
                     sample_rng: &ChaCha8Rng,
                     workers: &[WorkerState],
                     name: &str|
     -> Result<PathBuf> {
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            config: cfg.clone(),
            env_hash: env_hash(cfg)?,
            env_steps,
            update,
            eval_seed_base,
            agent: agent.clone(),
            sample_rng: RngState::capture(sample_rng),
            env_seed_rngs: workers.iter().map(|w| RngState::capture(&w.seed_rng)).collect(),
        };
        let path = out_dir.join(name);
        ckpt.save(&path)?;
        Ok(path)
    };

    for update in 0..updates {
        // Rollout phase. workers=1 runs inline on this thread; otherwise
        // each worker collects on its own thread against a shared read-only
        // view of the policy, and results merge in worker order.
        let yields: Vec<WorkerYield> = if cfg.workers == 1 {
            vec![collect_rollout(
                &agent.policy,
                codebook_of(&agent),
                &mut workers[0],
                per_worker,
                cfg.gamma,
                cfg.lambda,
            )?]
        } else {
            let policy = &agent.policy;
            let codebook = codebook_of(&agent);
            let results: Vec<Result<WorkerYield>> = std::thread::scope(|scope| {
                let handles: Vec<_> = workers
                    .iter_mut()
                    .map(|w| {
                        scope.spawn(move || {
                            collect_rollout(policy, codebook, w, per_worker, cfg.gamma, cfg.lambda)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("rollout worker panicked"))
                    .collect()
            });
            results.into_iter().collect::<Result<Vec<_>>>()?
        };
        env_steps += rollout_total;

        // Representation update on resource-anchored segments.
        let mut repr_stats: Option<ReprStats> = None;
        if let Some(repr) = agent.repr.as_mut() {
            let mut segments = Vec::new();
            for y in &yields {
                segments.extend(extract_segments(&y.traj, cfg.window, &resource_ids));
            }
            if segments.len() > cfg.repr_batch {
                // Deterministic subsample: partial Fisher-Yates prefix.
                for i in 0..cfg.repr_batch {
                    let j = sample_rng.gen_range(i..segments.len());
                    segments.swap(i, j);
                }
                segments.truncate(cfg.repr_batch);
            }
            repr_stats = repr.update(&spec, &segments, &mut sample_rng)?;
        }

        // Policy update (skipped while pretraining the representation).
        let mut batch = merge_batches(yields.into_iter().map(|y| y.batch).collect());
        let code_usage = if agent.policy.cond == Conditioning::Codebook {
            let mut hist = vec![0.0; cfg.num_codes];
            for &c in &batch.codes {
                hist[c] += 1.0 / batch.len() as f64;
            }
            Some(hist)
        } else {
            None
        };
        let stats = if update >= cfg.pretrain_updates {
            let codebook_snapshot = codebook_of(&agent).cloned();
            match agent
                .policy
                .ppo_update(&mut batch, codebook_snapshot.as_ref(), &mut sample_rng)
            {
                Ok(s) => s,
                Err(e @ TartError::NonFiniteLoss(_)) => {
                    save_ckpt(&agent, env_steps, update, &sample_rng, &workers, "checkpoint_abort.json")?;
                    return Err(e);
                }
                Err(e) => return Err(e),
            }
        } else {
            Default::default()
        };

        // Periodic greedy evaluation with fixed seeds so the curve is
        // comparable across updates.
        let is_last = update + 1 == updates;
        let (eval_mean, eval_std) = if update % cfg.eval_every.max(1) == 0 || is_last {
            let eps = greedy_episodes(
                &agent.policy,
                codebook_of(&agent),
                &mut *eval_env,
                cfg.eval_episodes,
                eval_seed_base,
            )?;
            let rets: Vec<f64> = eps.iter().map(|e| e.ret).collect();
            let mean = rets.iter().sum::<f64>() / rets.len() as f64;
            let var = rets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rets.len() as f64;
            (Some(mean), Some(var.sqrt()))
        } else {
            (None, None)
        };

        let rs = repr_stats.as_ref();
        let record = MetricsRecord {
            step: env_steps,
            update,
            eval_return_mean: eval_mean,
            eval_return_std: eval_std,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
            approx_kl: stats.approx_kl,
            nce_loss: rs.map(|s| s.nce_loss),
            mi_estimate: rs.map(|s| s.mi_estimate),
            codebook_loss: rs.map(|s| s.codebook_loss),
            commitment_loss: rs.map(|s| s.commitment_loss),
            perplexity: rs.filter(|_| agent.vq_enabled).map(|s| s.perplexity),
            dead_codes: rs.filter(|_| agent.vq_enabled).map(|s| s.dead_codes),
            code_usage,
            total_loss: composite_loss(
                stats.policy_loss,
                stats.value_loss,
                stats.entropy,
                cfg.value_coef,
                cfg.entropy_coef,
                rs.map(|s| (s, cfg.w_nce, cfg.w_vq, cfg.w_commit)),
            ),
        };
        writeln!(metrics_file, "{}", serde_json::to_string(&record)?)?;
        metrics.push(record);

        if cfg.checkpoint_every > 0 && (update + 1) % cfg.checkpoint_every == 0 && !is_last {
            save_ckpt(
                &agent,
                env_steps,
                update + 1,
                &sample_rng,
                &workers,
                &format!("checkpoint_{:06}.json", update + 1),
            )?;
        }
    }
    drop(metrics_file);

    let final_path = save_ckpt(
        &agent,
        env_steps,
        updates,
        &sample_rng,
        &workers,
        "checkpoint_final.json",
    )?;
    // Wall-clock stays out of the metrics log so same-seed runs produce
    // byte-identical logs.
    std::fs::write(
        out_dir.join("timing.txt"),
        format!("wall_clock_s={:.3}\n", t_start.elapsed().as_secs_f64()),
    )?;
    Ok(TrainArtifacts {
        out_dir,
        metrics,
        final_checkpoint: final_path,
        env_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg(dir: &str) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.total_steps = 512;
        cfg.rollout_steps = 256;
        cfg.workers = 1;
        cfg.eval_episodes = 2;
        cfg.minibatch = 64;
        cfg.epochs = 1;
        cfg.out_dir = std::env::temp_dir()
            .join(format!("tart-train-{}-{dir}", std::process::id()))
            .to_string_lossy()
            .into_owned();
        cfg
    }

    #[test]
    fn short_run_emits_metrics_and_checkpoint() {
        let cfg = quick_cfg("basic");
        let art = train(&cfg).unwrap();
        assert_eq!(art.metrics.len(), 2);
        assert!(art.final_checkpoint.exists());
        // Steps strictly increase.
        assert!(art.metrics[0].step < art.metrics[1].step);
        std::fs::remove_dir_all(&art.out_dir).ok();
    }

    #[test]
    fn sub_rollout_budget_means_zero_updates() {
        let mut cfg = quick_cfg("boundary");
        cfg.total_steps = 100; // less than one rollout
        let art = train(&cfg).unwrap();
        assert!(art.metrics.is_empty());
        assert!(art.final_checkpoint.exists());
        let log = std::fs::read_to_string(art.out_dir.join("metrics.jsonl")).unwrap();
        assert!(log.is_empty());
        std::fs::remove_dir_all(&art.out_dir).ok();
    }

    #[test]
    fn zero_weights_leave_representation_terms_zero_in_total() {
        let mut cfg = quick_cfg("zerow");
        cfg.w_nce = 0.0;
        cfg.w_vq = 0.0;
        cfg.w_commit = 0.0;
        let art = train(&cfg).unwrap();
        for m in &art.metrics {
            let ppo_only = m.policy_loss + cfg.value_coef * m.value_loss
                - cfg.entropy_coef * m.entropy;
            assert!((m.total_loss - ppo_only).abs() < 1e-6);
        }
        std::fs::remove_dir_all(&art.out_dir).ok();
    }

    #[test]
    fn same_seed_runs_are_byte_identical() {
        let mut a = quick_cfg("repro-a");
        a.seed = 11;
        let mut b = quick_cfg("repro-b");
        b.seed = 11;
        let ra = train(&a).unwrap();
        let rb = train(&b).unwrap();
        let la = std::fs::read(ra.out_dir.join("metrics.jsonl")).unwrap();
        let lb = std::fs::read(rb.out_dir.join("metrics.jsonl")).unwrap();
        assert_eq!(la, lb);
        std::fs::remove_dir_all(&ra.out_dir).ok();
        std::fs::remove_dir_all(&rb.out_dir).ok();
    }

    #[test]
    fn hppo_log_omits_representation_columns() {
        let mut cfg = quick_cfg("hppo");
        cfg.variant = "hppo".into();
        let art = train(&cfg).unwrap();
        let log = std::fs::read_to_string(art.out_dir.join("metrics.jsonl")).unwrap();
        assert!(!log.contains("nce_loss"));
        assert!(!log.contains("perplexity"));
        std::fs::remove_dir_all(&art.out_dir).ok();
    }
}
