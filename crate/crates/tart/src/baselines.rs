//! Agent variants: the full tactic-conditioned agent, its ablations, and
//! hybrid-action baselines, plus multi-seed comparison runs.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TartError};
use crate::harness::config::RunConfig;
use crate::pamdp::ActionSpec;
use crate::policy::{Conditioning, Policy, PolicyConfig};
use crate::repr::{EncoderConfig, ReprLearner};
use crate::vq::Codebook;

pub const VARIANT_NAMES: [&str; 5] = ["tart", "hppo", "hyar_lite", "tart_no_vq", "tart_no_contrast"];

/// A named variant plus config overrides applied on top of a base config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantSpec {
    pub name: String,
    pub overrides: Vec<(String, String)>,
}

impl VariantSpec {
    pub fn new(name: &str) -> Result<Self> {
        if !VARIANT_NAMES.contains(&name) {
            return Err(TartError::InvalidConfig(format!(
                "unknown variant {name:?} (expected one of {VARIANT_NAMES:?})"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            overrides: Vec::new(),
        })
    }
}

/// Canonical config for a variant: base config plus the variant's own key
/// changes. Ablations are one-key diffs where the design allows it.
pub fn variant_config(spec: &VariantSpec, base: &RunConfig) -> Result<RunConfig> {
    let mut cfg = base.clone();
    cfg.variant = spec.name.clone();
    match spec.name.as_str() {
        "tart" | "hppo" | "hyar_lite" | "tart_no_vq" => {}
        "tart_no_contrast" => cfg.w_nce = 0.0,
        other => {
            return Err(TartError::InvalidConfig(format!("unknown variant {other:?}")));
        }
    }
    for (k, v) in &spec.overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Policy plus (for representation-learning variants) the encoder/codebook
/// learner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Agent {
    pub variant: String,
    pub policy: Policy,
    pub repr: Option<ReprLearner>,
    /// False for variants where codebook perplexity is not applicable.
    pub vq_enabled: bool,
}

impl Agent {
    /// Codebook handed to the policy when acting, if this variant
    /// conditions on one.
    pub fn codebook(&self) -> Option<&Codebook> {
        if self.policy.cond == Conditioning::Codebook {
            self.repr.as_ref().map(|r| &r.codebook)
        } else {
            None
        }
    }
}

/// Constructs a trainable agent for the variant named in `cfg.variant`.
pub fn build_variant<R: Rng>(
    cfg: &RunConfig,
    spec: &ActionSpec,
    obs_dim: usize,
    obs_scale: Vec<f64>,
    rng: &mut R,
) -> Result<Agent> {
    let pc = PolicyConfig {
        hidden: cfg.hidden.clone(),
        lr: cfg.lr,
        gamma: cfg.gamma,
        lambda: cfg.lambda,
        clip: cfg.clip,
        epochs: cfg.epochs,
        minibatch: cfg.minibatch,
        value_coef: cfg.value_coef,
        entropy_coef: cfg.entropy_coef,
        logstd_init: cfg.logstd_init,
        code_commit: cfg.code_commit,
    };
    let ec = EncoderConfig {
        latent_dim: cfg.latent_dim,
        hidden: cfg.enc_hidden.clone(),
        window: cfg.window,
        temperature: cfg.temperature,
    };
    let row_dim = obs_dim + spec.flat_dim();
    let mk_repr = |weights: (f64, f64, f64), rng: &mut R| {
        ReprLearner::new(row_dim, ec.clone(), cfg.num_codes, cfg.beta, weights, cfg.repr_lr, rng)
    };
    let (cond, repr, vq_enabled) = match cfg.variant.as_str() {
        "tart" | "tart_no_contrast" => (
            Conditioning::Codebook,
            Some(mk_repr((cfg.w_nce, cfg.w_vq, cfg.w_commit), rng)?),
            true,
        ),
        // Quantization bypassed: a continuous tactic vector conditions the
        // maneuver head; encoders still train on the contrastive term.
        "tart_no_vq" => (
            Conditioning::ContinuousTactic,
            Some(mk_repr((cfg.w_nce, 0.0, 0.0), rng)?),
            false,
        ),
        "hppo" => (Conditioning::None, None, false),
        "hyar_lite" => (Conditioning::LatentDecode, None, false),
        other => {
            return Err(TartError::InvalidConfig(format!("unknown variant {other:?}")));
        }
    };
    let policy = Policy::new(
        spec,
        obs_dim,
        obs_scale,
        cond,
        cfg.latent_dim,
        cfg.num_codes,
        pc,
        rng,
    )?;
    Ok(Agent {
        variant: cfg.variant.clone(),
        policy,
        repr,
        vq_enabled,
    })
}

/// One row of a comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variant: String,
    pub seed: u64,
    pub ok: bool,
    pub error: Option<String>,
    pub final_return_mean: Option<f64>,
    pub final_return_std: Option<f64>,
    pub env_steps: u64,
    pub wall_clock_s: f64,
    pub final_metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub rows: Vec<ComparisonRow>,
    /// variant -> (mean over seeds of final return, std over seeds).
    pub summary: BTreeMap<String, (f64, f64)>,
}

/// Trains every variant x seed combination sequentially and aggregates
/// final greedy-evaluation returns. A crashing run becomes a failed row;
/// the table is still emitted.
pub fn run_comparison(
    base: &RunConfig,
    variants: &[String],
    seeds: &[u64],
    out_dir: &Path,
) -> Result<ComparisonResult> {
    if seeds.len() < 2 {
        return Err(TartError::InvalidConfig("need at least 2 seeds".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut rows = Vec::new();
    for name in variants {
        let vspec = VariantSpec::new(name)?;
        for &seed in seeds {
            let mut cfg = variant_config(&vspec, base)?;
            cfg.seed = seed;
            cfg.out_dir = out_dir
                .join(format!("{name}_seed{seed}"))
                .to_string_lossy()
                .into_owned();
            let started = std::time::Instant::now();
            let row = match crate::harness::train::train(&cfg) {
                Ok(art) => {
                    let last_eval = art
                        .metrics
                        .iter()
                        .rev()
                        .find(|m| m.eval_return_mean.is_some());
                    let mut fm = BTreeMap::new();
                    if let Some(m) = art.metrics.last() {
                        fm.insert("policy_loss".into(), m.policy_loss);
                        fm.insert("value_loss".into(), m.value_loss);
                        fm.insert("entropy".into(), m.entropy);
                        if let Some(p) = m.perplexity {
                            fm.insert("perplexity".into(), p);
                        }
                        if let Some(mi) = m.mi_estimate {
                            fm.insert("mi_estimate".into(), mi);
                        }
                    }
                    ComparisonRow {
                        variant: name.clone(),
                        seed,
                        ok: true,
                        error: None,
                        final_return_mean: last_eval.and_then(|m| m.eval_return_mean),
                        final_return_std: last_eval.and_then(|m| m.eval_return_std),
                        env_steps: art.env_steps,
                        wall_clock_s: started.elapsed().as_secs_f64(),
                        final_metrics: fm,
                    }
                }
                Err(e) => ComparisonRow {
                    variant: name.clone(),
                    seed,
                    ok: false,
                    error: Some(e.to_string()),
                    final_return_mean: None,
                    final_return_std: None,
                    env_steps: 0,
                    wall_clock_s: started.elapsed().as_secs_f64(),
                    final_metrics: BTreeMap::new(),
                },
            };
            rows.push(row);
        }
    }

    let mut summary = BTreeMap::new();
    for name in variants {
        let finals: Vec<f64> = rows
            .iter()
            .filter(|r| &r.variant == name)
            .filter_map(|r| r.final_return_mean)
            .collect();
        if finals.is_empty() {
            continue;
        }
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        let var = finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / finals.len() as f64;
        summary.insert(name.clone(), (mean, var.sqrt()));
    }
    let result = ComparisonResult { rows, summary };

    // Structured table: one JSON row per variant x seed.
    let mut table = String::new();
    for row in &result.rows {
        table.push_str(&serde_json::to_string(row)?);
        table.push('\n');
    }
    std::fs::write(out_dir.join("results.jsonl"), table)?;
    std::fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&result.summary)?,
    )?;
    crate::harness::plot::comparison_plot(&result, &out_dir.join("comparison.png"))?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_unknown_variant() {
        assert!(VariantSpec::new("foo").is_err());
    }

    #[test]
    fn no_contrast_is_a_one_key_diff() {
        let base = RunConfig::default();
        let tart = variant_config(&VariantSpec::new("tart").unwrap(), &base).unwrap();
        let nc = variant_config(&VariantSpec::new("tart_no_contrast").unwrap(), &base).unwrap();
        let diff = tart.diff_keys(&nc);
        assert_eq!(diff, vec!["variant".to_string(), "w_nce".to_string()]);
    }

    #[test]
    fn hppo_has_no_representation_learner() {
        let mut cfg = RunConfig::default();
        cfg.variant = "hppo".into();
        let spec = ActionSpec::uniform(2, 2, -1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let agent = build_variant(&cfg, &spec, 13, vec![1.0; 13], &mut rng).unwrap();
        assert!(agent.repr.is_none());
        assert!(agent.codebook().is_none());
        assert!(!agent.vq_enabled);
    }

    #[test]
    fn tiny_comparison_emits_table_and_plot() {
        let mut base = RunConfig::default();
        base.total_steps = 512;
        base.rollout_steps = 256;
        base.workers = 1;
        base.eval_episodes = 2;
        base.minibatch = 64;
        base.epochs = 1;
        let out = std::env::temp_dir().join(format!("tart-cmp-{}", std::process::id()));
        let result = run_comparison(
            &base,
            &["tart".to_string(), "hppo".to_string()],
            &[0, 1],
            &out,
        )
        .unwrap();
        assert_eq!(result.rows.len(), 4);
        assert!(result.rows.iter().all(|r| r.ok));
        assert_eq!(result.summary.len(), 2);
        assert!(out.join("results.jsonl").exists());
        assert!(out.join("comparison.png").exists());
        std::fs::remove_dir_all(&out).ok();
    }

    #[test]
    fn no_vq_reports_perplexity_not_applicable() {
        let mut cfg = RunConfig::default();
        cfg.variant = "tart_no_vq".into();
        let spec = ActionSpec::uniform(2, 2, -1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let agent = build_variant(&cfg, &spec, 13, vec![1.0; 13], &mut rng).unwrap();
        assert!(agent.repr.is_some());
        assert!(!agent.vq_enabled);
        assert!(agent.codebook().is_none());
    }
}
