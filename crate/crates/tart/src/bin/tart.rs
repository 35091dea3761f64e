//! Command-line entry point: train, eval, compare, plot, dump-codebook.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tart::baselines::run_comparison;
use tart::error::TartError;
use tart::harness::checkpoint::Checkpoint;
use tart::harness::config::RunConfig;
use tart::harness::evaluate::evaluate;
use tart::harness::plot::plot_files;
use tart::harness::train::train;

#[derive(Parser)]
#[command(name = "tart", about = "Temporal action-representation training harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Writes episode logs, summary and trajectory render here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multi-seed comparison across variants.
    Compare {
        #[arg(long)]
        env: String,
        /// Comma-separated variant names.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        /// Comma-separated seeds (at least two).
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 200_000)]
        steps: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base config applied before variant overrides.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render plots from one or more metrics logs.
    Plot {
        #[arg(long = "in", value_delimiter = ',', required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a checkpoint's codebook entries and usage as JSON.
    DumpCodebook {
        #[arg(long)]
        ckpt: PathBuf,
    },
}

/// Default output root: $TART_OUT or ./runs.
fn out_root() -> PathBuf {
    std::env::var_os("TART_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn exit_code_for(err: &TartError) -> u8 {
    match err {
        TartError::InvalidConfig(_)
        | TartError::InvalidAction(_)
        | TartError::InvalidInput(_)
        | TartError::DimensionMismatch { .. }
        | TartError::Checkpoint(_)
        | TartError::Serde(_) => 2,
        TartError::NonFiniteLoss(_) | TartError::Io(_) => 3,
    }
}

/// Reading a config is a configuration concern: a missing or unreadable
/// file maps to exit code 2, not a runtime abort.
fn load_config(path: &PathBuf) -> Result<RunConfig, TartError> {
    RunConfig::load(path).map_err(|e| match e {
        TartError::Io(io) => {
            TartError::InvalidConfig(format!("cannot read {}: {io}", path.display()))
        }
        other => other,
    })
}

fn run(cli: Cli) -> Result<(), TartError> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dir) = out {
                cfg.out_dir = dir.to_string_lossy().into_owned();
            } else if cfg.out_dir == RunConfig::default().out_dir {
                cfg.out_dir = out_root()
                    .join(format!("{}_{}_seed{}", cfg.env, cfg.variant, cfg.seed))
                    .to_string_lossy()
                    .into_owned();
            }
            let art = train(&cfg)?;
            println!(
                "trained {} updates, {} env steps; checkpoint: {}",
                art.metrics.len(),
                art.env_steps,
                art.final_checkpoint.display()
            );
            if let Some(last) = art.metrics.iter().rev().find(|m| m.eval_return_mean.is_some()) {
                println!(
                    "final eval return: {:.4} +/- {:.4}",
                    last.eval_return_mean.unwrap(),
                    last.eval_return_std.unwrap_or(0.0)
                );
            }
            Ok(())
        }
        Command::Eval {
            ckpt,
            episodes,
            seed,
            out,
        } => {
            let ckpt = Checkpoint::load(&ckpt)?;
            let summary = evaluate(&ckpt, None, episodes, seed, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::Compare {
            env,
            variants,
            seeds,
            steps,
            out,
            config,
        } => {
            let mut base = match config {
                Some(p) => load_config(&p)?,
                None => RunConfig::default(),
            };
            base.env = env;
            base.validate()?;
            base.total_steps = steps;
            let out_dir = out.unwrap_or_else(|| out_root().join("compare"));
            let result = run_comparison(&base, &variants, &seeds, &out_dir)?;
            for row in &result.rows {
                println!("{}", serde_json::to_string(row)?);
            }
            for (name, (mean, std)) in &result.summary {
                println!("{name}: {mean:.4} +/- {std:.4}");
            }
            Ok(())
        }
        Command::Plot { inputs, out } => {
            let out_dir = out.unwrap_or_else(|| out_root().join("plots"));
            let written = plot_files(&inputs, &out_dir)?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::DumpCodebook { ckpt } => {
            let ckpt = Checkpoint::load(&ckpt)?;
            match &ckpt.agent.repr {
                Some(r) => {
                    let dump = serde_json::json!({
                        "num_codes": r.codebook.num_codes(),
                        "dim": r.codebook.entries.first().map_or(0, |e| e.len()),
                        "entries": r.codebook.entries,
                        "usage_counts": r.codebook.usage_counts,
                        "beta": r.codebook.beta,
                    });
                    println!("{}", serde_json::to_string_pretty(&dump)?);
                    Ok(())
                }
                None => Err(TartError::InvalidInput(format!(
                    "variant {:?} has no codebook",
                    ckpt.agent.variant
                ))),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
