//! TART: temporal action representations for hybrid-action control.
//!
//! Library layout:
//! - [`pamdp`]: hybrid-action data model and trajectory segments
//! - [`env`]: budgeted maze and 3-DOF air-combat surrogate environments
//! - [`nn`]: tiny f64 MLPs with explicit backprop and Adam
//! - [`repr`]: contrastive temporal encoders (InfoNCE)
//! - [`vq`]: quantized tactic codebook
//! - [`policy`]: tactic-conditioned hybrid policy with clipped updates
//! - [`baselines`]: PAMDP baselines and the ablation grid
//! - [`harness`]: training loop, config, checkpoints, evaluation, plots

pub mod env;
pub mod error;
pub mod nn;
pub mod baselines;
pub mod harness;
pub mod pamdp;
pub mod policy;
pub mod repr;
pub mod testutil;
pub mod vq;
