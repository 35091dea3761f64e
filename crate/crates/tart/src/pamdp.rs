//! Core hybrid-action data model: action specs, hybrid actions, transitions
//! and the temporal segments extracted around resource-usage events.
//!
//! Everything here is a plain value type with pure functions over it, so
//! rollout workers can share these freely without synchronization.

use std::collections::BTreeMap;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TartError};

/// Describes a hybrid (parameterized) action space: `num_discrete` discrete
/// heads, each carrying its own continuous parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub num_discrete: usize,
    /// Continuous parameter dimensionality per discrete action.
    pub param_dims: Vec<usize>,
    /// Closed bounds `[lo, hi]` per parameter dimension, indexed as
    /// `param_bounds[discrete][dim]`.
    pub param_bounds: Vec<Vec<(f64, f64)>>,
}

impl ActionSpec {
    pub fn new(param_dims: Vec<usize>, param_bounds: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        let spec = Self {
            num_discrete: param_dims.len(),
            param_dims,
            param_bounds,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// All branches share the same parameter dimensionality and bounds.
    pub fn uniform(num_discrete: usize, dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(
            vec![dim; num_discrete],
            vec![vec![(lo, hi); dim]; num_discrete],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_discrete < 1 {
            return Err(TartError::InvalidConfig("num_discrete must be >= 1".into()));
        }
        if self.param_dims.len() != self.num_discrete || self.param_bounds.len() != self.num_discrete {
            return Err(TartError::InvalidConfig(
                "param_dims/param_bounds length must equal num_discrete".into(),
            ));
        }
        for (k, bounds) in self.param_bounds.iter().enumerate() {
            if bounds.len() != self.param_dims[k] {
                return Err(TartError::InvalidConfig(format!(
                    "bounds for branch {k} must have {} entries",
                    self.param_dims[k]
                )));
            }
            for &(lo, hi) in bounds {
                if !(lo < hi) {
                    return Err(TartError::InvalidConfig(format!(
                        "bounds must satisfy lo < hi, got [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn max_param_dim(&self) -> usize {
        self.param_dims.iter().copied().max().unwrap_or(0)
    }

    /// Length of the canonical flat encoding: one-hot ++ zero-padded params.
    pub fn flat_dim(&self) -> usize {
        self.num_discrete + self.max_param_dim()
    }
}

/// One discrete head choice plus its continuous parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridAction {
    pub discrete: usize,
    pub params: Vec<f64>,
}

impl HybridAction {
    pub fn new(discrete: usize, params: Vec<f64>) -> Self {
        Self { discrete, params }
    }
}

/// A single environment transition, plus event flags in `info`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: HybridAction,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    /// Budget levels, event flags and similar scalars, keyed by name.
    /// BTreeMap keeps serialization order deterministic.
    pub info: BTreeMap<String, f64>,
}

/// Fixed-horizon window of (state, action) pairs anchored at a
/// resource-usage event at `anchor_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySegment {
    pub anchor_t: usize,
    /// (state, action) at the resource event itself.
    pub anchor_context: (Vec<f64>, HybridAction),
    /// Steps anchor_t+1 .. anchor_t+H, length exactly H.
    pub window: Vec<(Vec<f64>, HybridAction)>,
}

/// Validates `a` against `spec`, clipping params into bounds.
///
/// Returns the (possibly clipped) action and whether clipping occurred.
/// Out-of-range discrete index or wrong parameter arity is a hard error.
pub fn validate_action(spec: &ActionSpec, a: &HybridAction) -> Result<(HybridAction, bool)> {
    if a.discrete >= spec.num_discrete {
        return Err(TartError::InvalidAction(format!(
            "discrete index {} out of range (K_d = {})",
            a.discrete, spec.num_discrete
        )));
    }
    let dim = spec.param_dims[a.discrete];
    if a.params.len() != dim {
        return Err(TartError::InvalidAction(format!(
            "params length {} does not match param_dims[{}] = {}",
            a.params.len(),
            a.discrete,
            dim
        )));
    }
    let mut clipped = false;
    let mut params = a.params.clone();
    for (i, p) in params.iter_mut().enumerate() {
        let (lo, hi) = spec.param_bounds[a.discrete][i];
        if *p < lo {
            *p = lo;
            clipped = true;
        } else if *p > hi {
            *p = hi;
            clipped = true;
        }
    }
    Ok((HybridAction::new(a.discrete, params), clipped))
}

/// Canonical fixed-size encoding of a hybrid action: one-hot over the
/// discrete head followed by the chosen branch's params, zero-padded to
/// the widest branch.
pub fn flatten_action(spec: &ActionSpec, a: &HybridAction) -> Vec<f64> {
    let mut out = vec![0.0; spec.flat_dim()];
    out[a.discrete] = 1.0;
    for (i, &p) in a.params.iter().enumerate() {
        out[spec.num_discrete + i] = p;
    }
    out
}

/// Extracts one [`TrajectorySegment`] per resource-usage event with a full
/// in-episode window of `horizon` following steps.
///
/// An event at time `t` qualifies when `t + horizon < traj.len()` and no
/// step in `t .. t+horizon-1` (exclusive of the window's last entry) is
/// terminal, so windows never cross episode boundaries.
pub fn extract_segments(
    traj: &[Transition],
    horizon: usize,
    resource_ids: &HashSet<usize>,
) -> Vec<TrajectorySegment> {
    assert!(horizon >= 1, "horizon must be >= 1");
    let mut out = Vec::new();
    for t in 0..traj.len() {
        if !resource_ids.contains(&traj[t].action.discrete) {
            continue;
        }
        if t + horizon >= traj.len() {
            continue;
        }
        // No terminal inside the anchor step or the window body: a done at
        // step u ends the episode after u, so steps t ..= t+horizon-1 must
        // all be non-terminal for the window to stay inside one episode.
        if (t..t + horizon).any(|u| traj[u].done) {
            continue;
        }
        let window = (t + 1..=t + horizon)
            .map(|u| (traj[u].state.clone(), traj[u].action.clone()))
            .collect();
        out.push(TrajectorySegment {
            anchor_t: t,
            anchor_context: (traj[t].state.clone(), traj[t].action.clone()),
            window,
        });
    }
    out
}

/// Serializes transitions as line-delimited JSON, one transition per line.
/// Field order follows the `Transition` declaration.
pub fn write_trajectory<W: std::io::Write>(mut w: W, traj: &[Transition]) -> Result<()> {
    for tr in traj {
        serde_json::to_writer(&mut w, tr)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trajectory<R: std::io::BufRead>(r: R) -> Result<Vec<Transition>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
