//! Budgeted maze navigation.
//!
//! The agent moves continuously through a grid maze. MOVE displaces it by up
//! to `step_scale` cells with axis-separated wall blocking; DASH spends one
//! unit of a finite budget to jump `dash_cells` cells through walls, landing
//! on the nearest free cell along the ray. A BFS over (cell, budget) states
//! gives the exact optimum of the discretized problem and anchors the
//! acceptance tests.
//!
//! Maze files are plain text: a header line
//! `budget=<int> dash=<int> max_steps=<int>` followed by grid rows of
//! `#` (wall), `.` (free), `S` (start) and `G` (goal).

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{Environment, StepOutcome};
use crate::error::{Result, TartError};
use crate::pamdp::{validate_action, ActionSpec, HybridAction};

pub const MOVE: usize = 0;
pub const DASH: usize = 1;

/// Per-step time penalty and terminal goal reward.
pub const STEP_PENALTY: f64 = -0.01;
pub const GOAL_REWARD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeConfig {
    /// Row-major wall occupancy, `grid[y][x]`, true = wall.
    pub grid: Vec<Vec<bool>>,
    pub start_cell: (usize, usize),
    pub goal_cell: (usize, usize),
    pub budget: usize,
    pub dash_cells: usize,
    pub max_steps: usize,
    /// Max continuous displacement per MOVE step, in cells.
    pub step_scale: f64,
}

impl MazeConfig {
    pub fn width(&self) -> usize {
        self.grid[0].len()
    }

    pub fn height(&self) -> usize {
        self.grid.len()
    }

    pub fn is_wall(&self, cx: i64, cy: i64) -> bool {
        if cx < 0 || cy < 0 || cx >= self.width() as i64 || cy >= self.height() as i64 {
            return true; // outside the grid counts as wall
        }
        self.grid[cy as usize][cx as usize]
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() || self.grid[0].is_empty() {
            return Err(TartError::InvalidConfig("empty maze grid".into()));
        }
        let w = self.width();
        if self.grid.iter().any(|row| row.len() != w) {
            return Err(TartError::InvalidConfig("ragged maze grid".into()));
        }
        if self.dash_cells < 1 {
            return Err(TartError::InvalidConfig("dash_cells must be >= 1".into()));
        }
        if self.max_steps < 1 {
            return Err(TartError::InvalidConfig("max_steps must be >= 1".into()));
        }
        if !(self.step_scale > 0.0) {
            return Err(TartError::InvalidConfig("step_scale must be > 0".into()));
        }
        for (name, (x, y)) in [("start", self.start_cell), ("goal", self.goal_cell)] {
            if self.is_wall(x as i64, y as i64) {
                return Err(TartError::InvalidConfig(format!(
                    "{name} cell ({x}, {y}) is a wall or out of bounds"
                )));
            }
        }
        Ok(())
    }

    /// Parses the maze file format described in the module docs.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| TartError::InvalidConfig("empty maze file".into()))?;
        let mut budget = None;
        let mut dash = None;
        let mut max_steps = None;
        let mut step_scale = 1.0;
        for part in header.split_whitespace() {
            let (key, value) = part.split_once('=').ok_or_else(|| {
                TartError::InvalidConfig(format!("bad header entry '{part}'"))
            })?;
            match key {
                "budget" => budget = Some(parse_usize(value)?),
                "dash" => dash = Some(parse_usize(value)?),
                "max_steps" => max_steps = Some(parse_usize(value)?),
                "step_scale" => {
                    step_scale = value.parse().map_err(|_| {
                        TartError::InvalidConfig(format!("bad step_scale '{value}'"))
                    })?
                }
                _ => {
                    return Err(TartError::InvalidConfig(format!(
                        "unknown maze header key '{key}'"
                    )))
                }
            }
        }
        let (mut start, mut goal) = (None, None);
        let mut grid = Vec::new();
        for (y, line) in lines.enumerate() {
            let mut row = Vec::new();
            for (x, c) in line.trim_end().chars().enumerate() {
                match c {
                    '#' => row.push(true),
                    '.' => row.push(false),
                    'S' => {
                        start = Some((x, y));
                        row.push(false);
                    }
                    'G' => {
                        goal = Some((x, y));
                        row.push(false);
                    }
                    _ => {
                        return Err(TartError::InvalidConfig(format!(
                            "unexpected maze character '{c}'"
                        )))
                    }
                }
            }
            grid.push(row);
        }
        let config = Self {
            grid,
            start_cell: start
                .ok_or_else(|| TartError::InvalidConfig("maze has no start 'S'".into()))?,
            goal_cell: goal
                .ok_or_else(|| TartError::InvalidConfig("maze has no goal 'G'".into()))?,
            budget: budget
                .ok_or_else(|| TartError::InvalidConfig("header missing budget=".into()))?,
            dash_cells: dash
                .ok_or_else(|| TartError::InvalidConfig("header missing dash=".into()))?,
            max_steps: max_steps
                .ok_or_else(|| TartError::InvalidConfig("header missing max_steps=".into()))?,
            step_scale,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn action_spec() -> ActionSpec {
        // MOVE and DASH both parameterized by a desired direction (dx, dy).
        ActionSpec::uniform(2, 2, -1.0, 1.0).expect("static spec")
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| TartError::InvalidConfig(format!("bad integer '{s}'")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeState {
    /// Continuous position in cell units.
    pub pos: (f64, f64),
    pub budget_left: usize,
    pub t: usize,
}

pub struct MazeEnv {
    pub config: MazeConfig,
    pub state: MazeState,
    spec: ActionSpec,
}

pub const MAZE_OBS_DIM: usize = 13;

impl MazeEnv {
    pub fn new(config: MazeConfig) -> Result<Self> {
        config.validate()?;
        let state = MazeState {
            pos: cell_center(config.start_cell),
            budget_left: config.budget,
            t: 0,
        };
        Ok(Self {
            config,
            state,
            spec: MazeConfig::action_spec(),
        })
    }

    pub fn current_cell(&self) -> (usize, usize) {
        (
            self.state.pos.0.floor() as usize,
            self.state.pos.1.floor() as usize,
        )
    }

    /// 13-dim observation: position, goal offset, budget fraction and the
    /// 3x3 wall neighborhood around the current cell (center excluded).
    pub fn observe(&self) -> Vec<f64> {
        let (x, y) = self.state.pos;
        let goal = cell_center(self.config.goal_cell);
        let mut obs = vec![
            x,
            y,
            goal.0 - x,
            goal.1 - y,
            self.state.budget_left as f64 / self.config.budget.max(1) as f64,
        ];
        let (cx, cy) = (x.floor() as i64, y.floor() as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                obs.push(if self.config.is_wall(cx + dx, cy + dy) {
                    1.0
                } else {
                    0.0
                });
            }
        }
        debug_assert_eq!(obs.len(), MAZE_OBS_DIM);
        obs
    }

    /// Axis-separated continuous displacement with wall blocking: the x
    /// component is attempted first in small substeps, then y; a blocked
    /// axis keeps its progress so far and drops the rest.
    fn slide(&mut self, dx: f64, dy: f64) {
        const SUBSTEP: f64 = 0.125;
        for (axis, amount) in [(0, dx), (1, dy)] {
            if amount == 0.0 {
                continue;
            }
            let n = (amount.abs() / SUBSTEP).ceil() as usize;
            let h = amount / n as f64;
            for _ in 0..n {
                let mut next = self.state.pos;
                if axis == 0 {
                    next.0 += h;
                } else {
                    next.1 += h;
                }
                if self
                    .config
                    .is_wall(next.0.floor() as i64, next.1.floor() as i64)
                {
                    break;
                }
                self.state.pos = next;
            }
        }
    }

    /// Dash landing rule: jump `dash_cells` along the unit direction,
    /// ignoring walls in transit; if the landing cell is blocked, take the
    /// nearest free cell along the ray (whole-cell backoff), else stay.
    fn dash_landing(&self, dir: (f64, f64)) -> (f64, f64) {
        let (x, y) = self.state.pos;
        for k in (1..=self.config.dash_cells).rev() {
            let cand = (x + dir.0 * k as f64, y + dir.1 * k as f64);
            if !self
                .config
                .is_wall(cand.0.floor() as i64, cand.1.floor() as i64)
            {
                return cand;
            }
        }
        (x, y)
    }
}

impl Environment for MazeEnv {
    fn action_spec(&self) -> &ActionSpec {
        &self.spec
    }

    fn obs_dim(&self) -> usize {
        MAZE_OBS_DIM
    }

    fn resource_ids(&self) -> HashSet<usize> {
        [DASH].into_iter().collect()
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        // The maze itself is deterministic; the seed only matters for
        // policy-side stochasticity.
        self.state = MazeState {
            pos: cell_center(self.config.start_cell),
            budget_left: self.config.budget,
            t: 0,
        };
        self.observe()
    }

    fn step(&mut self, action: &HybridAction) -> StepOutcome {
        let (action, _) = validate_action(&self.spec, action).expect("action shape");
        let (dx, dy) = (action.params[0], action.params[1]);
        let mut info = BTreeMap::new();
        let mut discrete = action.discrete;

        if discrete == DASH && self.state.budget_left == 0 {
            info.insert("wasted_resource".into(), 1.0);
            discrete = MOVE;
        }
        match discrete {
            MOVE => {
                self.slide(self.config.step_scale * dx, self.config.step_scale * dy);
            }
            DASH => {
                let norm = (dx * dx + dy * dy).sqrt();
                if norm > 1e-9 {
                    self.state.pos = self.dash_landing((dx / norm, dy / norm));
                }
                self.state.budget_left -= 1;
                info.insert("dash_used".into(), 1.0);
            }
            _ => unreachable!(),
        }

        self.state.t += 1;
        let mut reward = STEP_PENALTY;
        let mut done = false;
        if self.current_cell() == self.config.goal_cell {
            reward += GOAL_REWARD;
            done = true;
            info.insert("goal_reached".into(), 1.0);
        } else if self.state.t >= self.config.max_steps {
            done = true;
        }
        info.insert("budget_left".into(), self.state.budget_left as f64);
        StepOutcome {
            obs: self.observe(),
            reward,
            done,
            info,
        }
    }

    fn max_steps(&self) -> usize {
        self.config.max_steps
    }
}

pub fn cell_center((x, y): (usize, usize)) -> (f64, f64) {
    (x as f64 + 0.5, y as f64 + 0.5)
}

/// Outcome of the exact BFS oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub reachable: bool,
    pub steps: usize,
    /// Undiscounted return of the optimal discretized policy, assuming
    /// `step_scale` = 1.
    pub oracle_return: f64,
    /// Actions realizing the optimum (empty when unreachable).
    pub actions: Vec<HybridAction>,
}

const CARDINAL: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Breadth-first search over (cell, budget_left) with unit-cost MOVE edges
/// to free 4-neighbors and unit-cost DASH edges using the environment's
/// landing rule. Exact for step_scale = 1 and cardinal directions.
pub fn oracle_solve(config: &MazeConfig) -> Result<OracleSolution> {
    config.validate()?;
    let (w, h) = (config.width(), config.height());
    let idx = |x: usize, y: usize, b: usize| (y * w + x) * (config.budget + 1) + b;
    let mut prev: Vec<Option<(usize, HybridAction)>> = vec![None; w * h * (config.budget + 1)];
    let mut seen = vec![false; w * h * (config.budget + 1)];
    let start = idx(config.start_cell.0, config.start_cell.1, config.budget);
    seen[start] = true;
    let mut queue = VecDeque::from([(config.start_cell, config.budget, 0usize)]);
    let mut goal_state = None;
    if config.start_cell == config.goal_cell {
        goal_state = Some((start, 0));
    }
    while let Some(((x, y), b, dist)) = queue.pop_front() {
        if goal_state.is_some() {
            break;
        }
        let here = idx(x, y, b);
        let push = |nx: i64, ny: i64, nb: usize, act: HybridAction, queue: &mut VecDeque<_>, prev: &mut Vec<_>, seen: &mut Vec<bool>| {
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                return false;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            let ni = idx(nx, ny, nb);
            if seen[ni] {
                return false;
            }
            seen[ni] = true;
            prev[ni] = Some((here, act));
            queue.push_back(((nx, ny), nb, dist + 1));
            (nx, ny) == config.goal_cell
        };
        for (dx, dy) in CARDINAL {
            // MOVE edge
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if !config.is_wall(nx, ny)
                && push(
                    nx,
                    ny,
                    b,
                    HybridAction::new(MOVE, vec![dx as f64, dy as f64]),
                    &mut queue,
                    &mut prev,
                    &mut seen,
                )
            {
                goal_state = Some((idx(nx as usize, ny as usize, b), dist + 1));
                break;
            }
            // DASH edge with the environment's landing backoff
            if b > 0 {
                let mut landing = None;
                for k in (1..=config.dash_cells).rev() {
                    let (lx, ly) = (x as i64 + dx * k as i64, y as i64 + dy * k as i64);
                    if !config.is_wall(lx, ly) {
                        landing = Some((lx, ly));
                        break;
                    }
                }
                if let Some((lx, ly)) = landing {
                    if (lx, ly) != (x as i64, y as i64)
                        && push(
                            lx,
                            ly,
                            b - 1,
                            HybridAction::new(DASH, vec![dx as f64, dy as f64]),
                            &mut queue,
                            &mut prev,
                            &mut seen,
                        )
                    {
                        goal_state = Some((idx(lx as usize, ly as usize, b - 1), dist + 1));
                        break;
                    }
                }
            }
        }
    }

    match goal_state {
        Some((mut node, steps)) if steps <= config.max_steps => {
            let mut actions = Vec::with_capacity(steps);
            while let Some((parent, act)) = prev[node].clone() {
                actions.push(act);
                node = parent;
            }
            actions.reverse();
            Ok(OracleSolution {
                reachable: true,
                steps,
                oracle_return: GOAL_REWARD + STEP_PENALTY * steps as f64,
                actions,
            })
        }
        _ => Ok(OracleSolution {
            reachable: false,
            steps: config.max_steps,
            oracle_return: STEP_PENALTY * config.max_steps as f64,
            actions: Vec::new(),
        }),
    }
}

/// Renders the maze and a trajectory of positions to a PNG. Dash events are
/// drawn as filled squares at the position where the dash was triggered.
pub fn render_trajectory(
    config: &MazeConfig,
    positions: &[(f64, f64)],
    dash_points: &[(f64, f64)],
    path: &Path,
) -> Result<()> {
    const SCALE: u32 = 32;
    let (w, h) = (config.width() as u32 * SCALE, config.height() as u32 * SCALE);
    let mut img = image::RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let (cx, cy) = ((x / SCALE) as usize, (y / SCALE) as usize);
            let color = if config.grid[cy][cx] {
                [40u8, 40, 40]
            } else if (cx, cy) == config.start_cell {
                [190, 230, 190]
            } else if (cx, cy) == config.goal_cell {
                [230, 190, 190]
            } else {
                [245, 245, 245]
            };
            img.put_pixel(x, y, image::Rgb(color));
        }
    }
    let to_px = |p: (f64, f64)| {
        (
            ((p.0 * SCALE as f64) as i64).clamp(0, w as i64 - 1),
            ((p.1 * SCALE as f64) as i64).clamp(0, h as i64 - 1),
        )
    };
    for pair in positions.windows(2) {
        let (x0, y0) = to_px(pair[0]);
        let (x1, y1) = to_px(pair[1]);
        // Bresenham line
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        loop {
            img.put_pixel(x as u32, y as u32, image::Rgb([40, 80, 220]));
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }
    for &p in dash_points {
        let (px, py) = to_px(p);
        for oy in -3..=3i64 {
            for ox in -3..=3i64 {
                let (x, y) = (px + ox, py + oy);
                if x >= 0 && y >= 0 && x < w as i64 && y < h as i64 {
                    img.put_pixel(x as u32, y as u32, image::Rgb([235, 140, 20]));
                }
            }
        }
    }
    img.save(path)
        .map_err(|e| TartError::InvalidInput(format!("image save failed: {e}")))?;
    Ok(())
}
