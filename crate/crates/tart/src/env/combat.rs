//! Simplified 3-DOF air-to-air engagement surrogate.
//!
//! One point-mass aircraft (the agent) against a scripted pursuer. The
//! discrete head spends missiles and flares; the continuous head flies the
//! aircraft (turn, climb, throttle) and keeps acting during resource use.
//! Missiles fly pure pursuit and kill probabilistically at intercept, with
//! flares cutting every inbound missile's kill probability multiplicatively.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, StepOutcome};
use crate::error::{Result, TartError};
use crate::pamdp::{validate_action, ActionSpec, HybridAction};

pub const NOOP: usize = 0;
pub const FIRE: usize = 1;
pub const FLARE: usize = 2;

/// Intercept range in meters.
pub const INTERCEPT_RANGE: f64 = 50.0;
/// Missile self-destruct age in seconds.
pub const MISSILE_TIMEOUT: f64 = 30.0;
/// Longitudinal acceleration at full throttle, m/s^2.
const MAX_ACCEL: f64 = 20.0;
/// Opponent refire cooldown in seconds.
const OPPONENT_COOLDOWN: f64 = 5.0;

pub const COMBAT_OBS_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombatConfig {
    pub dt: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub max_turn_rate: f64,
    pub max_climb_rate: f64,
    pub missiles: usize,
    pub flares: usize,
    pub missile_speed: f64,
    pub missile_pk: f64,
    pub flare_rho: f64,
    pub lock_cone: f64,
    pub max_steps: usize,
    pub arena_radius: f64,
}

impl Default for CombatConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            v_min: 100.0,
            v_max: 300.0,
            max_turn_rate: 0.5,
            max_climb_rate: 50.0,
            missiles: 2,
            flares: 2,
            missile_speed: 600.0,
            missile_pk: 0.8,
            flare_rho: 0.5,
            lock_cone: 0.5,
            max_steps: 600,
            arena_radius: 10_000.0,
        }
    }
}

impl CombatConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.v_min && self.v_min < self.v_max) {
            return Err(TartError::InvalidConfig("need 0 < v_min < v_max".into()));
        }
        if !(self.missile_pk > 0.0 && self.missile_pk <= 1.0) {
            return Err(TartError::InvalidConfig("missile_pk must be in (0,1]".into()));
        }
        if !(self.flare_rho > 0.0 && self.flare_rho < 1.0) {
            return Err(TartError::InvalidConfig("flare_rho must be in (0,1)".into()));
        }
        if !(self.dt > 0.0) {
            return Err(TartError::InvalidConfig("dt must be > 0".into()));
        }
        Ok(())
    }

    pub fn action_spec() -> ActionSpec {
        // All branches share (turn, climb, throttle); the aircraft keeps
        // maneuvering while deploying resources.
        ActionSpec::uniform(3, 3, -1.0, 1.0).expect("static spec")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AircraftState {
    pub pos: [f64; 3],
    pub heading: f64,
    pub speed: f64,
    pub climb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissileState {
    pub pos: [f64; 3],
    /// 0 targets the agent, 1 targets the opponent.
    pub target: usize,
    pub alive: bool,
    pub pk_current: f64,
    pub age: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a < -PI {
        a += 2.0 * PI;
    }
    a
}

fn horizontal_norm(p: &[f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

fn range3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Angle between `own`'s velocity vector and the line of sight to `other`.
pub fn antenna_angle(own: &AircraftState, other: &AircraftState) -> f64 {
    let los = [
        other.pos[0] - own.pos[0],
        other.pos[1] - own.pos[1],
        other.pos[2] - own.pos[2],
    ];
    let v = velocity(own);
    let dot = los[0] * v[0] + los[1] * v[1] + los[2] * v[2];
    let nl = (los[0].powi(2) + los[1].powi(2) + los[2].powi(2)).sqrt().max(1e-9);
    let nv = (v[0].powi(2) + v[1].powi(2) + v[2].powi(2)).sqrt().max(1e-9);
    (dot / (nl * nv)).clamp(-1.0, 1.0).acos()
}

fn velocity(a: &AircraftState) -> [f64; 3] {
    [
        a.speed * a.heading.cos(),
        a.speed * a.heading.sin(),
        a.climb,
    ]
}

/// Bernoulli kill draw at intercept; outside [`INTERCEPT_RANGE`] the missile
/// keeps flying and no randomness is consumed.
pub fn intercept_check<R: Rng>(
    missile: &MissileState,
    target: &AircraftState,
    rng: &mut R,
) -> Option<bool> {
    debug_assert!(missile.alive);
    if range3(&missile.pos, &target.pos) >= INTERCEPT_RANGE {
        return None;
    }
    Some(rng.gen_bool(missile.pk_current.clamp(0.0, 1.0)))
}

/// Scripted pursuer: proportional heading/altitude control, full throttle,
/// fires inside its lock cone after a cooldown, pops a flare with
/// probability 0.5 per step while a missile is inbound.
pub fn opponent_policy<R: Rng>(
    own: &AircraftState,
    agent: &AircraftState,
    lock_cone: f64,
    cooldown_left: f64,
    missiles_left: usize,
    flares_left: usize,
    inbound: bool,
    rng: &mut R,
) -> HybridAction {
    let bearing = (agent.pos[1] - own.pos[1]).atan2(agent.pos[0] - own.pos[0]);
    let err = wrap_angle(bearing - own.heading);
    // Positive turn command is a right (clockwise) turn, so a target on
    // the left (err > 0) needs a negative command.
    let turn = (-2.0 * err).clamp(-1.0, 1.0);
    let climb = ((agent.pos[2] - own.pos[2]) / 500.0).clamp(-1.0, 1.0);
    let params = vec![turn, climb, 1.0];
    if inbound && flares_left > 0 && rng.gen_bool(0.5) {
        return HybridAction::new(FLARE, params);
    }
    if missiles_left > 0 && cooldown_left <= 0.0 && antenna_angle(own, agent) < lock_cone {
        return HybridAction::new(FIRE, params);
    }
    HybridAction::new(NOOP, params)
}

/// Per-step episode log record: both aircraft, live missiles, resource
/// counts and event flags. Serialized as one JSON line per step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombatLogRecord {
    pub t: usize,
    pub agent: AircraftState,
    pub opponent: AircraftState,
    pub missiles: Vec<MissileState>,
    pub agent_missiles: usize,
    pub agent_flares: usize,
    pub opponent_missiles: usize,
    pub opponent_flares: usize,
    pub events: Vec<String>,
}

pub struct CombatEnv {
    pub config: CombatConfig,
    spec: ActionSpec,
    rng: ChaCha8Rng,
    pub t: usize,
    pub agent: AircraftState,
    pub opponent: AircraftState,
    pub agent_missiles: usize,
    pub agent_flares: usize,
    pub opponent_missiles: usize,
    pub opponent_flares: usize,
    pub missiles: Vec<MissileState>,
    opponent_cooldown: f64,
    /// Episode log, re-filled on every reset.
    pub log: Vec<CombatLogRecord>,
}

impl CombatEnv {
    pub fn new(config: CombatConfig) -> Result<Self> {
        config.validate()?;
        let mut env = Self {
            spec: CombatConfig::action_spec(),
            rng: ChaCha8Rng::seed_from_u64(0),
            t: 0,
            agent: Self::spawn_agent(&config),
            opponent: Self::spawn_opponent(&config),
            agent_missiles: config.missiles,
            agent_flares: config.flares,
            opponent_missiles: config.missiles,
            opponent_flares: config.flares,
            missiles: Vec::new(),
            opponent_cooldown: 0.0,
            log: Vec::new(),
            config,
        };
        env.reset(0);
        Ok(env)
    }

    fn spawn_agent(config: &CombatConfig) -> AircraftState {
        AircraftState {
            pos: [-0.3 * config.arena_radius, 0.0, 3000.0],
            heading: 0.0,
            speed: 0.5 * (config.v_min + config.v_max),
            climb: 0.0,
        }
    }

    fn spawn_opponent(config: &CombatConfig) -> AircraftState {
        AircraftState {
            pos: [0.3 * config.arena_radius, 0.0, 3000.0],
            heading: PI,
            speed: 0.5 * (config.v_min + config.v_max),
            climb: 0.0,
        }
    }

    fn integrate(config: &CombatConfig, a: &mut AircraftState, cmd: &[f64]) {
        let (turn, climb, throttle) = (cmd[0], cmd[1], cmd[2]);
        a.heading = wrap_angle(a.heading - config.max_turn_rate * turn * config.dt);
        // Soft boundary: outside the arena, override the turn toward center.
        if horizontal_norm(&a.pos) > config.arena_radius {
            let to_center = (-a.pos[1]).atan2(-a.pos[0]);
            let err = wrap_angle(to_center - a.heading);
            a.heading = wrap_angle(
                a.heading + err.clamp(-config.max_turn_rate * config.dt, config.max_turn_rate * config.dt),
            );
        }
        a.climb = config.max_climb_rate * climb;
        a.speed = (a.speed + MAX_ACCEL * throttle * config.dt).clamp(config.v_min, config.v_max);
        let v = velocity(a);
        for i in 0..3 {
            a.pos[i] += v[i] * config.dt;
        }
        a.pos[2] = a.pos[2].max(100.0);
    }

    fn apply_resource(
        &mut self,
        actor: usize, // 0 = agent, 1 = opponent
        discrete: usize,
        events: &mut Vec<String>,
        info: &mut BTreeMap<String, f64>,
    ) {
        let (own, other) = if actor == 0 {
            (self.agent.clone(), self.opponent.clone())
        } else {
            (self.opponent.clone(), self.agent.clone())
        };
        match discrete {
            FIRE => {
                let has = if actor == 0 {
                    self.agent_missiles > 0
                } else {
                    self.opponent_missiles > 0
                };
                let locked = antenna_angle(&own, &other) < self.config.lock_cone;
                if has && locked {
                    if actor == 0 {
                        self.agent_missiles -= 1;
                    } else {
                        self.opponent_missiles -= 1;
                        self.opponent_cooldown = OPPONENT_COOLDOWN;
                    }
                    self.missiles.push(MissileState {
                        pos: own.pos,
                        target: 1 - actor,
                        alive: true,
                        pk_current: self.config.missile_pk,
                        age: 0.0,
                    });
                    events.push(format!("fire_{actor}"));
                } else if actor == 0 {
                    info.insert("wasted_resource".into(), 1.0);
                }
            }
            FLARE => {
                let has = if actor == 0 {
                    self.agent_flares > 0
                } else {
                    self.opponent_flares > 0
                };
                if has {
                    if actor == 0 {
                        self.agent_flares -= 1;
                    } else {
                        self.opponent_flares -= 1;
                    }
                    for m in self.missiles.iter_mut() {
                        if m.alive && m.target == actor {
                            m.pk_current *= 1.0 - self.config.flare_rho;
                        }
                    }
                    events.push(format!("flare_{actor}"));
                } else if actor == 0 {
                    info.insert("wasted_resource".into(), 1.0);
                }
            }
            _ => {}
        }
    }

    fn inbound_on(&self, target: usize) -> Option<&MissileState> {
        self.missiles
            .iter()
            .filter(|m| m.alive && m.target == target)
            .min_by(|a, b| {
                let t = if target == 0 { &self.agent } else { &self.opponent };
                range3(&a.pos, &t.pos)
                    .partial_cmp(&range3(&b.pos, &t.pos))
                    .unwrap()
            })
    }

    /// Fixed 16-dim observation; missing-missile slots use sentinel -1.
    pub fn observe(&self) -> Vec<f64> {
        let c = &self.config;
        let speed_n = (self.agent.speed - c.v_min) / (c.v_max - c.v_min);
        let rel = [
            self.opponent.pos[0] - self.agent.pos[0],
            self.opponent.pos[1] - self.agent.pos[1],
            self.opponent.pos[2] - self.agent.pos[2],
        ];
        // Body frame: x ahead, y left of the nose.
        let (ch, sh) = (self.agent.heading.cos(), self.agent.heading.sin());
        let bx = (rel[0] * ch + rel[1] * sh) / c.arena_radius;
        let by = (-rel[0] * sh + rel[1] * ch) / c.arena_radius;
        let bz = rel[2] / 1000.0;
        let va = velocity(&self.agent);
        let vo = velocity(&self.opponent);
        let dist = range3(&self.agent.pos, &self.opponent.pos).max(1e-9);
        let los = [rel[0] / dist, rel[1] / dist, rel[2] / dist];
        let closure = ((va[0] - vo[0]) * los[0] + (va[1] - vo[1]) * los[1]
            + (va[2] - vo[2]) * los[2])
            / (2.0 * c.v_max);
        let ata = antenna_angle(&self.agent, &self.opponent) / PI;
        let aa = antenna_angle(&self.opponent, &self.agent) / PI;
        let (m_range, m_bearing) = match self.inbound_on(0) {
            Some(m) => {
                let r = range3(&m.pos, &self.agent.pos);
                let brg = wrap_angle(
                    (m.pos[1] - self.agent.pos[1]).atan2(m.pos[0] - self.agent.pos[0])
                        - self.agent.heading,
                );
                (r / c.arena_radius, brg / PI)
            }
            None => (-1.0, -1.0),
        };
        vec![
            speed_n,
            self.agent.heading / PI,
            self.agent.climb / c.max_climb_rate,
            self.agent.pos[2] / 3000.0,
            bx,
            by,
            bz,
            closure,
            ata,
            aa,
            self.agent_missiles as f64 / c.missiles.max(1) as f64,
            self.agent_flares as f64 / c.flares.max(1) as f64,
            m_range,
            m_bearing,
            (self.opponent.speed - c.v_min) / (c.v_max - c.v_min),
            dist / c.arena_radius,
        ]
    }

    pub fn write_log<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for rec in &self.log {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

impl Environment for CombatEnv {
    fn action_spec(&self) -> &ActionSpec {
        &self.spec
    }

    fn obs_dim(&self) -> usize {
        COMBAT_OBS_DIM
    }

    fn resource_ids(&self) -> HashSet<usize> {
        [FIRE, FLARE].into_iter().collect()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.t = 0;
        self.agent = Self::spawn_agent(&self.config);
        self.opponent = Self::spawn_opponent(&self.config);
        self.agent_missiles = self.config.missiles;
        self.agent_flares = self.config.flares;
        self.opponent_missiles = self.config.missiles;
        self.opponent_flares = self.config.flares;
        self.missiles.clear();
        self.opponent_cooldown = 0.0;
        self.log.clear();
        self.observe()
    }

    fn step(&mut self, action: &HybridAction) -> StepOutcome {
        let (action, _) = validate_action(&self.spec, action).expect("action shape");
        let mut info = BTreeMap::new();
        let mut events = Vec::new();

        // Resource phase: agent first, then the scripted opponent.
        self.apply_resource(0, action.discrete, &mut events, &mut info);
        let inbound = self.inbound_on(1).is_some();
        let opp_action = opponent_policy(
            &self.opponent,
            &self.agent,
            self.config.lock_cone,
            self.opponent_cooldown,
            self.opponent_missiles,
            self.opponent_flares,
            inbound,
            &mut self.rng,
        );
        self.apply_resource(1, opp_action.discrete, &mut events, &mut info);
        self.opponent_cooldown = (self.opponent_cooldown - self.config.dt).max(0.0);

        // Kinematics.
        Self::integrate(&self.config, &mut self.agent, &action.params);
        Self::integrate(&self.config, &mut self.opponent, &opp_action.params);

        // Missile flight and intercepts.
        let mut reward = 0.0;
        let mut done = false;
        let dt = self.config.dt;
        let missile_speed = self.config.missile_speed;
        for i in 0..self.missiles.len() {
            if !self.missiles[i].alive {
                continue;
            }
            let target_state = if self.missiles[i].target == 0 {
                self.agent.clone()
            } else {
                self.opponent.clone()
            };
            let m = &mut self.missiles[i];
            let d = [
                target_state.pos[0] - m.pos[0],
                target_state.pos[1] - m.pos[1],
                target_state.pos[2] - m.pos[2],
            ];
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(1e-9);
            for k in 0..3 {
                m.pos[k] += d[k] / n * missile_speed * dt;
            }
            m.age += dt;
            if m.age > MISSILE_TIMEOUT {
                m.alive = false;
                continue;
            }
            let m_snapshot = m.clone();
            if let Some(kill) = intercept_check(&m_snapshot, &target_state, &mut self.rng) {
                let m = &mut self.missiles[i];
                m.alive = false;
                if kill {
                    if m_snapshot.target == 1 {
                        reward += 5.0;
                        events.push("opponent_killed".into());
                    } else {
                        reward -= 5.0;
                        events.push("agent_killed".into());
                    }
                    done = true;
                } else {
                    events.push("missile_miss".into());
                }
            }
        }
        self.missiles.retain(|m| m.alive);

        // Tracking shaping toward the opponent.
        let ata = antenna_angle(&self.agent, &self.opponent);
        reward += 0.01 * (1.0 - ata / PI);

        self.t += 1;
        if self.t >= self.config.max_steps {
            done = true;
        }
        info.insert("missiles_left".into(), self.agent_missiles as f64);
        info.insert("flares_left".into(), self.agent_flares as f64);
        self.log.push(CombatLogRecord {
            t: self.t,
            agent: self.agent.clone(),
            opponent: self.opponent.clone(),
            missiles: self.missiles.clone(),
            agent_missiles: self.agent_missiles,
            agent_flares: self.agent_flares,
            opponent_missiles: self.opponent_missiles,
            opponent_flares: self.opponent_flares,
            events,
        });
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

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> CombatEnv {
        CombatEnv::new(CombatConfig::default()).unwrap()
    }

    #[test]
    fn fire_in_cone_spawns_missile() {
        let mut e = env();
        e.reset(1);
        // Opponent starts dead ahead of the agent; strip its flares so the
        // spawned missile's pk is observed before any mitigation.
        e.opponent_flares = 0;
        let out = e.step(&HybridAction::new(FIRE, vec![0.0, 0.0, 0.0]));
        assert_eq!(e.agent_missiles, 1);
        let own = e.missiles.iter().filter(|m| m.target == 1).count();
        assert_eq!(own, 1);
        assert!(
            (e.missiles.iter().find(|m| m.target == 1).unwrap().pk_current
                - e.config.missile_pk)
                .abs()
                < 1e-12
        );
        assert!(out.info.get("wasted_resource").is_none());
    }

    #[test]
    fn fire_without_missiles_is_wasted() {
        let mut e = env();
        e.reset(1);
        e.agent_missiles = 0;
        let out = e.step(&HybridAction::new(FIRE, vec![0.0, 0.0, 0.0]));
        assert_eq!(out.info.get("wasted_resource"), Some(&1.0));
    }

    #[test]
    fn flare_multiplies_inbound_pk() {
        let mut e = env();
        e.reset(1);
        e.missiles.push(MissileState {
            pos: [0.0, 0.0, 3000.0],
            target: 0,
            alive: true,
            pk_current: 1.0,
            age: 0.0,
        });
        e.config.flare_rho = 0.7;
        e.agent_flares = 1;
        e.step(&HybridAction::new(FLARE, vec![0.0, 0.0, 0.0]));
        let m = e.missiles.iter().find(|m| m.target == 0).unwrap();
        assert!((m.pk_current - 0.3).abs() < 1e-12);
        assert_eq!(e.agent_flares, 0);
    }

    #[test]
    fn tracking_reward_is_max_at_zero_ata() {
        let mut e = env();
        e.reset(1);
        // Dead ahead, co-altitude, both level: ATA stays ~0 after one step.
        let out = e.step(&HybridAction::new(NOOP, vec![0.0, 0.0, 0.0]));
        assert!((out.reward - 0.01).abs() < 1e-6, "reward = {}", out.reward);
    }

    #[test]
    fn observation_shape_and_sentinels() {
        let mut e = env();
        let obs = e.reset(1);
        assert_eq!(obs.len(), COMBAT_OBS_DIM);
        // No inbound missile: range and bearing slots are -1.
        assert_eq!(obs[12], -1.0);
        assert_eq!(obs[13], -1.0);
        // Opponent dead ahead, co-altitude: body-frame y and z are 0.
        assert!(obs[5].abs() < 1e-9 && obs[6].abs() < 1e-9);
        e.agent_missiles = 0;
        assert_eq!(e.observe()[10], 0.0);
    }

    #[test]
    fn intercept_check_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let target = CombatEnv::spawn_agent(&CombatConfig::default());
        let mut m = MissileState {
            pos: target.pos,
            target: 0,
            alive: true,
            pk_current: 0.0,
            age: 0.0,
        };
        for _ in 0..100 {
            assert_eq!(intercept_check(&m, &target, &mut rng), Some(false));
        }
        m.pk_current = 1.0;
        for _ in 0..100 {
            assert_eq!(intercept_check(&m, &target, &mut rng), Some(true));
        }
        m.pos[0] += 1000.0;
        assert_eq!(intercept_check(&m, &target, &mut rng), None);
    }

    #[test]
    fn opponent_turn_commands() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = CombatConfig::default();
        let own = CombatEnv::spawn_opponent(&cfg);
        let mut agent = CombatEnv::spawn_agent(&cfg);
        // Dead ahead of the opponent (opponent faces -x at +x side).
        agent.pos = [own.pos[0] - 2000.0, 0.0, own.pos[2]];
        let a = opponent_policy(&own, &agent, cfg.lock_cone, 1.0, 2, 2, false, &mut rng);
        assert!(a.params[0].abs() < 1e-9);
        // 90 degrees to the left of the opponent's nose.
        agent.pos = [own.pos[0], -2000.0, own.pos[2]];
        let a = opponent_policy(&own, &agent, cfg.lock_cone, 1.0, 2, 2, false, &mut rng);
        assert_eq!(a.params[0], -1.0);
        // Never flares with nothing inbound.
        for _ in 0..100 {
            let a = opponent_policy(&own, &agent, cfg.lock_cone, 1.0, 2, 2, false, &mut rng);
            assert_ne!(a.discrete, FLARE);
        }
    }

    #[test]
    fn speed_stays_bounded_and_counts_monotone() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut e = env();
        e.reset(42);
        let mut missiles = e.agent_missiles;
        let mut flares = e.agent_flares;
        for _ in 0..3000 {
            let a = HybridAction::new(
                rng.gen_range(0..3),
                vec![
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ],
            );
            let out = e.step(&a);
            assert!(e.agent.speed >= e.config.v_min - 1e-9);
            assert!(e.agent.speed <= e.config.v_max + 1e-9);
            assert!(e.agent_missiles <= missiles && e.agent_flares <= flares);
            missiles = e.agent_missiles;
            flares = e.agent_flares;
            if out.done {
                e.reset(rng.gen());
                missiles = e.agent_missiles;
                flares = e.agent_flares;
            }
        }
    }

    #[test]
    fn same_seed_same_log() {
        use rand::Rng;
        let run = || {
            let mut e = env();
            e.reset(9);
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for _ in 0..300 {
                let a = HybridAction::new(
                    rng.gen_range(0..3),
                    vec![
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ],
                );
                if e.step(&a).done {
                    break;
                }
            }
            let mut buf = Vec::new();
            e.write_log(&mut buf).unwrap();
            buf
        };
        assert_eq!(run(), run());
    }
}
