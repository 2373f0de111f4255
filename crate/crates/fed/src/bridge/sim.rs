//! Single-ship bridge simulation: helm orders, the stepped dynamics and
//! seakeeping, and the conning snapshot. No I/O and no clocks.

use harbour_core::dynamics::{step, AnchorHold, Controls, Wind, MAX_THRUSTERS};
use harbour_core::port::{PortGeometry, Scenario, ScenarioShip};
use harbour_core::seakeeping::{params_for_ship, step_seakeeping, SeakeepingState, WaveState};
use harbour_core::units::{knots_to_ms, ms_to_knots, wrap_two_pi};
use harbour_core::{Environment, ManeuverState};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::rti::{to_payload, Payload};

/// Default fixed step, s.
pub const DEFAULT_DT: f64 = 0.05;

/// Anchor may only be dropped below this speed over ground, kn.
pub const ANCHOR_MAX_SPEED_KN: f64 = 0.5;

/// Anchor spring stiffness per unit displacement mass, 1/s^2.
const ANCHOR_STIFFNESS: f64 = 0.01;
/// Anchor damping per unit displacement mass, 1/s.
const ANCHOR_DAMPING: f64 = 0.2;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("order rejected: {0}")]
    OrderRejected(String),
    #[error("ship {0} is not in the scenario")]
    UnknownShip(String),
    #[error("dynamics: {0}")]
    Dynamics(String),
}

/// Named telegraph positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detent {
    Stop,
    DeadSlowAhead,
    SlowAhead,
    HalfAhead,
    FullAhead,
    DeadSlowAstern,
    SlowAstern,
    HalfAstern,
    FullAstern,
}

/// Telegraph detents as fractions of the rated shaft rate. Astern
/// positions are the ahead fractions scaled by `astern`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelegraphTable {
    pub dead_slow: f64,
    pub slow: f64,
    pub half: f64,
    pub full: f64,
    pub astern: f64,
}

impl Default for TelegraphTable {
    fn default() -> Self {
        TelegraphTable {
            dead_slow: 0.2,
            slow: 0.4,
            half: 0.7,
            full: 1.0,
            astern: 0.7,
        }
    }
}

impl TelegraphTable {
    pub fn fraction(&self, d: Detent) -> f64 {
        match d {
            Detent::Stop => 0.0,
            Detent::DeadSlowAhead => self.dead_slow,
            Detent::SlowAhead => self.slow,
            Detent::HalfAhead => self.half,
            Detent::FullAhead => self.full,
            Detent::DeadSlowAstern => -self.astern * self.dead_slow,
            Detent::SlowAstern => -self.astern * self.slow,
            Detent::HalfAstern => -self.astern * self.half,
            Detent::FullAstern => -self.astern * self.full,
        }
    }
}

/// A shaft rate in rev/s or a named detent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Telegraph {
    Rate(f64),
    Detent(Detent),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorOrder {
    Drop,
    Weigh,
}

/// One helm order; absent fields leave their setpoint unchanged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelmOrder {
    /// Rudder command, rad (+ starboard).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rudder: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub telegraph: Option<Telegraph>,
    /// Pitch lever in [-1, 1]; scales the telegraph shaft rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thrusters: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<AnchorOrder>,
}

/// Commanded setpoints after the latest accepted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setpoints {
    pub rudder: f64,
    /// Telegraph shaft rate before the pitch lever, rev/s.
    pub telegraph: f64,
    pub pitch: f64,
    /// Effective shaft command, rev/s.
    pub shaft: f64,
    pub thrusters: Vec<f64>,
    pub anchored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    pub amplitude: f64,
    pub period: f64,
    /// Direction the waves travel towards, deg.
    pub direction: f64,
}

/// Runtime environment change; absent fields are kept.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_kn: Option<f64>,
    /// Direction the current sets towards, deg.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_direction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wind_kn: Option<f64>,
    /// Direction the wind blows from, deg.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wind_direction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave: Option<WaveSpec>,
    /// Removes the wave when true.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calm: Option<bool>,
}

/// Conning display data for one completed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConningSnapshot {
    pub ship: String,
    pub step: u64,
    pub sim_time: f64,
    pub x: f64,
    pub y: f64,
    /// rad in [0, 2 pi)
    pub heading: f64,
    pub rudder: f64,
    pub rudder_ordered: f64,
    pub shaft: f64,
    pub shaft_ordered: f64,
    pub pitch_lever: f64,
    pub thrusters: Vec<f64>,
    pub thrusters_ordered: Vec<f64>,
    pub u: f64,
    pub v: f64,
    pub sog: f64,
    pub cog: f64,
    pub drift: f64,
    pub rate_of_turn: f64,
    pub heave: f64,
    pub pitch: f64,
    pub roll: f64,
    pub wind_speed: f64,
    pub wind_direction: f64,
    pub current_speed: f64,
    pub current_direction: f64,
    /// Charted depth at the ship's position; None outside the chart.
    pub depth: Option<f64>,
    pub depth_under_keel: Option<f64>,
    pub anchored: bool,
}

/// Attribute schema of the ShipState object class.
pub const SHIP_STATE_SCHEMA: &[(&str, &str)] = &[
    ("x", "m"),
    ("y", "m"),
    ("psi", "rad"),
    ("u", "m/s"),
    ("v", "m/s"),
    ("r", "rad/s"),
    ("delta", "rad"),
    ("n", "rev/s"),
    ("heave", "m"),
    ("pitch", "rad"),
    ("roll", "rad"),
    ("sog", "m/s"),
    ("cog", "rad"),
    ("length", "m"),
    ("beam", "m"),
    ("draft", "m"),
];

impl ConningSnapshot {
    /// ShipState attributes; every value is copied from this snapshot or
    /// from the ship's particulars.
    pub fn ship_state(&self, length: f64, beam: f64, draft: f64) -> Payload {
        let pairs = [
            ("x", self.x),
            ("y", self.y),
            ("psi", self.heading),
            ("u", self.u),
            ("v", self.v),
            ("r", self.rate_of_turn),
            ("delta", self.rudder),
            ("n", self.shaft),
            ("heave", self.heave),
            ("pitch", self.pitch),
            ("roll", self.roll),
            ("sog", self.sog),
            ("cog", self.cog),
            ("length", length),
            ("beam", beam),
            ("draft", draft),
        ];
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), Value::from(*v)))
            .collect()
    }

    pub fn payload(&self) -> Payload {
        to_payload(self)
    }
}

#[derive(Debug, Clone)]
pub struct BridgeSim {
    ship: ScenarioShip,
    port: PortGeometry,
    env: Environment,
    state: ManeuverState,
    sea: SeakeepingState,
    setpoints: Setpoints,
    anchor: Option<AnchorHold>,
    table: TelegraphTable,
    steps: u64,
    dt: f64,
}

impl BridgeSim {
    pub fn new(scenario: &Scenario, ship_id: &str, dt: f64) -> Result<Self, BridgeError> {
        let ship = scenario
            .ship(ship_id)
            .ok_or_else(|| BridgeError::UnknownShip(ship_id.to_string()))?
            .clone();
        Self::from_parts(ship, scenario.port.clone(), scenario.environment, dt)
    }

    pub fn from_parts(
        ship: ScenarioShip,
        port: PortGeometry,
        env: Environment,
        dt: f64,
    ) -> Result<Self, BridgeError> {
        if !(dt > 0.0 && dt <= 0.5) {
            return Err(BridgeError::Dynamics(format!("bad time step {dt}")));
        }
        let thrusters = vec![0.0; ship.config.thrusters.len()];
        let setpoints = Setpoints {
            rudder: ship.rudder_command,
            telegraph: ship.shaft_command,
            pitch: 1.0,
            shaft: ship.shaft_command,
            thrusters,
            anchored: false,
        };
        Ok(BridgeSim {
            state: ship.initial,
            ship,
            port,
            env,
            sea: SeakeepingState::default(),
            setpoints,
            anchor: None,
            table: TelegraphTable::default(),
            steps: 0,
            dt,
        })
    }

    pub fn with_telegraph(mut self, table: TelegraphTable) -> Self {
        self.table = table;
        self
    }

    pub fn ship(&self) -> &ScenarioShip {
        &self.ship
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn sim_time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn state(&self) -> &ManeuverState {
        &self.state
    }

    pub fn seakeeping(&self) -> &SeakeepingState {
        &self.sea
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn setpoints(&self) -> &Setpoints {
        &self.setpoints
    }

    fn sog(&self) -> f64 {
        let g = self.state.ground_velocity(&self.env);
        g[0].hypot(g[1])
    }

    /// Validates the whole order, then stores its setpoints together.
    pub fn apply_order(&mut self, order: &HelmOrder) -> Result<Setpoints, BridgeError> {
        let reject = |m: String| Err(BridgeError::OrderRejected(m));
        let cfg = &self.ship.config;
        let mut next = self.setpoints.clone();
        if let Some(r) = order.rudder {
            let limit = cfg.rudder.max_angle;
            if !r.is_finite() || r.abs() > limit * (1.0 + 1e-12) {
                return reject(format!(
                    "rudder {:.2} deg outside +/-{:.2} deg",
                    r.to_degrees(),
                    limit.to_degrees()
                ));
            }
            next.rudder = r;
        }
        if let Some(t) = order.telegraph {
            let max = cfg.engine.max_shaft_rate;
            let rate = match t {
                Telegraph::Rate(n) => n,
                Telegraph::Detent(d) => self.table.fraction(d) * max,
            };
            if !rate.is_finite() || rate.abs() > max * (1.0 + 1e-12) {
                return reject(format!("shaft rate {rate} rev/s outside +/-{max} rev/s"));
            }
            next.telegraph = rate;
        }
        if let Some(p) = order.pitch {
            if !(-1.0..=1.0).contains(&p) {
                return reject(format!("pitch lever {p} outside [-1, 1]"));
            }
            next.pitch = p;
        }
        if let Some(levels) = &order.thrusters {
            if levels.len() > cfg.thrusters.len() {
                return reject(format!(
                    "{} thruster levels for {} thrusters",
                    levels.len(),
                    cfg.thrusters.len()
                ));
            }
            if let Some(bad) = levels.iter().find(|l| !(-1.0..=1.0).contains(*l)) {
                return reject(format!("thruster level {bad} outside [-1, 1]"));
            }
            next.thrusters[..levels.len()].copy_from_slice(levels);
        }
        let mut anchor = self.anchor;
        match order.anchor {
            Some(AnchorOrder::Drop) if anchor.is_none() => {
                let sog_kn = ms_to_knots(self.sog());
                if sog_kn >= ANCHOR_MAX_SPEED_KN {
                    return reject(format!(
                        "anchor drop at {sog_kn:.2} kn, needs under {ANCHOR_MAX_SPEED_KN} kn"
                    ));
                }
                let mass = cfg.mass.mass;
                anchor = Some(AnchorHold {
                    x: self.state.x,
                    y: self.state.y,
                    stiffness: ANCHOR_STIFFNESS * mass,
                    damping: ANCHOR_DAMPING * mass,
                });
            }
            Some(AnchorOrder::Weigh) => anchor = None,
            _ => {}
        }
        next.shaft = next.telegraph * next.pitch;
        next.anchored = anchor.is_some();
        self.anchor = anchor;
        self.setpoints = next.clone();
        Ok(next)
    }

    pub fn set_environment(&mut self, update: &EnvironmentUpdate) -> Result<(), BridgeError> {
        let bad = |m: &str| Err(BridgeError::OrderRejected(m.to_string()));
        let mut env = self.env;
        let (cur_speed, cur_dir) = (
            env.current[0].hypot(env.current[1]),
            env.current[1].atan2(env.current[0]),
        );
        let speed = update.current_kn.map(knots_to_ms).unwrap_or(cur_speed);
        let dir = update
            .current_direction
            .map(f64::to_radians)
            .unwrap_or(cur_dir);
        if !(speed >= 0.0 && speed.is_finite() && dir.is_finite()) {
            return bad("current must be finite and non-negative");
        }
        env.current = [speed * dir.cos(), speed * dir.sin()];
        if update.wind_kn.is_some() || update.wind_direction.is_some() {
            let old = env.wind.unwrap_or(Wind {
                speed: 0.0,
                direction: 0.0,
            });
            let w = Wind {
                speed: update.wind_kn.map(knots_to_ms).unwrap_or(old.speed),
                direction: update
                    .wind_direction
                    .map(f64::to_radians)
                    .unwrap_or(old.direction),
            };
            if !(w.speed >= 0.0 && w.speed.is_finite() && w.direction.is_finite()) {
                return bad("wind must be finite and non-negative");
            }
            env.wind = (w.speed > 0.0).then_some(w);
        }
        if update.calm == Some(true) {
            env.wave = None;
        }
        if let Some(w) = update.wave {
            let wave = WaveState::from_period(
                w.amplitude,
                w.period,
                w.direction.to_radians(),
                env.gravity,
            )
            .map_err(|e| BridgeError::OrderRejected(e.to_string()))?;
            env.wave = Some(wave);
        }
        self.env = env;
        Ok(())
    }

    fn controls(&self) -> Controls {
        let mut thrusters = [0.0; MAX_THRUSTERS];
        thrusters[..self.setpoints.thrusters.len()].copy_from_slice(&self.setpoints.thrusters);
        Controls {
            rudder: self.setpoints.rudder,
            shaft: self.setpoints.shaft,
            thrusters,
            anchor: self.anchor,
        }
    }

    /// Advances one fixed step with the current setpoints.
    pub fn step(&mut self) -> Result<(), BridgeError> {
        let cfg = &self.ship.config;
        let next = step(&self.state, &self.controls(), cfg, &self.env, self.dt)
            .map_err(|e| BridgeError::Dynamics(e.to_string()))?;
        let sea = match params_for_ship(cfg, &self.env, &self.state)
            .map_err(|e| BridgeError::Dynamics(e.to_string()))?
        {
            Some(params) => step_seakeeping(&self.sea, &params, self.dt)
                .map_err(|e| BridgeError::Dynamics(e.to_string()))?,
            None => SeakeepingState::default(),
        };
        self.state = next;
        self.sea = sea;
        self.steps += 1;
        Ok(())
    }

    pub fn snapshot(&self) -> ConningSnapshot {
        let s = &self.state;
        let g = s.ground_velocity(&self.env);
        let sog = g[0].hypot(g[1]);
        let cog = if sog > 0.0 {
            wrap_two_pi(g[1].atan2(g[0]))
        } else {
            wrap_two_pi(s.psi)
        };
        let depth = self.port.depth_at([s.x, s.y]).ok();
        let (wind_speed, wind_direction) = self
            .env
            .wind
            .map(|w| (w.speed, w.direction))
            .unwrap_or((0.0, 0.0));
        let current_speed = self.env.current[0].hypot(self.env.current[1]);
        let current_direction = wrap_two_pi(self.env.current[1].atan2(self.env.current[0]));
        let n_thr = self.setpoints.thrusters.len();
        ConningSnapshot {
            ship: self.ship.id.clone(),
            step: self.steps,
            sim_time: self.sim_time(),
            x: s.x,
            y: s.y,
            heading: wrap_two_pi(s.psi),
            rudder: s.delta,
            rudder_ordered: self.setpoints.rudder,
            shaft: s.n,
            shaft_ordered: self.setpoints.shaft,
            pitch_lever: self.setpoints.pitch,
            thrusters: s.thrusters[..n_thr].to_vec(),
            thrusters_ordered: self.setpoints.thrusters.clone(),
            u: s.u,
            v: s.v,
            sog,
            cog,
            drift: s.drift_angle(),
            rate_of_turn: s.r,
            heave: self.sea.heave,
            pitch: self.sea.pitch,
            roll: self.sea.roll,
            wind_speed,
            wind_direction,
            current_speed,
            current_direction,
            depth,
            depth_under_keel: depth.map(|d| d - self.ship.draft()),
            anchored: self.anchor.is_some(),
        }
    }

    /// ShipState attributes for the current step.
    pub fn ship_state(&self) -> Payload {
        let p = &self.ship.config.particulars;
        self.snapshot().ship_state(p.length_pp, p.breadth, p.draft)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use harbour_core::port::parse_scenario;
    use std::path::Path;

    fn sim_at(x: f64, y: f64, speed_kn: f64) -> BridgeSim {
        let text = format!(
            r#"
schema = 1
name = "t"
geometry = "salerno"
[[ships]]
id = "pilot"
ship = "kriso"
role = "piloted"
position = [{x}, {y}]
heading = 0.0
speed_kn = {speed_kn}
"#
        );
        let scenario = parse_scenario(&text, Path::new("t.toml")).unwrap();
        BridgeSim::new(&scenario, "pilot", DEFAULT_DT).unwrap()
    }

    #[test]
    fn full_ahead_uses_rated_rate() {
        let mut sim = sim_at(-2500.0, 500.0, 0.0);
        let max = sim.ship().config.engine.max_shaft_rate;
        let sp = sim
            .apply_order(&HelmOrder {
                telegraph: Some(Telegraph::Detent(Detent::FullAhead)),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(sp.shaft, max);
        let sp = sim
            .apply_order(&HelmOrder {
                telegraph: Some(Telegraph::Detent(Detent::FullAstern)),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(sp.shaft, -0.7 * max);
    }

    #[test]
    fn anchor_at_speed_rejected() {
        let mut sim = sim_at(-2500.0, 500.0, 6.0);
        let drop = HelmOrder {
            anchor: Some(AnchorOrder::Drop),
            ..Default::default()
        };
        assert!(matches!(
            sim.apply_order(&drop),
            Err(BridgeError::OrderRejected(_))
        ));
        assert!(!sim.setpoints().anchored);
    }

    #[test]
    fn anchor_holds_position() {
        let mut sim = sim_at(-300.0, 500.0, 0.0);
        sim.apply_order(&HelmOrder {
            anchor: Some(AnchorOrder::Drop),
            ..Default::default()
        })
        .unwrap();
        sim.set_environment(&EnvironmentUpdate {
            current_kn: Some(0.5),
            current_direction: Some(90.0),
            ..Default::default()
        })
        .unwrap();
        for _ in 0..6000 {
            sim.step().unwrap();
        }
        let s = sim.state();
        let off = (s.x + 300.0).hypot(s.y - 500.0);
        assert!(off < 50.0, "dragged {off} m");
    }

    #[test]
    fn last_rudder_order_wins() {
        let mut sim = sim_at(-2500.0, 500.0, 6.0);
        let order = |deg: f64| HelmOrder {
            rudder: Some(deg.to_radians()),
            ..Default::default()
        };
        sim.apply_order(&order(-30.0)).unwrap();
        for _ in 0..20 {
            sim.step().unwrap();
        }
        sim.apply_order(&order(30.0)).unwrap();
        assert_eq!(sim.setpoints().rudder, 30f64.to_radians());
        assert!(sim.apply_order(&order(40.0)).is_err());
        assert_eq!(sim.setpoints().rudder, 30f64.to_radians());
    }

    #[test]
    fn depth_under_keel_at_rest_in_basin() {
        let sim = sim_at(-300.0, 500.0, 0.0);
        let snap = sim.snapshot();
        assert_eq!(snap.depth, Some(12.0));
        assert!((snap.depth_under_keel.unwrap() - (12.0 - sim.ship().draft())).abs() < 1e-12);
        assert!((snap.depth_under_keel.unwrap() - 1.21).abs() < 0.01);
    }

    #[test]
    fn sog_includes_current() {
        let mut sim = sim_at(-300.0, 500.0, 0.0);
        sim.set_environment(&EnvironmentUpdate {
            current_kn: Some(ms_to_knots(1.0)),
            current_direction: Some(0.0),
            ..Default::default()
        })
        .unwrap();
        let snap = sim.snapshot();
        assert!((snap.sog - 1.0).abs() < 1e-12);
        assert_eq!(sim.snapshot(), snap);
    }

    #[test]
    fn rudder_slews_from_next_step() {
        let mut sim = sim_at(-2500.0, 500.0, 6.0);
        for _ in 0..200 {
            sim.step().unwrap();
        }
        let before = sim.state().delta;
        sim.apply_order(&HelmOrder {
            rudder: Some(20f64.to_radians()),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(sim.state().delta, before);
        sim.step().unwrap();
        let rate = (sim.state().delta - before) / DEFAULT_DT;
        let max = sim.ship().config.rudder.max_rate;
        assert!(rate > 0.0 && rate <= max * (1.0 + 1e-12));
        assert!((rate - max).abs() < 1e-9);
    }
}
