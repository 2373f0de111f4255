//! Fast-time maneuvering trials: circle, zigzag and stop.
//!
//! Each trial first trims the shaft rate so the ship holds the approach
//! speed straight ahead, then runs the scripted maneuver from that steady
//! state and records every integration step.

mod metrics;
mod record;

pub use metrics::{
    compute_metrics, fit_circle, CircleMetrics, StopMetrics, TrialMetrics, ZigzagMetrics,
};
pub use record::{
    export_record, import_record, record_csv, record_hash, TrialRecord, TrialSample, CSV_HEADER,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{evaluate_forces, step, Controls, Environment, ManeuverState, ShipConfig};
use crate::error::DynamicsError;
use crate::parallel::par_map;
use crate::units::{knots_to_ms, wrap_pi, KNOT};

/// Stop trials end below this speed, m/s.
pub const STOP_SPEED: f64 = 0.1 * KNOT;

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("no shaft rate up to {max_rate:.3} rev/s reaches {speed:.3} m/s")]
    TrimFailure { speed: f64, max_rate: f64 },
    #[error("maneuver incomplete after {sim_time:.1} s of simulated time")]
    Timeout { sim_time: f64 },
    #[error("record does not cover the maneuver: {0}")]
    IncompleteManeuver(String),
    #[error("invalid trial: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialKind {
    Circle,
    Zigzag,
    Stop,
}

/// Shaft order applied when the maneuver starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ShaftOrder {
    /// Keep the trimmed approach rate.
    Hold,
    Stop,
    /// Explicit rate, rev/s.
    Rate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub kind: TrialKind,
    /// m/s
    pub approach_speed: f64,
    /// Circle rudder angle, rad. Positive turns to starboard.
    pub rudder_angle: f64,
    /// Zigzag execute angle, rad; its sign picks the first turn direction.
    pub zigzag_rudder: f64,
    /// Zigzag heading switch angle, rad (positive).
    pub zigzag_switch: f64,
    pub shaft_order: ShaftOrder,
    pub dt: f64,
    pub max_sim_time: f64,
}

impl TrialSpec {
    pub fn circle(speed_kn: f64, rudder_deg: f64) -> Self {
        TrialSpec {
            kind: TrialKind::Circle,
            approach_speed: knots_to_ms(speed_kn),
            rudder_angle: rudder_deg.to_radians(),
            zigzag_rudder: 0.0,
            zigzag_switch: 0.0,
            shaft_order: ShaftOrder::Hold,
            dt: 0.1,
            max_sim_time: 3600.0,
        }
    }

    /// `exec_deg` negative starts the zigzag to port.
    pub fn zigzag(speed_kn: f64, exec_deg: f64, switch_deg: f64) -> Self {
        TrialSpec {
            kind: TrialKind::Zigzag,
            approach_speed: knots_to_ms(speed_kn),
            rudder_angle: 0.0,
            zigzag_rudder: exec_deg.to_radians(),
            zigzag_switch: switch_deg.abs().to_radians(),
            shaft_order: ShaftOrder::Hold,
            dt: 0.1,
            max_sim_time: 3600.0,
        }
    }

    /// Crash stop with the shaft stopped. Coasting down on quadratic
    /// resistance alone takes many hours, hence the coarse step.
    pub fn stop(speed_kn: f64) -> Self {
        TrialSpec {
            kind: TrialKind::Stop,
            approach_speed: knots_to_ms(speed_kn),
            rudder_angle: 0.0,
            zigzag_rudder: 0.0,
            zigzag_switch: 0.0,
            shaft_order: ShaftOrder::Stop,
            dt: 1.0,
            max_sim_time: 400_000.0,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_max_sim_time(mut self, t: f64) -> Self {
        self.max_sim_time = t;
        self
    }

    pub fn validate(&self, cfg: &ShipConfig) -> Result<(), TrialError> {
        if !(self.approach_speed > 0.0) {
            return Err(TrialError::InvalidSpec(
                "approach speed must be positive".into(),
            ));
        }
        let limit = cfg.rudder.max_angle;
        if self.rudder_angle.abs() > limit * (1.0 + 1e-12)
            || self.zigzag_rudder.abs() > limit * (1.0 + 1e-12)
        {
            return Err(TrialError::InvalidSpec(format!(
                "rudder angle beyond {:.1} deg",
                limit.to_degrees()
            )));
        }
        if self.kind == TrialKind::Zigzag
            && !(self.zigzag_switch > 0.0 && self.zigzag_rudder != 0.0)
        {
            return Err(TrialError::InvalidSpec(
                "zigzag needs non-zero execute and switch angles".into(),
            ));
        }
        if self.kind == TrialKind::Circle && self.rudder_angle == 0.0 {
            return Err(TrialError::InvalidSpec(
                "circle needs a non-zero rudder angle".into(),
            ));
        }
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return Err(TrialError::Dynamics(DynamicsError::BadTimeStep(self.dt)));
        }
        if !(self.max_sim_time > 0.0) {
            return Err(TrialError::InvalidSpec(
                "max_sim_time must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The four trials of the reference scenario battery.
pub fn standard_battery() -> Vec<(&'static str, TrialSpec)> {
    vec![
        ("circle_8kn_35port", TrialSpec::circle(8.0, -35.0)),
        ("circle_10kn_35stbd", TrialSpec::circle(10.0, 35.0)),
        ("zigzag_20_20_5kn", TrialSpec::zigzag(5.0, -20.0, 20.0)),
        ("zigzag_10_10_5kn", TrialSpec::zigzag(5.0, 10.0, 10.0)),
    ]
}

/// Shaft rate that balances surge force at `speed` straight ahead.
///
/// Bisection on the net surge force, which grows monotonically with the
/// shaft rate.
pub fn trim_shaft_rate(cfg: &ShipConfig, env: &Environment, speed: f64) -> Result<f64, TrialError> {
    let net = |n: f64| {
        let s = ManeuverState::underway(speed, n);
        evaluate_forces(&s, &Controls::default(), cfg, env).x
    };
    let mut lo = 0.0;
    let mut hi = cfg.engine.max_shaft_rate;
    if net(hi) < 0.0 {
        return Err(TrialError::TrimFailure {
            speed,
            max_rate: hi,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if net(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Zigzag rudder logic, shared by the runner and the metrics so both agree
/// on when the rudder was reversed.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ZigzagLogic {
    pub direction: f64,
    pub switch: f64,
    pub executes: u32,
}

impl ZigzagLogic {
    pub fn new(exec: f64, switch: f64) -> Self {
        ZigzagLogic {
            direction: exec.signum(),
            switch,
            executes: 1,
        }
    }

    /// Returns true when this heading deviation triggers a reversal.
    pub fn update(&mut self, deviation: f64) -> bool {
        if self.direction * deviation >= self.switch {
            self.direction = -self.direction;
            self.executes += 1;
            true
        } else {
            false
        }
    }
}

/// Runs one trial from a trimmed straight approach.
pub fn run_trial(
    spec: &TrialSpec,
    cfg: &ShipConfig,
    env: &Environment,
) -> Result<TrialRecord, TrialError> {
    spec.validate(cfg)?;
    let n_trim = trim_shaft_rate(cfg, env, spec.approach_speed)?;
    let mut state = ManeuverState::underway(spec.approach_speed, n_trim);
    let shaft = match spec.shaft_order {
        ShaftOrder::Hold => n_trim,
        ShaftOrder::Stop => 0.0,
        ShaftOrder::Rate(n) => n,
    };
    let mut controls = Controls {
        rudder: match spec.kind {
            TrialKind::Circle => spec.rudder_angle,
            TrialKind::Zigzag => spec.zigzag_rudder,
            TrialKind::Stop => 0.0,
        },
        shaft,
        ..Default::default()
    };

    let psi0 = state.psi;
    let mut record = TrialRecord::new(spec.dt);
    record.push(0.0, &state);

    let mut turned = 0.0;
    let mut zigzag = ZigzagLogic::new(spec.zigzag_rudder, spec.zigzag_switch);
    let mut last_dev = 0.0;
    let max_steps = (spec.max_sim_time / spec.dt).ceil() as u64;
    let mut k: u64 = 0;
    loop {
        if k >= max_steps {
            return Err(TrialError::Timeout {
                sim_time: k as f64 * spec.dt,
            });
        }
        let prev_psi = state.psi;
        state = step(&state, &controls, cfg, env, spec.dt)?;
        k += 1;
        let t = k as f64 * spec.dt;
        record.push(t, &state);

        match spec.kind {
            TrialKind::Circle => {
                turned += wrap_pi(state.psi - prev_psi).abs();
                if turned >= 3.0 * std::f64::consts::PI {
                    break;
                }
            }
            TrialKind::Zigzag => {
                let dev = wrap_pi(state.psi - psi0);
                if zigzag.executes >= 4 {
                    // done once the heading peaks after the last execute
                    if (dev - last_dev) * zigzag.direction > 0.0 {
                        break;
                    }
                } else if zigzag.update(dev) {
                    controls.rudder = zigzag.direction * spec.zigzag_rudder.abs();
                }
                last_dev = dev;
            }
            TrialKind::Stop => {
                if state.speed() < STOP_SPEED {
                    break;
                }
            }
        }
    }
    Ok(record)
}

/// Runs a set of trials, in parallel when the `parallel` feature is on.
pub fn run_battery(
    specs: &[TrialSpec],
    cfg: &ShipConfig,
    env: &Environment,
) -> Vec<Result<(TrialRecord, TrialMetrics), TrialError>> {
    par_map(specs, |spec| run_and_measure(spec, cfg, env))
}

/// Sequential counterpart of [`run_battery`], always available.
pub fn run_battery_sequential(
    specs: &[TrialSpec],
    cfg: &ShipConfig,
    env: &Environment,
) -> Vec<Result<(TrialRecord, TrialMetrics), TrialError>> {
    specs
        .iter()
        .map(|spec| run_and_measure(spec, cfg, env))
        .collect()
}

pub fn run_and_measure(
    spec: &TrialSpec,
    cfg: &ShipConfig,
    env: &Environment,
) -> Result<(TrialRecord, TrialMetrics), TrialError> {
    let record = run_trial(spec, cfg, env)?;
    let metrics = compute_metrics(&record, spec)?;
    Ok((record, metrics))
}
