//! Planar 3-DOF maneuvering model in the MMG modular form.
//!
//! The earth frame is x north, y east, heading `psi` clockwise from north.
//! Body velocities `u` (surge, forward) and `v` (sway, starboard) are
//! through-water velocities; a uniform current only enters the position
//! kinematics. Positive rudder angle turns the ship to starboard
//! (positive yaw rate).

mod actuator;
mod forces;
mod integrate;
mod nondim;
mod ship;

pub use actuator::actuator_update;
pub use forces::{
    advance_coefficient, anchor_forces, fit_kt_coeffs, hull_forces, hull_forces_dimensional,
    propeller_thrust, resistance_coefficient, rudder_forces, rudder_forces_dimensional,
    rudder_normal_force, thrust_coefficient, thruster_forces, wind_forces, RudderInflow,
};
pub use integrate::{derivatives, evaluate_forces, step, StateRate};
pub use nondim::{
    dimensionalize_forces, nondimensionalize, nondimensionalize_forces, speed_magnitude,
    NonDimState,
};
pub use ship::{
    EngineModel, HydroDerivatives, InteractionSign, MassProperties, PropellerModel, RotationHand,
    RudderModel, SeakeepingHull, ShipConfig, ShipParticulars, Thruster, WindModel, MAX_THRUSTERS,
};

use serde::{Deserialize, Serialize};

use crate::seakeeping::WaveState;

/// Below this through-water speed (m/s) the hull polynomial is evaluated at
/// the floor speed instead of dividing by `U`.
pub const SPEED_FLOOR: f64 = 0.05;

/// Shaft-rate guard (rev/s) under which the propeller produces no thrust.
pub const SHAFT_RATE_GUARD: f64 = 1e-3;

/// Kinematic and actuator state of one ship.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ManeuverState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    /// Actual rudder angle, rad.
    pub delta: f64,
    /// Actual shaft rate, rev/s.
    pub n: f64,
    pub thrusters: [f64; MAX_THRUSTERS],
}

impl ManeuverState {
    /// Straight-ahead state at the given surge speed and shaft rate.
    pub fn underway(u: f64, n: f64) -> Self {
        ManeuverState {
            u,
            n,
            ..Default::default()
        }
    }

    /// Drift angle, atan2(-v, u).
    pub fn drift_angle(&self) -> f64 {
        (-self.v).atan2(self.u)
    }

    pub fn speed(&self) -> f64 {
        speed_magnitude(self)
    }

    /// Earth-frame velocity over ground, including current.
    pub fn ground_velocity(&self, env: &Environment) -> [f64; 2] {
        let (s, c) = self.psi.sin_cos();
        [
            self.u * c - self.v * s + env.current[0],
            self.u * s + self.v * c + env.current[1],
        ]
    }

    pub fn is_finite(&self) -> bool {
        [
            self.x, self.y, self.psi, self.u, self.v, self.r, self.delta, self.n,
        ]
        .iter()
        .chain(self.thrusters.iter())
        .all(|v| v.is_finite())
    }
}

/// True wind as speed plus the direction it blows from (rad, clockwise from north).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wind {
    pub speed: f64,
    pub direction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub water_density: f64,
    pub gravity: f64,
    /// Earth-frame current velocity [north, east], m/s.
    pub current: [f64; 2],
    pub wind: Option<Wind>,
    pub wave: Option<WaveState>,
}

impl Default for Environment {
    fn default() -> Self {
        Environment {
            water_density: 1025.0,
            gravity: 9.81,
            current: [0.0, 0.0],
            wind: None,
            wave: None,
        }
    }
}

impl Environment {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.water_density > 0.0) {
            return Err("water density must be positive".into());
        }
        if !(self.gravity > 0.0) {
            return Err("gravity must be positive".into());
        }
        Ok(())
    }
}

/// Anchor holding the ship to a fixed earth point with a spring-damper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorHold {
    pub x: f64,
    pub y: f64,
    pub stiffness: f64,
    pub damping: f64,
}

/// Commanded setpoints. Actual actuator positions live in [`ManeuverState`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Controls {
    pub rudder: f64,
    pub shaft: f64,
    pub thrusters: [f64; MAX_THRUSTERS],
    pub anchor: Option<AnchorHold>,
}

/// Surge force, sway force and yaw moment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Force3 {
    pub x: f64,
    pub y: f64,
    pub n: f64,
}

impl Force3 {
    pub fn new(x: f64, y: f64, n: f64) -> Self {
        Force3 { x, y, n }
    }
}

/// Total external load with its per-source breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForceSet {
    pub x: f64,
    pub y: f64,
    pub n: f64,
    pub hull: Force3,
    pub propeller: Force3,
    pub rudder: Force3,
    pub thruster: Force3,
    pub wind: Force3,
    pub anchor: Force3,
}

impl ForceSet {
    /// Builds the set; totals are the component sums in a fixed order.
    pub fn from_components(
        hull: Force3,
        propeller: Force3,
        rudder: Force3,
        thruster: Force3,
        wind: Force3,
        anchor: Force3,
    ) -> Self {
        let parts = [hull, propeller, rudder, thruster, wind, anchor];
        let sum = |f: fn(&Force3) -> f64| parts.iter().map(f).fold(0.0, |a, b| a + b);
        ForceSet {
            x: sum(|f| f.x),
            y: sum(|f| f.y),
            n: sum(|f| f.n),
            hull,
            propeller,
            rudder,
            thruster,
            wind,
            anchor,
        }
    }

    pub fn components(&self) -> [Force3; 6] {
        [
            self.hull,
            self.propeller,
            self.rudder,
            self.thruster,
            self.wind,
            self.anchor,
        ]
    }
}
