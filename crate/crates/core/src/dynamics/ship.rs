//! Static description of a ship: particulars, mass, coefficients and the
//! actuator models.

use serde::{Deserialize, Serialize};

use crate::error::DynamicsError;

/// Maximum number of side thrusters a ship may carry.
pub const MAX_THRUSTERS: usize = 4;

/// Main hull dimensions. Lengths in metres, `x_g` positive forward of
/// midship.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShipParticulars {
    pub length_pp: f64,
    pub length_wl: f64,
    pub breadth: f64,
    pub hull_depth: f64,
    pub draft: f64,
    pub displacement_volume: f64,
    pub block_coeff: f64,
    pub x_g: f64,
    pub wetted_surface: f64,
    /// Total resistance coefficient C_T.
    pub resistance_coeff: f64,
    /// Yaw radius of gyration as a fraction of `length_pp`.
    pub yaw_gyradius_fraction: f64,
}

impl ShipParticulars {
    /// Denny's wetted-surface approximation, S = 1.025 L (C_b B + 1.7 d).
    pub fn denny_wetted_surface(length_pp: f64, breadth: f64, draft: f64, block_coeff: f64) -> f64 {
        1.025 * length_pp * (block_coeff * breadth + 1.7 * draft)
    }

    /// Draft implied by the block coefficient and displaced volume.
    pub fn draft_from_displacement(
        displacement_volume: f64,
        length_pp: f64,
        breadth: f64,
        block_coeff: f64,
    ) -> f64 {
        displacement_volume / (block_coeff * length_pp * breadth)
    }

    pub fn validate(&self) -> Result<(), String> {
        let lengths = [
            ("length_pp", self.length_pp),
            ("length_wl", self.length_wl),
            ("breadth", self.breadth),
            ("hull_depth", self.hull_depth),
            ("draft", self.draft),
            ("displacement_volume", self.displacement_volume),
            ("wetted_surface", self.wetted_surface),
        ];
        for (name, value) in lengths {
            if !(value.is_finite() && value > 0.0) {
                return Err(format!("{name} must be positive, got {value}"));
            }
        }
        if !(self.block_coeff > 0.0 && self.block_coeff < 1.0) {
            return Err(format!(
                "block_coeff must lie in (0, 1), got {}",
                self.block_coeff
            ));
        }
        if self.draft >= self.hull_depth {
            return Err(format!(
                "draft {} must be smaller than hull_depth {}",
                self.draft, self.hull_depth
            ));
        }
        let box_volume = self.block_coeff * self.length_pp * self.breadth * self.draft;
        let mismatch = (self.displacement_volume - box_volume).abs() / self.displacement_volume;
        if mismatch > 0.02 {
            return Err(format!(
                "displacement_volume {} disagrees with C_b*L*B*d = {:.1} by {:.1}%",
                self.displacement_volume,
                box_volume,
                mismatch * 100.0
            ));
        }
        if self.wetted_surface <= self.length_pp * self.draft {
            return Err(format!(
                "wetted_surface {} must exceed L*d = {:.1}",
                self.wetted_surface,
                self.length_pp * self.draft
            ));
        }
        if !(self.resistance_coeff.is_finite() && self.resistance_coeff >= 0.0) {
            return Err("resistance_coeff must be finite and non-negative".into());
        }
        if !(self.yaw_gyradius_fraction > 0.0) {
            return Err("yaw_gyradius_fraction must be positive".into());
        }
        Ok(())
    }
}

/// Rigid-body and added masses in kg, inertias in kg m^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassProperties {
    pub mass: f64,
    pub added_mass_x: f64,
    pub added_mass_y: f64,
    pub yaw_inertia: f64,
    pub added_yaw_inertia: f64,
}

impl MassProperties {
    /// Slender-hull defaults: m_x = 0.05 m, m_y = 0.9 m,
    /// I_zz = m (k L)^2 and i_zz = 0.1 I_zz.
    pub fn estimate(particulars: &ShipParticulars, water_density: f64) -> Self {
        let mass = water_density * particulars.displacement_volume;
        let gyradius = particulars.yaw_gyradius_fraction * particulars.length_pp;
        let yaw_inertia = mass * gyradius * gyradius;
        MassProperties {
            mass,
            added_mass_x: 0.05 * mass,
            added_mass_y: 0.9 * mass,
            yaw_inertia,
            added_yaw_inertia: 0.1 * yaw_inertia,
        }
    }

    pub fn validate(
        &self,
        particulars: &ShipParticulars,
        water_density: f64,
    ) -> Result<(), String> {
        for (name, value) in [
            ("mass", self.mass),
            ("added_mass_x", self.added_mass_x),
            ("added_mass_y", self.added_mass_y),
            ("yaw_inertia", self.yaw_inertia),
            ("added_yaw_inertia", self.added_yaw_inertia),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(format!(
                    "{name} must be finite and non-negative, got {value}"
                ));
            }
        }
        if self.added_mass_x >= self.added_mass_y {
            return Err("added_mass_x must be smaller than added_mass_y".into());
        }
        let displaced = water_density * particulars.displacement_volume;
        if (self.mass - displaced).abs() > 1e-3 * displaced {
            return Err(format!(
                "mass {} differs from rho*volume = {:.4e} by more than 0.1%",
                self.mass, displaced
            ));
        }
        if self.mass + self.added_mass_x <= 0.0 || self.yaw_inertia + self.added_yaw_inertia <= 0.0
        {
            return Err("effective mass and inertia must be positive".into());
        }
        Ok(())
    }
}

/// Non-dimensional hull derivatives in the cubic polynomial form.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HydroDerivatives {
    pub x0: f64,
    pub xvr: f64,
    pub yv: f64,
    pub yr: f64,
    pub yvvv: f64,
    pub yvvr: f64,
    pub yvrr: f64,
    pub yrrr: f64,
    pub nv: f64,
    pub nr: f64,
    pub nvvv: f64,
    pub nvvr: f64,
    pub nvrr: f64,
    pub nrrr: f64,
}

impl HydroDerivatives {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.x0, self.xvr, self.yv, self.yr, self.yvvv, self.yvvr, self.yvrr, self.yrrr,
            self.nv, self.nr, self.nvvv, self.nvvr, self.nvrr, self.nrrr,
        ];
        if all.iter().any(|c| !c.is_finite()) {
            return Err("hull derivatives must be finite".into());
        }
        if self.x0 <= 0.0 {
            return Err(format!("x0 must be positive, got {}", self.x0));
        }
        if self.yv >= 0.0 {
            return Err(format!("yv must be negative, got {}", self.yv));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationHand {
    Right,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropellerModel {
    pub diameter: f64,
    pub blade_count: u32,
    pub pitch_ratio: f64,
    pub rotation_hand: RotationHand,
    pub wake_fraction: f64,
    pub thrust_deduction: f64,
    /// K_T = kt[0] + kt[1] J + kt[2] J^2.
    pub kt_coeffs: [f64; 3],
}

impl PropellerModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.diameter > 0.0) {
            return Err("propeller diameter must be positive".into());
        }
        if !(0.0..1.0).contains(&self.wake_fraction) {
            return Err("wake_fraction must lie in [0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.thrust_deduction) {
            return Err("thrust_deduction must lie in [0, 1)".into());
        }
        if !(self.kt_coeffs[0] > 0.0) {
            return Err("K_T at J = 0 must be positive".into());
        }
        Ok(())
    }
}

/// Which sign pattern the rudder-hull interaction terms use.
///
/// `Printed` gives Y_R = -(1 - a_H) F_N cos(delta) and
/// N_R = -(x_R - a_H x_H) F_N cos(delta); `Conventional` flips both to `+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionSign {
    Printed,
    Conventional,
}

impl InteractionSign {
    pub fn factor(self) -> f64 {
        match self {
            InteractionSign::Printed => -1.0,
            InteractionSign::Conventional => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RudderModel {
    /// Lifting (projected lateral) area, m^2.
    pub area: f64,
    /// Total rudder surface, m^2. Informational; the lift uses `area`.
    pub surface_area: f64,
    pub aspect_ratio: f64,
    /// t_R
    pub drag_coeff: f64,
    /// a_H
    pub interaction_coeff: f64,
    /// x_R' (negative: abaft midship)
    pub x_r: f64,
    /// x_H'
    pub x_h: f64,
    pub max_angle: f64,
    pub max_rate: f64,
    pub interaction_sign: InteractionSign,
    /// Flow-straightening coefficient gamma_R.
    pub flow_straightening: f64,
    /// Effective longitudinal lever l_R' used for the inflow angle.
    pub inflow_lever: f64,
    /// Wake ratio between rudder and propeller positions (epsilon).
    pub wake_ratio: f64,
    /// Propeller race acceleration factor (kappa).
    pub race_factor: f64,
    /// Propeller diameter over rudder span (eta).
    pub race_coverage: f64,
}

impl RudderModel {
    /// Fujii's normal-force slope, f_alpha = 6.13 L / (L + 2.25).
    pub fn lift_slope(&self) -> f64 {
        6.13 * self.aspect_ratio / (self.aspect_ratio + 2.25)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.area > 0.0) || !(self.aspect_ratio > 0.0) {
            return Err("rudder area and aspect ratio must be positive".into());
        }
        if !(0.0..1.0).contains(&self.drag_coeff) {
            return Err("rudder drag_coeff t_R must lie in [0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.interaction_coeff) {
            return Err("rudder interaction_coeff a_H must lie in [0, 1)".into());
        }
        if !(self.max_rate > 0.0) {
            return Err("rudder max_rate must be positive".into());
        }
        if !(self.max_angle > 0.0) {
            return Err("rudder max_angle must be positive".into());
        }
        if self.x_r >= 0.0 {
            return Err("rudder x_r must be negative (abaft midship)".into());
        }
        if !(0.0..=1.0).contains(&self.race_coverage) {
            return Err("race_coverage must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Side thruster producing a purely lateral force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thruster {
    pub name: String,
    /// Longitudinal position from midship, m (+fwd).
    pub x: f64,
    /// Force at level 1, N.
    pub rated_thrust: f64,
    /// Speed at which the thruster has lost all effect, m/s.
    pub cutoff_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineModel {
    /// First-order lag time constant, s.
    pub time_constant: f64,
    /// Largest shaft rate the telegraph can order, rev/s.
    pub max_shaft_rate: f64,
}

/// Quadratic wind-load coefficients. Disabled unless `enabled`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindModel {
    pub enabled: bool,
    pub air_density: f64,
    pub frontal_area: f64,
    pub lateral_area: f64,
    pub cx: f64,
    pub cy: f64,
    pub cn: f64,
}

impl Default for WindModel {
    fn default() -> Self {
        WindModel {
            enabled: false,
            air_density: 1.225,
            frontal_area: 0.0,
            lateral_area: 0.0,
            cx: 0.0,
            cy: 0.0,
            cn: 0.0,
        }
    }
}

/// Hull inputs needed by the seakeeping oscillators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeakeepingHull {
    pub gm_t: f64,
    /// Natural roll period, s.
    pub roll_period: f64,
    /// Roll damping as a fraction of critical, used when `roll_damping` is unset.
    pub roll_damping_ratio: f64,
    pub roll_damping: Option<f64>,
    pub roll_excitation: Option<f64>,
}

impl SeakeepingHull {
    /// T_N = 2 pi k_xx / sqrt(g GM) with k_xx = 0.4 B.
    pub fn estimate_roll_period(breadth: f64, gm_t: f64, gravity: f64) -> f64 {
        2.0 * std::f64::consts::PI * 0.4 * breadth / (gravity * gm_t).sqrt()
    }
}

/// Everything needed to simulate one ship.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShipConfig {
    pub name: String,
    pub rudder_type: String,
    pub particulars: ShipParticulars,
    pub mass: MassProperties,
    pub derivatives: HydroDerivatives,
    pub propeller: PropellerModel,
    pub rudder: RudderModel,
    pub thrusters: Vec<Thruster>,
    pub engine: EngineModel,
    pub wind: WindModel,
    pub seakeeping: SeakeepingHull,
}

impl ShipConfig {
    pub fn validate(&self, water_density: f64) -> Result<(), DynamicsError> {
        let check = |r: Result<(), String>| r.map_err(DynamicsError::Config);
        check(self.particulars.validate())?;
        check(self.mass.validate(&self.particulars, water_density))?;
        check(self.derivatives.validate())?;
        check(self.propeller.validate())?;
        check(self.rudder.validate())?;
        if self.thrusters.len() > MAX_THRUSTERS {
            return Err(DynamicsError::Config(format!(
                "at most {MAX_THRUSTERS} thrusters supported"
            )));
        }
        if !(self.engine.time_constant > 0.0 && self.engine.max_shaft_rate > 0.0) {
            return Err(DynamicsError::Config(
                "engine time_constant and max_shaft_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}
