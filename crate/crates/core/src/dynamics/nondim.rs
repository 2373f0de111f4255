use super::{Environment, Force3, ManeuverState, MassProperties, ShipParticulars, SPEED_FLOOR};
use crate::error::DynamicsError;

/// Non-dimensional masses and velocities. Masses are scaled by
/// 0.5 rho L^2 d, `v` by U and `r` by U/L.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonDimState {
    pub m: f64,
    pub m_x: f64,
    pub m_y: f64,
    pub v: f64,
    pub r: f64,
}

/// Through-water speed U = sqrt(u^2 + v^2).
pub fn speed_magnitude(state: &ManeuverState) -> f64 {
    state.u.hypot(state.v)
}

pub(crate) fn mass_scale(particulars: &ShipParticulars, env: &Environment) -> f64 {
    0.5 * env.water_density * particulars.length_pp * particulars.length_pp * particulars.draft
}

pub fn nondimensionalize(
    state: &ManeuverState,
    particulars: &ShipParticulars,
    mass: &MassProperties,
    env: &Environment,
) -> Result<NonDimState, DynamicsError> {
    let speed = speed_magnitude(state);
    if speed < SPEED_FLOOR {
        return Err(DynamicsError::DegenerateSpeed(speed));
    }
    Ok(nondim_at(state, particulars, mass, env, speed))
}

/// Same scaling as [`nondimensionalize`] but with an explicit reference
/// speed, used by the low-speed branch.
pub(crate) fn nondim_at(
    state: &ManeuverState,
    particulars: &ShipParticulars,
    mass: &MassProperties,
    env: &Environment,
    speed: f64,
) -> NonDimState {
    let scale = mass_scale(particulars, env);
    NonDimState {
        m: mass.mass / scale,
        m_x: mass.added_mass_x / scale,
        m_y: mass.added_mass_y / scale,
        v: state.v / speed,
        r: state.r * particulars.length_pp / speed,
    }
}

/// X = X' q L d U^2 / L, Y likewise, N = N' 0.5 rho L^2 d U^2.
pub fn dimensionalize_forces(
    x: f64,
    y: f64,
    n: f64,
    particulars: &ShipParticulars,
    env: &Environment,
    speed: f64,
) -> Force3 {
    let force_scale =
        0.5 * env.water_density * particulars.length_pp * particulars.draft * speed * speed;
    Force3::new(
        x * force_scale,
        y * force_scale,
        n * force_scale * particulars.length_pp,
    )
}

/// Inverse of [`dimensionalize_forces`]; `speed` must be positive.
pub fn nondimensionalize_forces(
    force: Force3,
    particulars: &ShipParticulars,
    env: &Environment,
    speed: f64,
) -> (f64, f64, f64) {
    let force_scale =
        0.5 * env.water_density * particulars.length_pp * particulars.draft * speed * speed;
    (
        force.x / force_scale,
        force.y / force_scale,
        force.n / (force_scale * particulars.length_pp),
    )
}
