use super::{EngineModel, RudderModel};
use crate::error::DynamicsError;

/// Advances the rudder and shaft towards their commands over `dt`.
///
/// The rudder slews at no more than `max_rate`; the shaft follows a
/// first-order lag, solved exactly. The shaft command is clamped to the
/// engine limits.
pub fn actuator_update(
    rudder_command: f64,
    shaft_command: f64,
    delta: f64,
    n: f64,
    dt: f64,
    rudder: &RudderModel,
    engine: &EngineModel,
) -> Result<(f64, f64), DynamicsError> {
    check_rudder_command(rudder_command, rudder)?;
    let max_step = rudder.max_rate * dt;
    let diff = rudder_command - delta;
    let new_delta = if diff.abs() <= max_step {
        rudder_command
    } else {
        delta + max_step.copysign(diff)
    };
    let target = shaft_command.clamp(-engine.max_shaft_rate, engine.max_shaft_rate);
    let new_n = target + (n - target) * (-dt / engine.time_constant).exp();
    Ok((new_delta, new_n))
}

pub(crate) fn check_rudder_command(
    command: f64,
    rudder: &RudderModel,
) -> Result<(), DynamicsError> {
    // tolerate a few ulps so a command of exactly 35 deg converted from text passes
    if !command.is_finite() || command.abs() > rudder.max_angle * (1.0 + 1e-12) {
        return Err(DynamicsError::CommandOutOfRange {
            command_deg: command.to_degrees(),
            limit_deg: rudder.max_angle.to_degrees(),
        });
    }
    Ok(())
}
