use super::actuator::{actuator_update, check_rudder_command};
use super::forces::{
    anchor_forces, hull_forces_dimensional, propeller_thrust, rudder_forces_dimensional,
    thruster_forces, wind_forces,
};
use super::{Controls, Environment, Force3, ForceSet, ManeuverState, ShipConfig};
use crate::error::DynamicsError;
use crate::units::wrap_pi;

/// Time derivative of a [`ManeuverState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateRate {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub delta: f64,
    pub n: f64,
}

impl StateRate {
    fn is_finite(&self) -> bool {
        [
            self.x, self.y, self.psi, self.u, self.v, self.r, self.delta, self.n,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Evaluates every force source at `state` and assembles the totals.
pub fn evaluate_forces(
    state: &ManeuverState,
    controls: &Controls,
    cfg: &ShipConfig,
    env: &Environment,
) -> ForceSet {
    ForceSet::from_components(
        hull_forces_dimensional(state, cfg, env),
        Force3::new(propeller_thrust(state, &cfg.propeller, env), 0.0, 0.0),
        rudder_forces_dimensional(state, cfg, env),
        thruster_forces(state, &cfg.thrusters),
        wind_forces(state, &cfg.wind, cfg.particulars.length_pp, env),
        anchor_forces(state, controls.anchor.as_ref(), env),
    )
}

/// Equations of motion:
///
/// ```text
/// (m + m_x) du/dt - m v r = X
/// (m + m_y) dv/dt + m u r = Y
/// (I_zz + i_zz) dr/dt = N - x_G Y
/// ```
///
/// plus the earth-frame kinematics with current and the actuator rates.
pub fn derivatives(
    state: &ManeuverState,
    controls: &Controls,
    cfg: &ShipConfig,
    env: &Environment,
) -> Result<StateRate, DynamicsError> {
    let forces = evaluate_forces(state, controls, cfg, env);
    let rate = rigid_body_rate(state, &forces, cfg, env);
    let delta_rate = if controls.rudder == state.delta {
        0.0
    } else {
        cfg.rudder.max_rate.copysign(controls.rudder - state.delta)
    };
    let n_rate = (controls
        .shaft
        .clamp(-cfg.engine.max_shaft_rate, cfg.engine.max_shaft_rate)
        - state.n)
        / cfg.engine.time_constant;
    let rate = StateRate {
        delta: delta_rate,
        n: n_rate,
        ..rate
    };
    if !rate.is_finite() {
        return Err(DynamicsError::NonFinite(first_non_finite(&rate)));
    }
    Ok(rate)
}

fn rigid_body_rate(
    state: &ManeuverState,
    forces: &ForceSet,
    cfg: &ShipConfig,
    env: &Environment,
) -> StateRate {
    let m = &cfg.mass;
    let (s, c) = state.psi.sin_cos();
    StateRate {
        x: state.u * c - state.v * s + env.current[0],
        y: state.u * s + state.v * c + env.current[1],
        psi: state.r,
        u: (forces.x + m.mass * state.v * state.r) / (m.mass + m.added_mass_x),
        v: (forces.y - m.mass * state.u * state.r) / (m.mass + m.added_mass_y),
        r: (forces.n - cfg.particulars.x_g * forces.y) / (m.yaw_inertia + m.added_yaw_inertia),
        delta: 0.0,
        n: 0.0,
    }
}

fn first_non_finite(rate: &StateRate) -> &'static str {
    let named = [
        ("x", rate.x),
        ("y", rate.y),
        ("psi", rate.psi),
        ("u", rate.u),
        ("v", rate.v),
        ("r", rate.r),
        ("delta", rate.delta),
        ("n", rate.n),
    ];
    named
        .iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(name, _)| *name)
        .unwrap_or("state")
}

/// One classical fourth-order Runge-Kutta step.
///
/// The actuators follow their closed-form trajectories (rate-limited rudder,
/// first-order shaft lag), sampled at the stage times so the rigid-body
/// stages see the actuator positions they would have mid-step. Thruster
/// levels take their commanded values at the start of the step. When the
/// rudder reaches its command inside the step the step is split there, so
/// the kink in the rudder path does not cost an order of accuracy.
pub fn step(
    state: &ManeuverState,
    controls: &Controls,
    cfg: &ShipConfig,
    env: &Environment,
    dt: f64,
) -> Result<ManeuverState, DynamicsError> {
    if !(dt > 0.0 && dt <= 1.0) {
        return Err(DynamicsError::BadTimeStep(dt));
    }
    check_rudder_command(controls.rudder, &cfg.rudder)?;

    let mut start = *state;
    for (level, cmd) in start.thrusters.iter_mut().zip(controls.thrusters.iter()) {
        *level = cmd.clamp(-1.0, 1.0);
    }
    let t_hit = (controls.rudder - start.delta).abs() / cfg.rudder.max_rate;
    let next = if t_hit > 1e-9 * dt && t_hit < dt * (1.0 - 1e-9) {
        let mut mid = rk4(&start, controls, cfg, env, t_hit)?;
        mid.delta = controls.rudder;
        rk4(&mid, controls, cfg, env, dt - t_hit)?
    } else {
        rk4(&start, controls, cfg, env, dt)?
    };
    if !next.is_finite() {
        return Err(DynamicsError::NonFinite("state"));
    }
    Ok(next)
}

fn rk4(
    start: &ManeuverState,
    controls: &Controls,
    cfg: &ShipConfig,
    env: &Environment,
    dt: f64,
) -> Result<ManeuverState, DynamicsError> {
    let actuators = |tau: f64| {
        actuator_update(
            controls.rudder,
            controls.shaft,
            start.delta,
            start.n,
            tau,
            &cfg.rudder,
            &cfg.engine,
        )
    };
    let (delta_mid, n_mid) = actuators(0.5 * dt)?;
    let (delta_end, n_end) = actuators(dt)?;

    let eval = |s: &ManeuverState| -> Result<StateRate, DynamicsError> {
        let forces = evaluate_forces(s, controls, cfg, env);
        let rate = rigid_body_rate(s, &forces, cfg, env);
        if rate.is_finite() {
            Ok(rate)
        } else {
            Err(DynamicsError::NonFinite(first_non_finite(&rate)))
        }
    };
    let offset = |base: &ManeuverState, k: &StateRate, h: f64, delta: f64, n: f64| ManeuverState {
        x: base.x + h * k.x,
        y: base.y + h * k.y,
        psi: base.psi + h * k.psi,
        u: base.u + h * k.u,
        v: base.v + h * k.v,
        r: base.r + h * k.r,
        delta,
        n,
        thrusters: base.thrusters,
    };

    let k1 = eval(start)?;
    let k2 = eval(&offset(start, &k1, 0.5 * dt, delta_mid, n_mid))?;
    let k3 = eval(&offset(start, &k2, 0.5 * dt, delta_mid, n_mid))?;
    let k4 = eval(&offset(start, &k3, dt, delta_end, n_end))?;

    let combine = |a: f64, b: f64, c: f64, d: f64| (a + 2.0 * b + 2.0 * c + d) * (dt / 6.0);
    Ok(ManeuverState {
        x: start.x + combine(k1.x, k2.x, k3.x, k4.x),
        y: start.y + combine(k1.y, k2.y, k3.y, k4.y),
        psi: wrap_pi(start.psi + combine(k1.psi, k2.psi, k3.psi, k4.psi)),
        u: start.u + combine(k1.u, k2.u, k3.u, k4.u),
        v: start.v + combine(k1.v, k2.v, k3.v, k4.v),
        r: start.r + combine(k1.r, k2.r, k3.r, k4.r),
        delta: delta_end,
        n: n_end,
        thrusters: start.thrusters,
    })
}
