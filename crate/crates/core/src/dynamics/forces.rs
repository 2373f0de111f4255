use std::f64::consts::PI;

use super::nondim::{nondim_at, nondimensionalize_forces};
use super::{
    dimensionalize_forces, speed_magnitude, AnchorHold, Environment, Force3, HydroDerivatives,
    ManeuverState, NonDimState, PropellerModel, ShipConfig, ShipParticulars, Thruster, WindModel,
    SHAFT_RATE_GUARD, SPEED_FLOOR,
};
use crate::error::DynamicsError;

/// Hull forces in non-dimensional form:
///
/// ```text
/// X_H' = -(X0' + (Xvr' - m_y') v' r')
/// Y_H' = Yv' v' + (Yr' + m_x') r' + Yvvv' v'^3 + Yvvr' v'^2 r' + Yvrr' v' r'^2 + Yrrr' r'^3
/// N_H' = Nv' v' + (Nr' + m_x') r' + Nvvv' v'^3 + Nvvr' v'^2 r' + Nvrr' v' r'^2 + Nrrr' r'^3
/// ```
pub fn hull_forces(nd: &NonDimState, d: &HydroDerivatives) -> (f64, f64, f64) {
    let (x_coupling, y, n) = hull_velocity_terms(nd, d);
    (-d.x0 + x_coupling, y, n)
}

/// Velocity-dependent part of the hull polynomial (everything except X0').
fn hull_velocity_terms(nd: &NonDimState, d: &HydroDerivatives) -> (f64, f64, f64) {
    let (v, r) = (nd.v, nd.r);
    let x = -(d.xvr - nd.m_y) * v * r;
    let y = d.yv * v
        + (d.yr + nd.m_x) * r
        + d.yvvv * v * v * v
        + d.yvvr * v * v * r
        + d.yvrr * v * r * r
        + d.yrrr * r * r * r;
    let n = d.nv * v
        + (d.nr + nd.m_x) * r
        + d.nvvv * v * v * v
        + d.nvvr * v * v * r
        + d.nvrr * v * r * r
        + d.nrrr * r * r * r;
    (x, y, n)
}

/// Dimensional hull load.
///
/// Under [`SPEED_FLOOR`] the velocity terms are evaluated with the floor
/// speed as reference (v' = v/U_min, r' = rL/U_min) while the resistance
/// term keeps the true U^2, so the load is continuous at the floor and the
/// resistance vanishes at rest.
pub fn hull_forces_dimensional(
    state: &ManeuverState,
    cfg: &ShipConfig,
    env: &Environment,
) -> Force3 {
    let p = &cfg.particulars;
    let speed = speed_magnitude(state);
    if speed >= SPEED_FLOOR {
        let nd = nondim_at(state, p, &cfg.mass, env, speed);
        let (x, y, n) = hull_forces(&nd, &cfg.derivatives);
        return dimensionalize_forces(x, y, n, p, env, speed);
    }
    let nd = nondim_at(state, p, &cfg.mass, env, SPEED_FLOOR);
    let (x, y, n) = hull_velocity_terms(&nd, &cfg.derivatives);
    let velocity_part = dimensionalize_forces(x, y, n, p, env, SPEED_FLOOR);
    let resistance = dimensionalize_forces(-cfg.derivatives.x0, 0.0, 0.0, p, env, speed);
    Force3::new(
        velocity_part.x + resistance.x,
        velocity_part.y,
        velocity_part.n,
    )
}

/// X0' = C_T S / (L d).
pub fn resistance_coefficient(particulars: &ShipParticulars) -> f64 {
    particulars.resistance_coeff * particulars.wetted_surface
        / (particulars.length_pp * particulars.draft)
}

/// J = (1 - w_p) u / (n D_p).
pub fn advance_coefficient(
    u: f64,
    n: f64,
    propeller: &PropellerModel,
) -> Result<f64, DynamicsError> {
    if n.abs() < SHAFT_RATE_GUARD {
        return Err(DynamicsError::ZeroShaftRate(n));
    }
    Ok((1.0 - propeller.wake_fraction) * u / (n * propeller.diameter))
}

/// K_T = C1 + C2 J + C3 J^2.
pub fn thrust_coefficient(j: f64, kt: &[f64; 3]) -> f64 {
    kt[0] + kt[1] * j + kt[2] * j * j
}

/// X_P = (1 - t) rho n^2 D_p^4 K_T(J), with `n` in rev/s.
///
/// Astern rotation reuses the ahead curve with the sign of `n` applied to
/// the thrust; there is no four-quadrant data.
pub fn propeller_thrust(
    state: &ManeuverState,
    propeller: &PropellerModel,
    env: &Environment,
) -> f64 {
    let n = state.n;
    let j = match advance_coefficient(state.u, n.abs(), propeller) {
        Ok(j) => j,
        Err(_) => return 0.0,
    };
    let d2 = propeller.diameter * propeller.diameter;
    (1.0 - propeller.thrust_deduction)
        * env.water_density
        * n
        * n.abs()
        * d2
        * d2
        * thrust_coefficient(j, &propeller.kt_coeffs)
}

/// Least-squares quadratic K_T(J) through open-water samples.
///
/// Solved with Householder QR on the Vandermonde matrix rather than the
/// normal equations.
pub fn fit_kt_coeffs(samples: &[(f64, f64)]) -> Result<[f64; 3], DynamicsError> {
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.0).collect();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(DynamicsError::RankDeficient(distinct.len()));
    }
    let rows = samples.len();
    let mut a: Vec<[f64; 3]> = samples.iter().map(|&(j, _)| [1.0, j, j * j]).collect();
    let mut b: Vec<f64> = samples.iter().map(|s| s.1).collect();

    for col in 0..3 {
        let norm = (col..rows)
            .map(|i| a[i][col] * a[i][col])
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            return Err(DynamicsError::RankDeficient(distinct.len()));
        }
        let alpha = if a[col][col] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (col..rows).map(|i| a[i][col]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for k in col..3 {
            let dot: f64 = (col..rows).map(|i| v[i - col] * a[i][k]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in col..rows {
                a[i][k] -= f * v[i - col];
            }
        }
        let dot: f64 = (col..rows).map(|i| v[i - col] * b[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in col..rows {
            b[i] -= f * v[i - col];
        }
    }

    let mut coeffs = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = ((row + 1)..3).map(|k| a[row][k] * coeffs[k]).sum();
        if a[row][row].abs() < 1e-300 {
            return Err(DynamicsError::RankDeficient(distinct.len()));
        }
        coeffs[row] = (b[row] - tail) / a[row][row];
    }
    Ok(coeffs)
}

/// Inflow conditions at the rudder and the resulting normal force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RudderInflow {
    /// Longitudinal inflow including propeller race, m/s.
    pub u_r: f64,
    /// Lateral inflow after flow straightening, m/s.
    pub v_r: f64,
    /// Effective angle of attack, rad.
    pub alpha_r: f64,
    /// Normal force F_N, N.
    pub normal_force: f64,
}

/// Rudder normal force F_N = 0.5 rho A_R f_alpha U_R^2 sin(alpha_R).
///
/// The longitudinal inflow is the wake-reduced speed accelerated by the
/// propeller race (momentum theory); the lateral inflow is
/// -gamma_R (v + l_R' L r), and alpha_R = delta - atan2(v_R, u_R).
pub fn rudder_normal_force(
    state: &ManeuverState,
    cfg: &ShipConfig,
    env: &Environment,
) -> RudderInflow {
    let rudder = &cfg.rudder;
    let prop = &cfg.propeller;
    let u_a = (1.0 - prop.wake_fraction) * state.u;

    let u_r = if state.n >= SHAFT_RATE_GUARD {
        let j = (1.0 - prop.wake_fraction) * state.u / (state.n * prop.diameter);
        let kt = thrust_coefficient(j, &prop.kt_coeffs).max(0.0);
        let nd = state.n * prop.diameter;
        let jet = (u_a * u_a + 8.0 * kt * nd * nd / PI).sqrt();
        let u_race = u_a + rudder.race_factor * (jet - u_a);
        let eta = rudder.race_coverage;
        rudder.wake_ratio * (eta * u_race * u_race + (1.0 - eta) * u_a * u_a).sqrt()
    } else {
        rudder.wake_ratio * u_a
    };

    let lever = rudder.inflow_lever * cfg.particulars.length_pp;
    let v_r = -rudder.flow_straightening * (state.v + lever * state.r);
    let alpha_r = state.delta - v_r.atan2(u_r);
    let inflow_sq = u_r * u_r + v_r * v_r;
    let normal_force =
        0.5 * env.water_density * rudder.area * rudder.lift_slope() * inflow_sq * alpha_r.sin();
    RudderInflow {
        u_r,
        v_r,
        alpha_r,
        normal_force,
    }
}

/// Dimensional rudder load from the normal force:
///
/// ```text
/// X_R = -(1 - t_R) F_N sin(delta)
/// Y_R = -(1 -/+ a_H) F_N cos(delta)
/// N_R = -(x_R' -/+ a_H x_H') L F_N cos(delta)
/// ```
pub fn rudder_forces_dimensional(
    state: &ManeuverState,
    cfg: &ShipConfig,
    env: &Environment,
) -> Force3 {
    let rudder = &cfg.rudder;
    let f_n = rudder_normal_force(state, cfg, env).normal_force;
    let sign = rudder.interaction_sign.factor();
    let (sin_d, cos_d) = state.delta.sin_cos();
    Force3::new(
        -(1.0 - rudder.drag_coeff) * f_n * sin_d,
        -(1.0 + sign * rudder.interaction_coeff) * f_n * cos_d,
        -(rudder.x_r + sign * rudder.interaction_coeff * rudder.x_h)
            * cfg.particulars.length_pp
            * f_n
            * cos_d,
    )
}

/// Non-dimensional rudder load (X_R', Y_R', N_R').
pub fn rudder_forces(
    state: &ManeuverState,
    cfg: &ShipConfig,
    env: &Environment,
) -> Result<(f64, f64, f64), DynamicsError> {
    let speed = speed_magnitude(state);
    if speed < SPEED_FLOOR {
        return Err(DynamicsError::DegenerateSpeed(speed));
    }
    let f = rudder_forces_dimensional(state, cfg, env);
    Ok(nondimensionalize_forces(f, &cfg.particulars, env, speed))
}

/// Lateral thruster load. Effectiveness tapers linearly from full at rest
/// to zero at each thruster's cutoff speed.
pub fn thruster_forces(state: &ManeuverState, thrusters: &[Thruster]) -> Force3 {
    let speed = speed_magnitude(state);
    let mut y = 0.0;
    let mut n = 0.0;
    for (thruster, level) in thrusters.iter().zip(state.thrusters.iter()) {
        let taper = if thruster.cutoff_speed > 0.0 {
            (1.0 - speed / thruster.cutoff_speed).max(0.0)
        } else {
            0.0
        };
        let force = level.clamp(-1.0, 1.0) * thruster.rated_thrust * taper;
        y += force;
        n += force * thruster.x;
    }
    Force3::new(0.0, y, n)
}

/// Quadratic wind load on the apparent wind. Zero when the model is
/// disabled or there is no wind.
pub fn wind_forces(
    state: &ManeuverState,
    model: &WindModel,
    length: f64,
    env: &Environment,
) -> Force3 {
    let wind = match env.wind {
        Some(w) if model.enabled && w.speed > 0.0 => w,
        _ => return Force3::default(),
    };
    // air velocity (blowing towards) minus ship ground velocity, in body axes
    let air = [
        -wind.speed * wind.direction.cos(),
        -wind.speed * wind.direction.sin(),
    ];
    let ground = state.ground_velocity(env);
    let rel_n = air[0] - ground[0];
    let rel_e = air[1] - ground[1];
    let (s, c) = state.psi.sin_cos();
    let rel_u = rel_n * c + rel_e * s;
    let rel_v = -rel_n * s + rel_e * c;
    let speed_sq = rel_u * rel_u + rel_v * rel_v;
    // angle the apparent wind comes from, relative to the bow (+ starboard)
    let from = (-rel_v).atan2(-rel_u);
    let q = 0.5 * model.air_density * speed_sq;
    Force3::new(
        -q * model.frontal_area * model.cx * from.cos(),
        -q * model.lateral_area * model.cy * from.sin(),
        -q * model.lateral_area * length * model.cn * (2.0 * from).sin(),
    )
}

/// Spring-damper holding the ship at the anchor point, resolved in body axes.
pub fn anchor_forces(
    state: &ManeuverState,
    anchor: Option<&AnchorHold>,
    env: &Environment,
) -> Force3 {
    let hold = match anchor {
        Some(h) => h,
        None => return Force3::default(),
    };
    let vel = state.ground_velocity(env);
    let f_n = -hold.stiffness * (state.x - hold.x) - hold.damping * vel[0];
    let f_e = -hold.stiffness * (state.y - hold.y) - hold.damping * vel[1];
    let (s, c) = state.psi.sin_cos();
    Force3::new(f_n * c + f_e * s, -f_n * s + f_e * c, 0.0)
}
