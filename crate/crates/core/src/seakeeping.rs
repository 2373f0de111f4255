//! Heave, pitch and roll in regular waves.
//!
//! Each motion is an independent linear oscillator with closed-form
//! coefficients for a box-like hull (sectional added mass equal to the
//! displaced water, coupling neglected):
//!
//! ```text
//! heave: p w'' + q w' + w = a F cos(phase)
//! pitch: p t'' + q t' + t = a G sin(phase)
//! roll:  (T_N / 2 pi)^2 C44 f'' + B44 f' + C44 f = M a cos(phase)
//! ```
//!
//! with p = 2kT/w^2, q = A^2 / (k B alpha^3 w) and the encounter phase
//! advancing at the encounter frequency. The oscillators are stepped in the
//! time domain next to the maneuvering model; they read the ship's speed
//! and heading but never feed back into it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Environment, ManeuverState, SeakeepingHull, ShipConfig, ShipParticulars};
use crate::units::{wrap_pi, wrap_two_pi};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeakeepingError {
    #[error("encounter frequency {0:.4} rad/s is not positive (ship overtaking the waves)")]
    UnsupportedRegime(f64),
    #[error("invalid wave: {0}")]
    InvalidWave(String),
    #[error("seakeeping time step {0} s outside (0, 0.5]")]
    BadTimeStep(f64),
    #[error("roll needs a positive metacentric height")]
    NeutralStability,
}

/// Regular deep-water wave. `direction` is where the wave travels to,
/// clockwise from north.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub amplitude: f64,
    pub frequency: f64,
    pub wave_number: f64,
    pub direction: f64,
}

impl WaveState {
    /// Builds a wave with the deep-water dispersion k = w^2 / g.
    pub fn new(
        amplitude: f64,
        frequency: f64,
        direction: f64,
        gravity: f64,
    ) -> Result<Self, SeakeepingError> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(SeakeepingError::InvalidWave(format!(
                "amplitude {amplitude}"
            )));
        }
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(SeakeepingError::InvalidWave(format!(
                "frequency {frequency}"
            )));
        }
        if !(gravity > 0.0) {
            return Err(SeakeepingError::InvalidWave(
                "gravity must be positive".into(),
            ));
        }
        Ok(WaveState {
            amplitude,
            frequency,
            wave_number: frequency * frequency / gravity,
            direction,
        })
    }

    pub fn from_period(
        amplitude: f64,
        period: f64,
        direction: f64,
        gravity: f64,
    ) -> Result<Self, SeakeepingError> {
        if !(period > 0.0) {
            return Err(SeakeepingError::InvalidWave(format!("period {period}")));
        }
        Self::new(amplitude, 2.0 * PI / period, direction, gravity)
    }

    /// Wave with wave number `k`, for sweeps over kL.
    pub fn from_wave_number(
        amplitude: f64,
        k: f64,
        direction: f64,
        gravity: f64,
    ) -> Result<Self, SeakeepingError> {
        if !(k > 0.0) {
            return Err(SeakeepingError::InvalidWave(format!("wave number {k}")));
        }
        Self::new(amplitude, (k * gravity).sqrt(), direction, gravity)
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.frequency
    }
}

/// Oscillator coefficients for one wave/speed/heading condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeakeepingParams {
    /// A
    pub sectional_damping: f64,
    /// F (heave forcing per unit amplitude)
    pub forcing_f: f64,
    /// G (pitch forcing per unit amplitude), 1/m
    pub forcing_g: f64,
    /// Speed factor alpha = w_e / w.
    pub alpha: f64,
    pub encounter_frequency: f64,
    pub wave_frequency: f64,
    pub wave_number: f64,
    pub amplitude: f64,
    /// Heave/pitch inertia coefficient 2kT/w^2, s^2.
    pub heave_inertia: f64,
    /// Heave/pitch damping coefficient A^2/(k B alpha^3 w), s.
    pub heave_damping: f64,
    pub roll_natural_period: f64,
    pub roll_damping: f64,
    pub restoring: f64,
    /// Roll excitation per unit amplitude, N m / m.
    pub roll_excitation: f64,
    pub gm_t: f64,
    pub displacement_mass: f64,
}

/// Oscillator displacements, rates and the encounter phase in [0, 2pi).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SeakeepingState {
    pub heave: f64,
    pub heave_rate: f64,
    pub pitch: f64,
    pub pitch_rate: f64,
    pub roll: f64,
    pub roll_rate: f64,
    pub phase: f64,
}

/// w_e = |w - k U cos(chi)|; chi = 0 is following seas.
pub fn encounter_frequency(omega: f64, k: f64, speed: f64, chi: f64) -> f64 {
    signed_encounter_frequency(omega, k, speed, chi).abs()
}

fn signed_encounter_frequency(omega: f64, k: f64, speed: f64, chi: f64) -> f64 {
    omega - k * speed * chi.cos()
}

/// C44 = g GM_T Delta.
pub fn restoring_coefficient(gravity: f64, gm_t: f64, displacement_mass: f64) -> f64 {
    gravity * gm_t * displacement_mass
}

/// Steady amplitude of p x'' + q x' + x = E cos(w t).
pub fn steady_amplitude(p: f64, q: f64, forcing: f64, omega: f64) -> f64 {
    let a = 1.0 - p * omega * omega;
    let b = q * omega;
    forcing / (a * a + b * b).sqrt()
}

/// Wave direction relative to the ship heading, wrapped to (-pi, pi].
pub fn relative_heading(ship_heading: f64, wave_direction: f64) -> f64 {
    wrap_pi(wave_direction - ship_heading)
}

/// Heave forcing F = kappa f 2/(k_e L) sin(k_e L / 2).
fn heave_forcing(kappa_f: f64, ke: f64, length: f64) -> f64 {
    let y = ke * length;
    if y < 1e-3 {
        kappa_f * (1.0 - y * y / 24.0)
    } else {
        kappa_f * 2.0 / y * (0.5 * y).sin()
    }
}

/// Pitch forcing G = kappa f 24/((k_e L)^2 L) [sin(x) - x cos(x)], x = k_e L/2.
fn pitch_forcing(kappa_f: f64, ke: f64, length: f64) -> f64 {
    let y = ke * length;
    let x = 0.5 * y;
    if y < 1e-3 {
        kappa_f * ke * (1.0 - x * x / 10.0)
    } else {
        kappa_f * 24.0 / (y * y * length) * (x.sin() - x * x.cos())
    }
}

pub fn compute_params(
    particulars: &ShipParticulars,
    hull: &SeakeepingHull,
    wave: &WaveState,
    speed: f64,
    chi: f64,
    env: &Environment,
) -> Result<SeakeepingParams, SeakeepingError> {
    let omega = wave.frequency;
    let k = wave.wave_number;
    let we = signed_encounter_frequency(omega, k, speed, chi);
    if !(we > 0.0) {
        return Err(SeakeepingError::UnsupportedRegime(we));
    }
    if !(hull.gm_t > 0.0) {
        return Err(SeakeepingError::NeutralStability);
    }
    let b = particulars.breadth;
    let t = particulars.draft;
    let l = particulars.length_pp;
    let alpha = we / omega;
    let ke = (k * chi.cos()).abs();

    let a_damp = 2.0 * (0.5 * k * b * alpha * alpha).sin() * (-k * t * alpha * alpha).exp();
    let damping_ratio = a_damp * a_damp / (k * b * alpha.powi(3));
    let f = ((1.0 - k * t).powi(2) + damping_ratio * damping_ratio).sqrt();
    let kappa = (-ke * t).exp();

    let displacement_mass = env.water_density * particulars.displacement_volume;
    let restoring = restoring_coefficient(env.gravity, hull.gm_t, displacement_mass);
    let roll_damping = hull
        .roll_damping
        .unwrap_or(2.0 * hull.roll_damping_ratio * restoring * hull.roll_period / (2.0 * PI));
    // Haskind relation
    let roll_excitation = hull.roll_excitation.unwrap_or_else(|| {
        chi.sin() * (env.water_density * env.gravity * env.gravity * roll_damping / we).sqrt()
    });

    Ok(SeakeepingParams {
        sectional_damping: a_damp,
        forcing_f: heave_forcing(kappa * f, ke, l),
        forcing_g: pitch_forcing(kappa * f, ke, l),
        alpha,
        encounter_frequency: we,
        wave_frequency: omega,
        wave_number: k,
        amplitude: wave.amplitude,
        heave_inertia: 2.0 * k * t / (omega * omega),
        heave_damping: damping_ratio / omega,
        roll_natural_period: hull.roll_period,
        roll_damping,
        restoring,
        roll_excitation,
        gm_t: hull.gm_t,
        displacement_mass,
    })
}

/// Parameters for a ship in the environment's wave, if there is one.
pub fn params_for_ship(
    cfg: &ShipConfig,
    env: &Environment,
    state: &ManeuverState,
) -> Result<Option<SeakeepingParams>, SeakeepingError> {
    match env.wave {
        Some(wave) => {
            let chi = relative_heading(state.psi, wave.direction);
            compute_params(
                &cfg.particulars,
                &cfg.seakeeping,
                &wave,
                state.speed(),
                chi,
                env,
            )
            .map(Some)
        }
        None => Ok(None),
    }
}

impl SeakeepingParams {
    /// Roll as a normalised oscillator (p, q, E) with unit stiffness.
    pub fn roll_oscillator(&self) -> (f64, f64, f64) {
        let p = (self.roll_natural_period / (2.0 * PI)).powi(2);
        (
            p,
            self.roll_damping / self.restoring,
            self.roll_excitation * self.amplitude / self.restoring,
        )
    }

    /// Analytic steady amplitudes (heave m, pitch rad, roll rad).
    pub fn steady_amplitudes(&self) -> (f64, f64, f64) {
        let we = self.encounter_frequency;
        let (p, q) = (self.heave_inertia, self.heave_damping);
        let heave = steady_amplitude(p, q, self.amplitude * self.forcing_f, we).abs();
        let pitch = steady_amplitude(p, q, self.amplitude * self.forcing_g, we).abs();
        let (rp, rq, re) = self.roll_oscillator();
        (heave, pitch, steady_amplitude(rp, rq, re, we).abs())
    }
}

#[derive(Clone, Copy)]
struct Rates([f64; 6]);

fn accelerations(s: &[f64; 6], phase: f64, par: &SeakeepingParams) -> Rates {
    let (p, q) = (par.heave_inertia, par.heave_damping);
    let (rp, rq, re) = par.roll_oscillator();
    let (sin_ph, cos_ph) = phase.sin_cos();
    let heave_force = par.amplitude * par.forcing_f * cos_ph;
    let pitch_force = par.amplitude * par.forcing_g * sin_ph;
    Rates([
        s[1],
        (heave_force - q * s[1] - s[0]) / p,
        s[3],
        (pitch_force - q * s[3] - s[2]) / p,
        s[5],
        (re * cos_ph - rq * s[5] - s[4]) / rp,
    ])
}

/// RK4 advance of the three oscillators over `dt`.
pub fn step_seakeeping(
    state: &SeakeepingState,
    params: &SeakeepingParams,
    dt: f64,
) -> Result<SeakeepingState, SeakeepingError> {
    if !(dt > 0.0 && dt <= 0.5) {
        return Err(SeakeepingError::BadTimeStep(dt));
    }
    let y0 = [
        state.heave,
        state.heave_rate,
        state.pitch,
        state.pitch_rate,
        state.roll,
        state.roll_rate,
    ];
    let we = params.encounter_frequency;
    let ph = state.phase;
    let add = |y: &[f64; 6], k: &Rates, h: f64| {
        let mut out = *y;
        for (o, d) in out.iter_mut().zip(k.0.iter()) {
            *o += h * d;
        }
        out
    };
    let k1 = accelerations(&y0, ph, params);
    let k2 = accelerations(&add(&y0, &k1, 0.5 * dt), ph + 0.5 * we * dt, params);
    let k3 = accelerations(&add(&y0, &k2, 0.5 * dt), ph + 0.5 * we * dt, params);
    let k4 = accelerations(&add(&y0, &k3, dt), ph + we * dt, params);
    let mut y = y0;
    for i in 0..6 {
        y[i] += dt / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
    }
    Ok(SeakeepingState {
        heave: y[0],
        heave_rate: y[1],
        pitch: y[2],
        pitch_rate: y[3],
        roll: y[4],
        roll_rate: y[5],
        phase: wrap_two_pi(ph + we * dt),
    })
}
