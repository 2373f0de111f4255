use std::f64::consts::PI;

use harbour_core::config::kriso;
use harbour_core::dynamics::Environment;
use harbour_core::seakeeping::{
    compute_params, step_seakeeping, SeakeepingParams, SeakeepingState, WaveState,
};

fn params(amplitude: f64, period: f64, chi: f64, speed: f64) -> SeakeepingParams {
    let cfg = kriso();
    let env = Environment::default();
    let wave = WaveState::from_period(amplitude, period, 0.0, env.gravity).unwrap();
    compute_params(&cfg.particulars, &cfg.seakeeping, &wave, speed, chi, &env).unwrap()
}

fn run(
    p: &SeakeepingParams,
    s0: SeakeepingState,
    dt: f64,
    duration: f64,
    mut probe: impl FnMut(f64, &SeakeepingState),
) {
    let mut s = s0;
    let steps = (duration / dt).round() as usize;
    for i in 0..steps {
        s = step_seakeeping(&s, p, dt).unwrap();
        probe((i + 1) as f64 * dt, &s);
    }
}

#[test]
fn calm_water_stays_level() {
    let p = params(0.0, 10.0, 2.0, 5.0);
    let mut worst: f64 = 0.0;
    run(&p, SeakeepingState::default(), 0.05, 600.0, |_, s| {
        worst = worst
            .max(s.heave.abs())
            .max(s.pitch.abs())
            .max(s.roll.abs());
    });
    assert!(worst <= 1e-12, "{worst:e}");
}

#[test]
fn free_roll_period() {
    let cfg = kriso();
    let env = Environment::default();
    let mut hull = cfg.seakeeping;
    hull.roll_damping = Some(0.0);
    let wave = WaveState::from_period(0.0, 10.0, 0.0, env.gravity).unwrap();
    let p = compute_params(&cfg.particulars, &hull, &wave, 0.0, PI / 2.0, &env).unwrap();
    let s0 = SeakeepingState {
        roll: 0.1,
        ..Default::default()
    };
    let mut crossings = Vec::new();
    let mut prev = (0.0, 0.1);
    run(&p, s0, 0.01, 10.0 * hull.roll_period, |t, s| {
        if prev.1 > 0.0 && s.roll <= 0.0 {
            // linear interpolation of the downward zero crossing
            crossings.push(prev.0 + (t - prev.0) * prev.1 / (prev.1 - s.roll));
        }
        prev = (t, s.roll);
    });
    let measured = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    assert!(
        (measured - hull.roll_period).abs() / hull.roll_period < 0.005,
        "{measured} vs {}",
        hull.roll_period
    );
}

#[test]
fn forced_amplitudes_match_oracle() {
    let p = params(1.0, 9.0, 2.5, 4.0);
    let period = 2.0 * PI / p.encounter_frequency;
    let settle = 20.0 * p.roll_natural_period;
    let mut peak = [0.0f64; 3];
    run(
        &p,
        SeakeepingState::default(),
        0.01,
        settle + 3.0 * period,
        |t, s| {
            if t > settle {
                peak[0] = peak[0].max(s.heave.abs());
                peak[1] = peak[1].max(s.pitch.abs());
                peak[2] = peak[2].max(s.roll.abs());
            }
        },
    );
    let (h, pi, r) = p.steady_amplitudes();
    for (got, want, name) in [
        (peak[0], h, "heave"),
        (peak[1], pi, "pitch"),
        (peak[2], r, "roll"),
    ] {
        assert!((got - want).abs() / want < 0.01, "{name}: {got} vs {want}");
    }
}

#[test]
fn long_wave_limit() {
    let cfg = kriso();
    let env = Environment::default();
    let k = 0.1 / cfg.particulars.length_pp;
    let wave = WaveState::from_wave_number(1.0, k, 0.0, env.gravity).unwrap();
    let p = compute_params(&cfg.particulars, &cfg.seakeeping, &wave, 0.0, PI, &env).unwrap();
    let (heave, pitch, _) = p.steady_amplitudes();
    assert!((heave - 1.0).abs() < 0.02, "heave {heave}");
    assert!((pitch / k - 1.0).abs() < 0.02, "pitch {pitch} vs {k}");
}

#[test]
fn beam_seas_excite_roll_head_seas_do_not() {
    let beam = params(1.0, 10.0, PI / 2.0, 0.0);
    let head = params(1.0, 10.0, PI, 0.0);
    assert!(beam.steady_amplitudes().2 > 0.0);
    assert!(head.steady_amplitudes().2.abs() < 1e-12);
}
