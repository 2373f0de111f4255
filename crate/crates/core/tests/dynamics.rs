use harbour_core::config::kriso;
use harbour_core::dynamics::{
    dimensionalize_forces, evaluate_forces, nondimensionalize, nondimensionalize_forces, step,
    Controls, Environment, Force3, ManeuverState,
};
use harbour_core::trials::{run_trial, trim_shaft_rate, TrialSpec};
use harbour_core::units::knots_to_ms;
use proptest::prelude::*;

fn turn(dt: f64, duration: f64) -> ManeuverState {
    let cfg = kriso();
    let env = Environment::default();
    let u = knots_to_ms(8.0);
    let n = trim_shaft_rate(&cfg, &env, u).unwrap();
    let mut s = ManeuverState::underway(u, n);
    let c = Controls {
        rudder: 35f64.to_radians(),
        shaft: n,
        ..Default::default()
    };
    let steps = (duration / dt).round() as usize;
    for _ in 0..steps {
        s = step(&s, &c, &cfg, &env, dt).unwrap();
    }
    s
}

// Steps below 0.1 s reach the round-off floor; coarse steps keep the
// truncation error measurable.
fn heading_error(a: &ManeuverState, b: &ManeuverState) -> f64 {
    (a.psi - b.psi).abs()
}

#[test]
fn rk4_self_convergence_order() {
    let reference = turn(0.0025, 60.0);
    let e1 = heading_error(&turn(0.4, 60.0), &reference);
    let e2 = heading_error(&turn(0.2, 60.0), &reference);
    let order = (e1 / e2).log2();
    assert!(order >= 3.0, "order {order:.3} (errors {e1:.3e}, {e2:.3e})");
}

#[test]
fn circle_trials_mirror() {
    let cfg = kriso();
    let env = Environment::default();
    let stbd = run_trial(&TrialSpec::circle(8.0, 35.0), &cfg, &env).unwrap();
    let port = run_trial(&TrialSpec::circle(8.0, -35.0), &cfg, &env).unwrap();
    let tol = 1e-6 * cfg.particulars.length_pp;
    let n = (600.0 / 0.1) as usize + 1;
    assert!(stbd.len() >= n && port.len() >= n);
    for (a, b) in stbd.samples[..n].iter().zip(&port.samples[..n]) {
        assert!(
            (a.x - b.x).abs() <= tol && (a.y + b.y).abs() <= tol,
            "t = {}",
            a.t
        );
        assert!((a.psi + b.psi).abs() <= 1e-9 && (a.r + b.r).abs() <= 1e-12);
    }
}

#[test]
fn coarse_steps_stay_finite() {
    let cfg = kriso();
    let env = Environment::default();
    for dt in [0.01, 0.1, 0.5, 1.0] {
        let mut s = ManeuverState::underway(knots_to_ms(12.0), 1.5);
        let c = Controls {
            rudder: -35f64.to_radians(),
            shaft: 1.75,
            ..Default::default()
        };
        for _ in 0..(600.0 / dt) as usize {
            s = step(&s, &c, &cfg, &env, dt).unwrap();
        }
        assert!(s.is_finite(), "dt {dt}");
    }
}

#[test]
fn bad_time_step_rejected() {
    let cfg = kriso();
    let s = ManeuverState::underway(5.0, 1.0);
    for dt in [0.0, -0.1, 1.5, f64::NAN] {
        assert!(step(&s, &Controls::default(), &cfg, &Environment::default(), dt).is_err());
    }
}

#[test]
fn dead_ship_stays_put() {
    let cfg = kriso();
    let env = Environment::default();
    let mut s = ManeuverState::default();
    for _ in 0..100 {
        s = step(&s, &Controls::default(), &cfg, &env, 0.1).unwrap();
    }
    assert_eq!(s, ManeuverState::default());
}

#[test]
fn current_drifts_a_stopped_ship() {
    let cfg = kriso();
    let env = Environment {
        current: [0.0, 1.0],
        ..Default::default()
    };
    let mut s = ManeuverState::default();
    for _ in 0..100 {
        s = step(&s, &Controls::default(), &cfg, &env, 0.1).unwrap();
    }
    assert!((s.y - 10.0).abs() < 1e-9 && s.x.abs() < 1e-12);
}

fn state() -> impl Strategy<Value = ManeuverState> {
    (
        0.5..10.0f64,
        -1.0..1.0f64,
        -0.01..0.01f64,
        -0.6..0.6f64,
        0.2..1.7f64,
        -3.1..3.1f64,
    )
        .prop_map(|(u, v, r, delta, n, psi)| ManeuverState {
            u,
            v,
            r,
            delta,
            n,
            psi,
            ..Default::default()
        })
}

fn mirror(s: &ManeuverState) -> ManeuverState {
    ManeuverState {
        y: -s.y,
        psi: -s.psi,
        v: -s.v,
        r: -s.r,
        delta: -s.delta,
        ..*s
    }
}

proptest! {
    #[test]
    fn force_total_is_component_sum(s in state()) {
        let cfg = kriso();
        let f = evaluate_forces(&s, &Controls::default(), &cfg, &Environment::default());
        let c = f.components();
        let sum = |g: fn(&Force3) -> f64| c.iter().map(g).fold(0.0, |a, b| a + b);
        prop_assert_eq!(f.x, sum(|p| p.x));
        prop_assert_eq!(f.y, sum(|p| p.y));
        prop_assert_eq!(f.n, sum(|p| p.n));
    }

    #[test]
    fn forces_mirror(s in state()) {
        let cfg = kriso();
        let env = Environment::default();
        let a = evaluate_forces(&s, &Controls::default(), &cfg, &env);
        let b = evaluate_forces(&mirror(&s), &Controls::default(), &cfg, &env);
        let scale = a.x.abs().max(a.y.abs()).max(1.0);
        prop_assert!((a.x - b.x).abs() <= 1e-12 * scale);
        prop_assert!((a.y + b.y).abs() <= 1e-12 * scale);
        prop_assert!((a.n + b.n).abs() <= 1e-12 * scale * 230.0);
    }

    #[test]
    fn rudder_force_antisymmetric(u in 0.5..10.0f64, n in 0.2..1.7f64, delta in 0.0..0.6f64) {
        let cfg = kriso();
        let env = Environment::default();
        let mk = |d: f64| ManeuverState { u, n, delta: d, ..Default::default() };
        let a = harbour_core::dynamics::rudder_forces_dimensional(&mk(delta), &cfg, &env);
        let b = harbour_core::dynamics::rudder_forces_dimensional(&mk(-delta), &cfg, &env);
        prop_assert!((a.y + b.y).abs() <= 1e-9 * a.y.abs().max(1.0));
        prop_assert!((a.n + b.n).abs() <= 1e-9 * a.n.abs().max(1.0));
        prop_assert!((a.x - b.x).abs() <= 1e-9 * a.x.abs().max(1.0));
        if delta > 0.01 {
            prop_assert!(a.n > 0.0, "positive rudder turns to starboard");
        }
    }

    #[test]
    fn force_round_trip(x in -1e7..1e7f64, y in -1e7..1e7f64, nn in -1e9..1e9f64, speed in 0.1..10.0f64) {
        let cfg = kriso();
        let env = Environment::default();
        let f = Force3::new(x, y, nn);
        let (xp, yp, np) = nondimensionalize_forces(f, &cfg.particulars, &env, speed);
        let g = dimensionalize_forces(xp, yp, np, &cfg.particulars, &env, speed);
        prop_assert!((g.x - x).abs() <= 1e-12 * x.abs().max(1e-300));
        prop_assert!((g.y - y).abs() <= 1e-12 * y.abs().max(1e-300));
        prop_assert!((g.n - nn).abs() <= 1e-12 * nn.abs().max(1e-300));
    }

    #[test]
    fn state_round_trip(s in state()) {
        let cfg = kriso();
        let env = Environment::default();
        let nd = nondimensionalize(&s, &cfg.particulars, &cfg.mass, &env).unwrap();
        let speed = s.u.hypot(s.v);
        prop_assert!((nd.v * speed - s.v).abs() <= 1e-12 * s.v.abs().max(1e-300));
        let r = nd.r * speed / cfg.particulars.length_pp;
        prop_assert!((r - s.r).abs() <= 1e-12 * s.r.abs().max(1e-300));
    }

    #[test]
    fn drift_angle_quadrant(u in -10.0..10.0f64, v in -10.0..10.0f64) {
        let s = ManeuverState { u, v, ..Default::default() };
        let beta = s.drift_angle();
        prop_assert!(beta > -std::f64::consts::PI - 1e-12 && beta <= std::f64::consts::PI);
        prop_assert!((beta.cos() * s.speed() - u).abs() < 1e-9);
        prop_assert!((beta.sin() * s.speed() + v).abs() < 1e-9);
    }

    #[test]
    fn unpowered_ship_decelerates(u in 0.5..8.0f64) {
        let cfg = kriso();
        let env = Environment::default();
        let s0 = ManeuverState::underway(u, 0.0);
        let s1 = step(&s0, &Controls::default(), &cfg, &env, 0.5).unwrap();
        prop_assert!(s1.u < s0.u);
        prop_assert!(s1.u > 0.0);
    }
}
