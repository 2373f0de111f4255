//! Unit conversions used at the I/O boundaries.
//!
//! Internally everything is SI with shaft rates in rev/s and angles in
//! radians. Knots, degrees and RPM only appear in files and on the CLI.

use std::f64::consts::PI;

/// Metres per second in one knot.
pub const KNOT: f64 = 1852.0 / 3600.0;

pub fn knots_to_ms(kn: f64) -> f64 {
    kn * KNOT
}

pub fn ms_to_knots(ms: f64) -> f64 {
    ms / KNOT
}

pub fn rpm_to_rps(rpm: f64) -> f64 {
    rpm / 60.0
}

pub fn rps_to_rpm(rps: f64) -> f64 {
    rps * 60.0
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_pi(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Wraps an angle to [0, 2pi).
pub fn wrap_two_pi(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    // rem_euclid can round up to exactly 2pi for tiny negative inputs
    if a >= 2.0 * PI {
        0.0
    } else {
        a
    }
}

/// Parses a speed such as `8kn`, `8 kn`, `4.1m/s` or a bare number (knots).
pub fn parse_speed(text: &str) -> Option<f64> {
    let t = text.trim().to_ascii_lowercase();
    if let Some(v) = t.strip_suffix("kn").or_else(|| t.strip_suffix("kt")) {
        return v.trim().parse::<f64>().ok().map(knots_to_ms);
    }
    if let Some(v) = t.strip_suffix("m/s") {
        return v.trim().parse::<f64>().ok();
    }
    t.parse::<f64>().ok().map(knots_to_ms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_stays_in_half_open_interval() {
        assert_eq!(wrap_pi(PI), PI);
        assert_eq!(wrap_pi(-PI), PI);
        assert!((wrap_pi(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_pi(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_pi(7.0) - (7.0 - 2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn wrap_two_pi_range() {
        assert_eq!(wrap_two_pi(0.0), 0.0);
        assert!((wrap_two_pi(-0.1) - (2.0 * PI - 0.1)).abs() < 1e-12);
        assert!(wrap_two_pi(-1e-300) < 2.0 * PI);
    }

    #[test]
    fn speed_parsing() {
        assert!((parse_speed("8kn").unwrap() - 8.0 * KNOT).abs() < 1e-12);
        assert!((parse_speed("10 kn").unwrap() - 10.0 * KNOT).abs() < 1e-12);
        assert_eq!(parse_speed("4.5m/s"), Some(4.5));
        assert!((parse_speed("5").unwrap() - 5.0 * KNOT).abs() < 1e-12);
        assert_eq!(parse_speed("fast"), None);
    }
}
