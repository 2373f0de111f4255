use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{TrialError, TrialKind, TrialRecord, TrialSample, TrialSpec, ZigzagLogic, STOP_SPEED};
use crate::units::wrap_pi;

/// Turning-circle metrics. Lengths in m, speed in m/s, yaw rate in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleMetrics {
    pub advance: f64,
    pub transfer: f64,
    pub tactical_diameter: f64,
    /// Radius of the circle fitted to the final 360 deg of turn.
    pub steady_radius: f64,
    pub steady_speed: f64,
    pub steady_yaw_rate: f64,
}

/// Zigzag metrics. Overshoots in deg, signed by the side they occur on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZigzagMetrics {
    pub first_overshoot: f64,
    pub second_overshoot: Option<f64>,
    pub overshoots: Vec<f64>,
    /// Time to the first rudder reversal, s.
    pub initial_turning_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopMetrics {
    /// Distance run along the track, m.
    pub track_reach: f64,
    /// Advance along the initial heading, m.
    pub head_reach: f64,
    pub stopping_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrialMetrics {
    Circle(CircleMetrics),
    Zigzag(ZigzagMetrics),
    Stop(StopMetrics),
}

impl TrialMetrics {
    /// Flat (name, value) list for tables and metrics files.
    pub fn rows(&self) -> Vec<(String, f64)> {
        match self {
            TrialMetrics::Circle(c) => vec![
                ("advance_m".into(), c.advance),
                ("transfer_m".into(), c.transfer),
                ("tactical_diameter_m".into(), c.tactical_diameter),
                ("steady_radius_m".into(), c.steady_radius),
                ("steady_speed_ms".into(), c.steady_speed),
                ("steady_yaw_rate_rads".into(), c.steady_yaw_rate),
            ],
            TrialMetrics::Zigzag(z) => {
                let mut rows = vec![
                    ("initial_turning_time_s".to_string(), z.initial_turning_time),
                    ("first_overshoot_deg".to_string(), z.first_overshoot.abs()),
                ];
                if let Some(s) = z.second_overshoot {
                    rows.push(("second_overshoot_deg".into(), s.abs()));
                }
                for (i, o) in z.overshoots.iter().enumerate() {
                    rows.push((format!("overshoot_{}_deg", i + 1), *o));
                }
                rows
            }
            TrialMetrics::Stop(s) => vec![
                ("track_reach_m".into(), s.track_reach),
                ("head_reach_m".into(), s.head_reach),
                ("stopping_time_s".into(), s.stopping_time),
            ],
        }
    }
}

pub fn compute_metrics(record: &TrialRecord, spec: &TrialSpec) -> Result<TrialMetrics, TrialError> {
    if record.samples.len() < 3 {
        return Err(TrialError::IncompleteManeuver(
            "fewer than 3 samples".into(),
        ));
    }
    match spec.kind {
        TrialKind::Circle => circle_metrics(&record.samples).map(TrialMetrics::Circle),
        TrialKind::Zigzag => zigzag_metrics(&record.samples, spec).map(TrialMetrics::Zigzag),
        TrialKind::Stop => stop_metrics(&record.samples).map(TrialMetrics::Stop),
    }
}

/// Along-track and cross-track offsets from the start, relative to the
/// initial heading.
fn track_offsets(start: &TrialSample, x: f64, y: f64) -> (f64, f64) {
    let (s, c) = start.psi.sin_cos();
    let dx = x - start.x;
    let dy = y - start.y;
    (dx * c + dy * s, -dx * s + dy * c)
}

fn cumulative_turn(samples: &[TrialSample]) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in samples.windows(2) {
        acc += wrap_pi(w[1].psi - w[0].psi).abs();
        out.push(acc);
    }
    out
}

/// Position where the accumulated turn first reaches `angle`, linearly
/// interpolated between samples.
fn position_at_turn(samples: &[TrialSample], turned: &[f64], angle: f64) -> Option<(f64, f64)> {
    let k = turned.iter().position(|&t| t >= angle)?;
    if k == 0 {
        return Some((samples[0].x, samples[0].y));
    }
    let (a, b) = (turned[k - 1], turned[k]);
    let f = if b > a { (angle - a) / (b - a) } else { 1.0 };
    let p = &samples[k - 1];
    let q = &samples[k];
    Some((p.x + f * (q.x - p.x), p.y + f * (q.y - p.y)))
}

fn circle_metrics(samples: &[TrialSample]) -> Result<CircleMetrics, TrialError> {
    let turned = cumulative_turn(samples);
    let total = *turned.last().unwrap_or(&0.0);
    if total < 2.0 * PI {
        return Err(TrialError::IncompleteManeuver(format!(
            "turned {:.1} deg, need at least 360",
            total.to_degrees()
        )));
    }
    let start = &samples[0];
    let (x90, y90) = position_at_turn(samples, &turned, 0.5 * PI).expect("total >= 360 deg");
    let (x180, y180) = position_at_turn(samples, &turned, PI).expect("total >= 360 deg");
    let (advance, transfer) = track_offsets(start, x90, y90);
    let (_, tactical) = track_offsets(start, x180, y180);

    let from = total - 2.0 * PI;
    let window: Vec<&TrialSample> = samples
        .iter()
        .zip(turned.iter())
        .filter(|(_, &t)| t >= from)
        .map(|(s, _)| s)
        .collect();
    let points: Vec<(f64, f64)> = window.iter().map(|s| (s.x, s.y)).collect();
    let (_, _, radius) = fit_circle(&points)
        .ok_or_else(|| TrialError::IncompleteManeuver("degenerate circle fit".into()))?;
    let count = window.len() as f64;
    let steady_speed = window.iter().map(|s| s.speed).sum::<f64>() / count;
    let steady_yaw_rate = window.iter().map(|s| s.r.abs()).sum::<f64>() / count;
    Ok(CircleMetrics {
        advance,
        transfer: transfer.abs(),
        tactical_diameter: tactical.abs(),
        steady_radius: radius,
        steady_speed,
        steady_yaw_rate,
    })
}

/// Algebraic (Kasa) least-squares circle fit. Returns (cx, cy, radius).
pub fn fit_circle(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    // minimise sum (u^2 + v^2 + D u + E v + F)^2 in centred coordinates
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for &(x, y) in points {
        let (u, v) = (x - mx, y - my);
        let row = [u, v, 1.0];
        let rhs = -(u * u + v * v);
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * rhs;
        }
    }
    let sol = solve3(ata, atb)?;
    let (cu, cv) = (-0.5 * sol[0], -0.5 * sol[1]);
    let r2 = cu * cu + cv * cv - sol[2];
    if !(r2 > 0.0) {
        return None;
    }
    Some((cu + mx, cv + my, r2.sqrt()))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = ((row + 1)..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

fn zigzag_metrics(samples: &[TrialSample], spec: &TrialSpec) -> Result<ZigzagMetrics, TrialError> {
    let psi0 = samples[0].psi;
    let dev: Vec<f64> = samples.iter().map(|s| wrap_pi(s.psi - psi0)).collect();
    let mut logic = ZigzagLogic::new(spec.zigzag_rudder, spec.zigzag_switch);
    // (index, side the heading had swung to)
    let mut reversals: Vec<(usize, f64)> = Vec::new();
    for (k, &d) in dev.iter().enumerate().skip(1) {
        let side = logic.direction;
        if logic.update(d) {
            reversals.push((k, side));
        }
    }
    let first = reversals.first().ok_or_else(|| {
        TrialError::IncompleteManeuver("heading never reached the switch angle".into())
    })?;
    let initial_turning_time = samples[first.0].t - samples[0].t;

    let mut overshoots = Vec::new();
    for (i, &(start, side)) in reversals.iter().enumerate() {
        let end = reversals.get(i + 1).map(|r| r.0).unwrap_or(dev.len());
        let (peak_idx, peak) = dev[start..end]
            .iter()
            .enumerate()
            .map(|(j, d)| (start + j, side * d))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty window");
        // a maximum on the final sample of the record is not a confirmed peak
        if i + 1 == reversals.len() && peak_idx + 1 == dev.len() {
            break;
        }
        overshoots.push(side * (peak - spec.zigzag_switch).to_degrees());
    }
    if overshoots.is_empty() {
        return Err(TrialError::IncompleteManeuver(
            "no heading peak after the first reversal".into(),
        ));
    }
    Ok(ZigzagMetrics {
        first_overshoot: overshoots[0],
        second_overshoot: overshoots.get(1).copied(),
        overshoots,
        initial_turning_time,
    })
}

fn stop_metrics(samples: &[TrialSample]) -> Result<StopMetrics, TrialError> {
    let last = samples.last().expect("checked non-empty");
    if last.speed >= STOP_SPEED {
        return Err(TrialError::IncompleteManeuver(format!(
            "still making {:.3} m/s at the end of the record",
            last.speed
        )));
    }
    let track_reach = samples
        .windows(2)
        .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
        .sum();
    let (head_reach, _) = track_offsets(&samples[0], last.x, last.y);
    Ok(StopMetrics {
        track_reach,
        head_reach,
        stopping_time: last.t - samples[0].t,
    })
}
