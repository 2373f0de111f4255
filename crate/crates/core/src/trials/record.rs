use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrialError;
use crate::dynamics::ManeuverState;

/// Column order of exported records.
pub const CSV_HEADER: [&str; 11] = [
    "t", "x", "y", "psi", "u", "v", "r", "delta", "n", "beta", "speed",
];

/// One recorded step. Angles in rad, shaft rate in rev/s, speed is the
/// through-water speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub delta: f64,
    pub n: f64,
    pub beta: f64,
    pub speed: f64,
}

impl TrialSample {
    pub fn from_state(t: f64, s: &ManeuverState) -> Self {
        TrialSample {
            t,
            x: s.x,
            y: s.y,
            psi: s.psi,
            u: s.u,
            v: s.v,
            r: s.r,
            delta: s.delta,
            n: s.n,
            beta: s.drift_angle(),
            speed: s.speed(),
        }
    }

    fn values(&self) -> [f64; 11] {
        [
            self.t, self.x, self.y, self.psi, self.u, self.v, self.r, self.delta, self.n,
            self.beta, self.speed,
        ]
    }
}

/// Fixed-step time series of a trial.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialRecord {
    pub dt: f64,
    pub samples: Vec<TrialSample>,
}

impl TrialRecord {
    pub fn new(dt: f64) -> Self {
        TrialRecord {
            dt,
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, state: &ManeuverState) {
        self.samples.push(TrialSample::from_state(t, state));
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }
}

/// Serializes a record as CSV: header row then one row per sample, each
/// value with 9 significant digits.
pub fn record_csv(record: &TrialRecord) -> Result<Vec<u8>, TrialError> {
    let mut out = Vec::with_capacity(record.len() * 170 + 64);
    write_csv(record, &mut out)?;
    Ok(out)
}

fn write_csv<W: Write>(record: &TrialRecord, out: W) -> Result<(), TrialError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for sample in &record.samples {
        writer.write_record(sample.values().iter().map(|v| format!("{v:.8e}")))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn export_record(record: &TrialRecord, path: &Path) -> Result<(), TrialError> {
    let file = std::fs::File::create(path)?;
    write_csv(record, std::io::BufWriter::new(file))
}

/// Reads a record written by [`export_record`]. `dt` is taken from the
/// first two rows.
pub fn import_record(path: &Path) -> Result<TrialRecord, TrialError> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(TrialError::IncompleteManeuver(format!(
            "unexpected header in {}",
            path.display()
        )));
    }
    let mut samples = Vec::new();
    for row in reader.records() {
        let row = row?;
        let mut v = [0.0; 11];
        for (slot, field) in v.iter_mut().zip(row.iter()) {
            *slot = field.trim().parse::<f64>().map_err(|e| {
                TrialError::IncompleteManeuver(format!("bad number `{field}`: {e}"))
            })?;
        }
        samples.push(TrialSample {
            t: v[0],
            x: v[1],
            y: v[2],
            psi: v[3],
            u: v[4],
            v: v[5],
            r: v[6],
            delta: v[7],
            n: v[8],
            beta: v[9],
            speed: v[10],
        });
    }
    let dt = if samples.len() >= 2 {
        samples[1].t - samples[0].t
    } else {
        0.0
    };
    Ok(TrialRecord { dt, samples })
}

/// SHA-256 of the CSV serialization, hex encoded.
pub fn record_hash(record: &TrialRecord) -> Result<String, TrialError> {
    Ok(hex::encode(Sha256::digest(record_csv(record)?)))
}
