//! Order log (line-delimited JSON), trajectory CSV and replay.
//!
//! The log holds a header, then every accepted order and environment
//! change tagged with the number of steps completed when it took effect,
//! and finally the step count at shutdown. Replaying those entries at the
//! same step boundaries reproduces the trajectory bit for bit.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use harbour_core::port::Scenario;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sim::{BridgeError, BridgeSim, EnvironmentUpdate, HelmOrder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub scenario: String,
    pub scenario_hash: String,
    pub ship: String,
    pub config_hash: String,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEntry {
    Header(LogHeader),
    Order {
        step: u64,
        order: HelmOrder,
    },
    Environment {
        step: u64,
        environment: EnvironmentUpdate,
    },
    End {
        steps: u64,
    },
}

impl LogHeader {
    pub fn for_sim(scenario: &Scenario, sim: &BridgeSim) -> Self {
        LogHeader {
            scenario: scenario.name.clone(),
            scenario_hash: scenario.source_hash.clone(),
            ship: sim.ship().id.clone(),
            config_hash: sim.ship().config_hash.clone(),
            dt: sim.dt(),
        }
    }
}

pub struct OrderLogWriter {
    w: BufWriter<File>,
}

impl OrderLogWriter {
    pub fn create(path: &Path, header: &LogHeader) -> io::Result<Self> {
        let mut log = OrderLogWriter {
            w: BufWriter::new(File::create(path)?),
        };
        log.write(&LogEntry::Header(header.clone()))?;
        Ok(log)
    }

    pub fn write(&mut self, entry: &LogEntry) -> io::Result<()> {
        serde_json::to_writer(&mut self.w, entry)?;
        self.w.write_all(b"\n")?;
        self.w.flush()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderLog {
    pub header: LogHeader,
    /// Orders and environment changes in log order.
    pub entries: Vec<LogEntry>,
    /// Step count at shutdown; None for a truncated log.
    pub end: Option<u64>,
    /// Lines after the last readable entry were dropped.
    pub truncated: bool,
}

impl OrderLog {
    /// Steps to replay: the recorded end, else up to the last entry.
    pub fn replay_steps(&self) -> u64 {
        self.end.unwrap_or_else(|| {
            self.entries
                .iter()
                .filter_map(|e| match e {
                    LogEntry::Order { step, .. } | LogEntry::Environment { step, .. } => {
                        Some(*step)
                    }
                    _ => None,
                })
                .max()
                .unwrap_or(0)
        })
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("cannot read {0}: {1}")]
    Io(String, io::Error),
    #[error("order log has no header")]
    NoHeader,
    #[error("log/scenario mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}

pub fn read_order_log(path: &Path) -> Result<OrderLog, ReplayError> {
    let io_err = |e| ReplayError::Io(path.display().to_string(), e);
    let file = File::open(path).map_err(io_err)?;
    let mut header = None;
    let mut entries = Vec::new();
    let mut end = None;
    let mut truncated = false;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogEntry>(&line) {
            Ok(LogEntry::Header(h)) if header.is_none() => header = Some(h),
            Ok(LogEntry::End { steps }) => end = Some(steps),
            Ok(e @ (LogEntry::Order { .. } | LogEntry::Environment { .. }))
                if header.is_some() && end.is_none() =>
            {
                entries.push(e)
            }
            _ => {
                truncated = true;
                break;
            }
        }
    }
    let header = header.ok_or(ReplayError::NoHeader)?;
    truncated |= end.is_none();
    Ok(OrderLog {
        header,
        entries,
        end,
        truncated,
    })
}

pub const TRAJECTORY_HEADER: &str = "step,t,x,y,psi,u,v,r,delta,n,heave,pitch,roll";

/// Writes one CSV row per completed step using shortest round-trip floats.
pub struct TrajectoryWriter<W: Write> {
    w: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut w: W) -> io::Result<Self> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        Ok(TrajectoryWriter { w })
    }

    pub fn row(&mut self, sim: &BridgeSim) -> io::Result<()> {
        let s = sim.state();
        let k = sim.seakeeping();
        writeln!(
            self.w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            sim.steps(),
            sim.sim_time(),
            s.x,
            s.y,
            s.psi,
            s.u,
            s.v,
            s.r,
            s.delta,
            s.n,
            k.heave,
            k.pitch,
            k.roll
        )
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.w.flush()?;
        Ok(self.w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub steps: u64,
    pub truncated: bool,
}

/// Checks the log against the scenario and replays it into `out`.
pub fn replay<W: Write>(
    scenario: &Scenario,
    log: &OrderLog,
    out: W,
) -> Result<ReplayReport, ReplayError> {
    let h = &log.header;
    if h.scenario_hash != scenario.source_hash {
        return Err(ReplayError::Mismatch(format!(
            "scenario hash {} in log, {} on disk",
            h.scenario_hash, scenario.source_hash
        )));
    }
    let ship = scenario
        .ship(&h.ship)
        .ok_or_else(|| ReplayError::Mismatch(format!("ship {} not in scenario", h.ship)))?;
    if ship.config_hash != h.config_hash {
        return Err(ReplayError::Mismatch(format!(
            "ship config hash {} in log, {} on disk",
            h.config_hash, ship.config_hash
        )));
    }
    let mut sim = BridgeSim::new(scenario, &h.ship, h.dt)?;
    let steps = log.replay_steps();
    let io_err = |e| ReplayError::Io("trajectory".into(), e);
    let mut traj = TrajectoryWriter::new(out).map_err(io_err)?;
    traj.row(&sim).map_err(io_err)?;
    let mut pending = log.entries.iter().peekable();
    loop {
        while let Some(e) = pending.peek() {
            match e {
                LogEntry::Order { step, order } if *step == sim.steps() => {
                    sim.apply_order(order)?;
                }
                LogEntry::Environment { step, environment } if *step == sim.steps() => {
                    sim.set_environment(environment)?;
                }
                LogEntry::Order { step, .. } | LogEntry::Environment { step, .. }
                    if *step < sim.steps() =>
                {
                    return Err(ReplayError::Mismatch(format!(
                        "entry for step {step} out of order"
                    )));
                }
                _ => break,
            }
            pending.next();
        }
        if sim.steps() >= steps {
            break;
        }
        sim.step()?;
        traj.row(&sim).map_err(io_err)?;
    }
    traj.finish().map_err(io_err)?;
    Ok(ReplayReport {
        steps: sim.steps(),
        truncated: log.truncated,
    })
}
