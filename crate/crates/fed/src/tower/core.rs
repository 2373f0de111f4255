//! Tower state: traffic picture, rule and mission monitoring, the event log
//! and the teleport view. Clock values are passed in.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use harbour_core::port::{
    MissionTracker, PortEvent, PortGeometry, RuleMonitor, Scenario, SessionMetrics,
};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use super::picture::{Ingest, TrafficPicture};
use crate::bridge::{conning_ship, CONNING_CLASS, SHIP_STATE_CLASS};
use crate::rti::{FedMessage, MsgType, Payload};

/// A conning snapshot older than this (wall s) counts as unreachable.
pub const CONNING_FRESH: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum TowerError {
    #[error("ship {0} is not in the traffic picture")]
    ShipUnknown(String),
}

/// Append-only line-delimited event log.
pub struct EventLogWriter {
    w: BufWriter<File>,
}

impl EventLogWriter {
    pub fn create(path: &Path) -> io::Result<Self> {
        let f = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)?;
        Ok(EventLogWriter {
            w: BufWriter::new(f),
        })
    }

    pub fn append(&mut self, e: &PortEvent) -> io::Result<()> {
        serde_json::to_writer(&mut self.w, e)?;
        self.w.write_all(b"\n")?;
        self.w.flush()
    }
}

pub fn read_event_log(path: &Path) -> io::Result<Vec<PortEvent>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
        })?;
        out.push(e);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TeleportView {
    pub ship: String,
    /// True when the bridge's own snapshot is unavailable and the view is
    /// rebuilt from the last ShipState update.
    pub degraded: bool,
    pub snapshot: Payload,
}

struct Conning {
    payload: Payload,
    received: f64,
}

pub struct TowerCore {
    geometry: PortGeometry,
    monitor: RuleMonitor,
    missions: MissionTracker,
    pub picture: TrafficPicture,
    conning: BTreeMap<String, Conning>,
    pub events: Vec<PortEvent>,
    pub metrics: SessionMetrics,
    log: Option<EventLogWriter>,
    dirty: bool,
}

impl TowerCore {
    pub fn new(scenario: &Scenario, history_len: usize) -> Self {
        TowerCore {
            geometry: scenario.port.clone(),
            monitor: RuleMonitor::new(scenario.rules),
            missions: MissionTracker::new(scenario),
            picture: TrafficPicture::new(history_len),
            conning: BTreeMap::new(),
            events: Vec::new(),
            metrics: SessionMetrics::default(),
            log: None,
            dirty: false,
        }
    }

    pub fn with_log(mut self, log: EventLogWriter) -> Self {
        self.log = Some(log);
        self
    }

    /// Applies one object update; returns false for classes the tower does
    /// not track.
    pub fn ingest(
        &mut self,
        class: &str,
        object: &str,
        publisher: &str,
        sim_time: f64,
        attrs: &Payload,
        now: f64,
    ) -> bool {
        match class {
            SHIP_STATE_CLASS => {
                match self.picture.ingest(object, publisher, sim_time, attrs, now) {
                    Ok(Ingest::Created | Ingest::Updated) => self.dirty = true,
                    Ok(Ingest::Ignored) => {}
                    Err(e) => log::warn!("{e}"),
                }
                true
            }
            CONNING_CLASS => {
                let ship = attrs
                    .get("ship")
                    .and_then(Value::as_str)
                    .unwrap_or(object)
                    .to_string();
                let newer = self.conning.get(&ship).map_or(true, |c| {
                    c.payload
                        .get("sim_time")
                        .and_then(Value::as_f64)
                        .unwrap_or(0.0)
                        <= sim_time
                });
                if newer {
                    self.conning.insert(
                        ship,
                        Conning {
                            payload: attrs.clone(),
                            received: now,
                        },
                    );
                }
                true
            }
            _ => {
                log::debug!("ignoring update of unknown object class {class}");
                false
            }
        }
    }

    /// Handles a message from the federation. UPDATEs carry no class; conning
    /// objects are recognised by their name.
    pub fn federation_message(&mut self, m: &FedMessage, now: f64) {
        match m.msg_type {
            MsgType::Update => {
                let Some(object) = m.str_field("object") else {
                    return;
                };
                let Some(Value::Object(attrs)) = m.payload.get("attributes") else {
                    return;
                };
                let class = if conning_ship(object).is_some() {
                    CONNING_CLASS
                } else {
                    SHIP_STATE_CLASS
                };
                self.ingest(class, object, &m.federate_id, m.sim_time, attrs, now);
            }
            MsgType::Resign => {
                if let Some(f) = m.str_field("federate") {
                    self.picture.orphan(f);
                }
            }
            MsgType::Error => log::warn!("federation error: {:?}", m.payload),
            _ => {}
        }
    }

    /// Loads the JOIN_ACK object snapshot.
    pub fn join_snapshot(&mut self, objects: &[Value], now: f64) {
        for o in objects {
            let (Some(class), Some(name), Some(Value::Object(attrs))) = (
                o["class"].as_str(),
                o["object"].as_str(),
                o.get("attributes"),
            ) else {
                continue;
            };
            if attrs.is_empty() {
                continue;
            }
            let owner = o["owner"].as_str().unwrap_or("");
            let t = o["sim_time"].as_f64().unwrap_or(0.0);
            self.ingest(class, name, owner, t, attrs, now);
        }
    }

    /// Runs rules and missions at the picture's latest sim time if the
    /// picture changed since the last call.
    pub fn evaluate(&mut self) -> Vec<PortEvent> {
        if !self.dirty || self.picture.is_empty() {
            return Vec::new();
        }
        self.dirty = false;
        let t = self.picture.sim_time();
        let snaps = self.picture.snapshots();
        let mut new = self.monitor.evaluate(t, &snaps, &self.geometry);
        new.extend(self.missions.evaluate(t, &snaps));
        for e in &new {
            self.metrics.record(e);
            if let Some(l) = &mut self.log {
                if let Err(err) = l.append(e) {
                    log::error!("event log write failed: {err}");
                }
            }
        }
        self.events.extend(new.iter().cloned());
        new
    }

    pub fn teleport(&self, ship: &str, now: f64) -> Result<TeleportView, TowerError> {
        let orphaned = self.picture.get(ship).is_some_and(|r| r.orphaned);
        if let Some(c) = self.conning.get(ship) {
            if !orphaned && now - c.received <= CONNING_FRESH {
                return Ok(TeleportView {
                    ship: ship.to_string(),
                    degraded: false,
                    snapshot: c.payload.clone(),
                });
            }
        }
        let r = self
            .picture
            .get(ship)
            .ok_or_else(|| TowerError::ShipUnknown(ship.to_string()))?;
        let a = &r.attributes;
        let pick = |k: &str| a.get(k).cloned().unwrap_or(Value::Null);
        let view = json!({
            "ship": ship,
            "sim_time": r.sim_time,
            "x": r.x,
            "y": r.y,
            "heading": r.heading,
            "u": pick("u"),
            "v": pick("v"),
            "sog": r.sog,
            "cog": r.cog,
            "rate_of_turn": pick("r"),
            "rudder": pick("delta"),
            "shaft": pick("n"),
            "heave": pick("heave"),
            "pitch": pick("pitch"),
            "roll": pick("roll"),
        });
        Ok(TeleportView {
            ship: ship.to_string(),
            degraded: true,
            snapshot: view.as_object().unwrap().clone(),
        })
    }
}
