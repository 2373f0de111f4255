//! AIS-like traffic picture built from ShipState updates.

use std::collections::{BTreeMap, VecDeque};

use harbour_core::port::{Footprint, ShipSnapshot};
use serde::Serialize;
use serde_json::Value;

use crate::rti::Payload;

/// Default track length, points.
pub const DEFAULT_HISTORY: usize = 600;
/// Track decimation period, simulated s.
pub const HISTORY_PERIOD: f64 = 1.0;
/// Records older than this (wall s) are flagged stale on query.
pub const STALE_AFTER: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficRecord {
    pub id: String,
    pub publisher: String,
    pub sim_time: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub sog: f64,
    pub cog: f64,
    pub length: f64,
    pub beam: f64,
    pub draft: f64,
    /// Latest ShipState attributes as received.
    pub attributes: Payload,
    /// (sim_time, x, y), time-ordered.
    pub history: VecDeque<[f64; 3]>,
    pub updates: u64,
    /// Tower clock (s) at the last applied update.
    pub received: f64,
    /// The publishing federate has resigned.
    pub orphaned: bool,
}

/// Query view of one record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficView {
    pub id: String,
    pub sim_time: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub sog: f64,
    pub cog: f64,
    pub length: f64,
    pub beam: f64,
    pub staleness: f64,
    pub stale: bool,
    pub updates: u64,
    pub history: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ingest {
    Created,
    Updated,
    /// Older than what the picture already holds.
    Ignored,
}

#[derive(Debug, Clone)]
pub struct TrafficPicture {
    records: BTreeMap<String, TrafficRecord>,
    history_len: usize,
}

impl Default for TrafficPicture {
    fn default() -> Self {
        TrafficPicture::new(DEFAULT_HISTORY)
    }
}

fn num(attrs: &Payload, key: &str) -> Option<f64> {
    attrs.get(key).and_then(Value::as_f64)
}

impl TrafficPicture {
    pub fn new(history_len: usize) -> Self {
        TrafficPicture {
            records: BTreeMap::new(),
            history_len: history_len.max(1),
        }
    }

    pub fn get(&self, id: &str) -> Option<&TrafficRecord> {
        self.records.get(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Latest simulated time seen across all ships.
    pub fn sim_time(&self) -> f64 {
        self.records
            .values()
            .map(|r| r.sim_time)
            .fold(0.0, f64::max)
    }

    /// Applies a ShipState update. Attributes missing from a partial
    /// update keep their previous values.
    pub fn ingest(
        &mut self,
        id: &str,
        publisher: &str,
        sim_time: f64,
        attrs: &Payload,
        now: f64,
    ) -> Result<Ingest, String> {
        if let Some(r) = self.records.get_mut(id) {
            if sim_time < r.sim_time {
                return Ok(Ingest::Ignored);
            }
            for (k, v) in attrs {
                r.attributes.insert(k.clone(), v.clone());
            }
            let a = &r.attributes;
            let get = |k: &str, old: f64| num(a, k).unwrap_or(old);
            let (x, y) = (get("x", r.x), get("y", r.y));
            let heading = get("psi", r.heading);
            let (sog, cog) = (get("sog", r.sog), get("cog", r.cog));
            let (length, beam, draft) = (
                get("length", r.length),
                get("beam", r.beam),
                get("draft", r.draft),
            );
            *r = TrafficRecord {
                sim_time,
                x,
                y,
                heading,
                sog,
                cog,
                length,
                beam,
                draft,
                publisher: publisher.to_string(),
                updates: r.updates + 1,
                received: now,
                orphaned: false,
                ..r.clone()
            };
            if r.history
                .back()
                .map_or(true, |h| sim_time - h[0] >= HISTORY_PERIOD)
            {
                r.history.push_back([sim_time, x, y]);
                while r.history.len() > self.history_len {
                    r.history.pop_front();
                }
            }
            return Ok(Ingest::Updated);
        }
        let need = |k: &str| num(attrs, k).ok_or_else(|| format!("ShipState for {id} lacks {k}"));
        let (x, y, heading) = (need("x")?, need("y")?, need("psi")?);
        let mut history = VecDeque::new();
        history.push_back([sim_time, x, y]);
        self.records.insert(
            id.to_string(),
            TrafficRecord {
                id: id.to_string(),
                publisher: publisher.to_string(),
                sim_time,
                x,
                y,
                heading,
                sog: num(attrs, "sog").unwrap_or(0.0),
                cog: num(attrs, "cog").unwrap_or(heading),
                length: num(attrs, "length").unwrap_or(0.0),
                beam: num(attrs, "beam").unwrap_or(0.0),
                draft: num(attrs, "draft").unwrap_or(0.0),
                attributes: attrs.clone(),
                history,
                updates: 1,
                received: now,
                orphaned: false,
            },
        );
        Ok(Ingest::Created)
    }

    /// Flags every record published by `federate`.
    pub fn orphan(&mut self, federate: &str) {
        for r in self.records.values_mut() {
            if r.publisher == federate {
                r.orphaned = true;
            }
        }
    }

    pub fn views(&self, now: f64) -> Vec<TrafficView> {
        self.records
            .values()
            .map(|r| {
                let staleness = (now - r.received).max(0.0);
                TrafficView {
                    id: r.id.clone(),
                    sim_time: r.sim_time,
                    x: r.x,
                    y: r.y,
                    heading: r.heading,
                    sog: r.sog,
                    cog: r.cog,
                    length: r.length,
                    beam: r.beam,
                    staleness,
                    stale: r.orphaned || staleness > STALE_AFTER,
                    updates: r.updates,
                    history: r.history.iter().copied().collect(),
                }
            })
            .collect()
    }

    /// Rule inputs for every ship with known dimensions.
    pub fn snapshots(&self) -> Vec<ShipSnapshot> {
        self.records
            .values()
            .filter(|r| r.length > 0.0 && r.beam > 0.0)
            .map(|r| ShipSnapshot {
                id: r.id.clone(),
                footprint: Footprint::new(r.x, r.y, r.heading, r.length, r.beam),
                draft: r.draft,
                sog: r.sog,
            })
            .collect()
    }
}
