//! Edge-triggered port rule evaluation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::geometry::Footprint;
use super::predicates::{channel_occupancy, check_collision, check_grounding, ContactKind};
use super::scenario::Rules;
use super::PortGeometry;
use crate::units::knots_to_ms;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Collision,
    Grounding,
    ChannelViolation,
    SpeedViolation,
    MissionComplete,
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [
        EventKind::Collision,
        EventKind::Grounding,
        EventKind::ChannelViolation,
        EventKind::SpeedViolation,
        EventKind::MissionComplete,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Collision => "collision",
            EventKind::Grounding => "grounding",
            EventKind::ChannelViolation => "channel_violation",
            EventKind::SpeedViolation => "speed_violation",
            EventKind::MissionComplete => "mission_complete",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortEvent {
    pub kind: EventKind,
    pub sim_time: f64,
    pub ships: Vec<String>,
    pub detail: String,
    /// Mission time for `mission_complete`, s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

/// Tracks which conditions are currently active and reports only the ones
/// that just became active.
#[derive(Debug, Clone)]
pub struct EpisodeTracker<K: Ord + Clone> {
    active: BTreeSet<K>,
}

impl<K: Ord + Clone> Default for EpisodeTracker<K> {
    fn default() -> Self {
        EpisodeTracker {
            active: BTreeSet::new(),
        }
    }
}

impl<K: Ord + Clone> EpisodeTracker<K> {
    /// Replaces the active set; returns keys that were not active before.
    pub fn update(&mut self, now: impl IntoIterator<Item = K>) -> Vec<K> {
        let now: BTreeSet<K> = now.into_iter().collect();
        let started = now.difference(&self.active).cloned().collect();
        self.active = now;
        started
    }

    pub fn is_active(&self, key: &K) -> bool {
        self.active.contains(key)
    }

    pub fn active(&self) -> impl Iterator<Item = &K> {
        self.active.iter()
    }
}

/// What the rule monitor needs to know about one ship.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShipSnapshot {
    pub id: String,
    pub footprint: Footprint,
    pub draft: f64,
    /// Speed over ground, m/s.
    pub sog: f64,
}

type ContactKey = (ContactKind, String, String);

/// Runs the port predicates on every picture and raises one event per
/// episode.
#[derive(Debug, Clone)]
pub struct RuleMonitor {
    pub rules: Rules,
    contacts: EpisodeTracker<ContactKey>,
    groundings: EpisodeTracker<String>,
    channel: EpisodeTracker<()>,
    speeding: EpisodeTracker<String>,
}

impl RuleMonitor {
    pub fn new(rules: Rules) -> Self {
        RuleMonitor {
            rules,
            contacts: EpisodeTracker::default(),
            groundings: EpisodeTracker::default(),
            channel: EpisodeTracker::default(),
            speeding: EpisodeTracker::default(),
        }
    }

    pub fn evaluate(
        &mut self,
        sim_time: f64,
        ships: &[ShipSnapshot],
        geo: &PortGeometry,
    ) -> Vec<PortEvent> {
        let fps: Vec<(&str, Footprint)> =
            ships.iter().map(|s| (s.id.as_str(), s.footprint)).collect();
        let mut events = Vec::new();

        let contacts = check_collision(sim_time, &fps, geo);
        let keys = contacts.iter().map(|c| (c.kind, c.a.clone(), c.b.clone()));
        for (kind, a, b) in self.contacts.update(keys) {
            let c = contacts
                .iter()
                .find(|c| c.kind == kind && c.a == a && c.b == b)
                .expect("started key present");
            let (ships, detail) = match kind {
                ContactKind::ShipShip => (
                    vec![a, b],
                    format!("contact at ({:.1}, {:.1})", c.point[0], c.point[1]),
                ),
                ContactKind::ShipLand => (
                    vec![a],
                    format!(
                        "contact with {} at ({:.1}, {:.1})",
                        b, c.point[0], c.point[1]
                    ),
                ),
            };
            events.push(PortEvent {
                kind: EventKind::Collision,
                sim_time,
                ships,
                detail,
                value: None,
            });
        }

        let groundings: Vec<_> = ships
            .iter()
            .filter_map(|s| check_grounding(sim_time, &s.id, &s.footprint, s.draft, geo))
            .collect();
        for id in self
            .groundings
            .update(groundings.iter().map(|g| g.ship.clone()))
        {
            let g = groundings
                .iter()
                .find(|g| g.ship == id)
                .expect("started key present");
            events.push(PortEvent {
                kind: EventKind::Grounding,
                sim_time,
                ships: vec![id],
                detail: format!(
                    "draft {:.2} m over {:.2} m at ({:.1}, {:.1})",
                    g.draft, g.depth, g.point[0], g.point[1]
                ),
                value: None,
            });
        }

        let occupants = channel_occupancy(&fps, geo);
        let violating = self.rules.channel_one_by_one && occupants.len() > 1;
        if !self.channel.update(violating.then_some(())).is_empty() {
            events.push(PortEvent {
                kind: EventKind::ChannelViolation,
                sim_time,
                ships: occupants.into_iter().collect(),
                detail: "more than one ship in the entrance channel".into(),
                value: None,
            });
        }

        let speeding: Vec<&ShipSnapshot> = match self.rules.speed_limit_kn {
            Some(limit) => ships
                .iter()
                .filter(|s| {
                    s.sog > knots_to_ms(limit) && geo.in_harbour([s.footprint.x, s.footprint.y])
                })
                .collect(),
            None => Vec::new(),
        };
        for id in self.speeding.update(speeding.iter().map(|s| s.id.clone())) {
            let s = speeding
                .iter()
                .find(|s| s.id == id)
                .expect("started key present");
            events.push(PortEvent {
                kind: EventKind::SpeedViolation,
                sim_time,
                ships: vec![id],
                detail: format!(
                    "{:.2} kn over the {:.1} kn limit",
                    s.sog / crate::units::KNOT,
                    self.rules.speed_limit_kn.unwrap_or(0.0)
                ),
                value: None,
            });
        }
        events
    }
}
