//! Missions, session metrics and a headless fast-time scenario runner.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rules::{EventKind, PortEvent, RuleMonitor, ShipSnapshot};
use super::scenario::{MissionGoal, Role, Scenario};
use crate::dynamics::{step, Controls, ManeuverState};
use crate::error::DynamicsError;

/// Watches piloted ships for their berth-reach criterion. Missions start
/// when the scenario is loaded (sim time 0).
#[derive(Debug, Clone, Default)]
pub struct MissionTracker {
    goals: Vec<(String, MissionGoal)>,
    done: Vec<String>,
}

impl MissionTracker {
    pub fn new(scenario: &Scenario) -> Self {
        MissionTracker {
            goals: scenario
                .ships
                .iter()
                .filter(|s| s.role == Role::Piloted)
                .filter_map(|s| s.mission.clone().map(|m| (s.id.clone(), m)))
                .collect(),
            done: Vec::new(),
        }
    }

    pub fn with_goals(goals: Vec<(String, MissionGoal)>) -> Self {
        MissionTracker {
            goals,
            done: Vec::new(),
        }
    }

    pub fn is_complete(&self, id: &str) -> bool {
        self.done.iter().any(|d| d == id)
    }

    pub fn evaluate(&mut self, sim_time: f64, ships: &[ShipSnapshot]) -> Vec<PortEvent> {
        let mut events = Vec::new();
        for (id, goal) in &self.goals {
            if self.done.contains(id) {
                continue;
            }
            let Some(s) = ships.iter().find(|s| &s.id == id) else {
                continue;
            };
            let d = (s.footprint.x - goal.position[0]).hypot(s.footprint.y - goal.position[1]);
            if d <= goal.radius && s.sog < goal.max_speed {
                self.done.push(id.clone());
                events.push(PortEvent {
                    kind: EventKind::MissionComplete,
                    sim_time,
                    ships: vec![id.clone()],
                    detail: format!("reached {} ({d:.1} m off)", goal.berth),
                    value: Some(sim_time),
                });
            }
        }
        events
    }
}

/// Aggregates over an event stream. The standard deviation is the
/// population one (divide by the number of missions).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub mission_times: Vec<f64>,
    pub mission_mean: f64,
    pub mission_std: f64,
    pub collisions: u64,
    pub groundings: u64,
    /// Counts per rule (`channel_violation`, `speed_violation`).
    pub violations: BTreeMap<String, u64>,
}

impl SessionMetrics {
    pub fn record(&mut self, event: &PortEvent) {
        match event.kind {
            EventKind::Collision => self.collisions += 1,
            EventKind::Grounding => self.groundings += 1,
            EventKind::ChannelViolation | EventKind::SpeedViolation => {
                *self
                    .violations
                    .entry(event.kind.as_str().to_string())
                    .or_insert(0) += 1;
            }
            EventKind::MissionComplete => {
                if let Some(t) = event.value {
                    self.mission_times.push(t);
                    let (mean, std) = mean_std(&self.mission_times);
                    self.mission_mean = mean;
                    self.mission_std = std;
                }
            }
        }
    }

    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a PortEvent>) -> Self {
        let mut m = SessionMetrics::default();
        for e in events {
            m.record(e);
        }
        m
    }

    /// Channel plus speed violations.
    pub fn wrong_manoeuvres(&self) -> u64 {
        self.violations.values().sum()
    }
}

/// Mean and population standard deviation; (0, 0) for no samples.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Steps every ship of a scenario in fast time and evaluates the rules
/// after each step. Scripted ships follow their orders; piloted ships keep
/// their initial orders unless overridden.
#[derive(Debug, Clone)]
pub struct ScenarioRunner {
    pub scenario: Scenario,
    pub states: Vec<ManeuverState>,
    pub overrides: Vec<Option<Controls>>,
    pub time: f64,
    steps: u64,
    dt: f64,
    monitor: RuleMonitor,
    missions: MissionTracker,
    pub events: Vec<PortEvent>,
    pub metrics: SessionMetrics,
}

impl ScenarioRunner {
    pub fn new(scenario: Scenario, dt: f64) -> Result<Self, DynamicsError> {
        if !(dt > 0.0 && dt <= 1.0) {
            return Err(DynamicsError::BadTimeStep(dt));
        }
        let states = scenario.ships.iter().map(|s| s.initial).collect();
        let overrides = vec![None; scenario.ships.len()];
        let monitor = RuleMonitor::new(scenario.rules);
        let missions = MissionTracker::new(&scenario);
        let mut runner = ScenarioRunner {
            scenario,
            states,
            overrides,
            time: 0.0,
            steps: 0,
            dt,
            monitor,
            missions,
            events: Vec::new(),
            metrics: SessionMetrics::default(),
        };
        runner.evaluate();
        Ok(runner)
    }

    pub fn snapshots(&self) -> Vec<ShipSnapshot> {
        let env = &self.scenario.environment;
        self.scenario
            .ships
            .iter()
            .zip(&self.states)
            .map(|(ship, s)| {
                let g = s.ground_velocity(env);
                ShipSnapshot {
                    id: ship.id.clone(),
                    footprint: ship.footprint(s),
                    draft: ship.draft(),
                    sog: g[0].hypot(g[1]),
                }
            })
            .collect()
    }

    fn evaluate(&mut self) -> Vec<PortEvent> {
        let snaps = self.snapshots();
        let mut new = self
            .monitor
            .evaluate(self.time, &snaps, &self.scenario.port);
        new.extend(self.missions.evaluate(self.time, &snaps));
        for e in &new {
            self.metrics.record(e);
        }
        self.events.extend(new.iter().cloned());
        new
    }

    /// Advances one step; returns the events raised by it.
    pub fn step(&mut self) -> Result<Vec<PortEvent>, DynamicsError> {
        let env = self.scenario.environment;
        for (i, ship) in self.scenario.ships.iter().enumerate() {
            let controls = self.overrides[i].clone().unwrap_or_else(|| {
                let (rudder, shaft) = ship.orders_at(self.time);
                Controls {
                    rudder,
                    shaft,
                    ..Default::default()
                }
            });
            self.states[i] = step(&self.states[i], &controls, &ship.config, &env, self.dt)?;
        }
        self.steps += 1;
        self.time = self.steps as f64 * self.dt;
        Ok(self.evaluate())
    }

    pub fn run_until(&mut self, t_end: f64) -> Result<(), DynamicsError> {
        while self.time + 0.5 * self.dt < t_end {
            self.step()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mission(t: f64) -> PortEvent {
        PortEvent {
            kind: EventKind::MissionComplete,
            sim_time: t,
            ships: vec!["a".into()],
            detail: String::new(),
            value: Some(t),
        }
    }

    #[test]
    fn two_missions_mean_and_std() {
        let m = SessionMetrics::from_events(&[mission(600.0), mission(700.0)]);
        assert_eq!(m.mission_mean, 650.0);
        assert_eq!(m.mission_std, 50.0);
    }

    #[test]
    fn single_mission_std_zero() {
        let m = SessionMetrics::from_events(&[mission(600.0)]);
        assert_eq!((m.mission_mean, m.mission_std), (600.0, 0.0));
    }
}
