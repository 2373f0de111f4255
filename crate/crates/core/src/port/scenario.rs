//! Training scenarios: a port, the ships in it, weather and rules.
//!
//! Scenario files are TOML. Geometry and ship references are resolved
//! relative to the scenario file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::geometry::{Footprint, Point};
use super::{parse_geometry, salerno_source, PortGeometry};
use crate::config::{
    key_line, line_containing, line_of_offset, parse_ship, resolve_ship_source, source_hash,
};
use crate::dynamics::{Environment, ManeuverState, ShipConfig, Wind};
use crate::error::ConfigError;
use crate::seakeeping::WaveState;
use crate::trials::trim_shaft_rate;
use crate::units::{knots_to_ms, rpm_to_rps};

pub const SCENARIO_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Piloted,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rules {
    #[serde(default = "default_true")]
    pub channel_one_by_one: bool,
    #[serde(default)]
    pub speed_limit_kn: Option<f64>,
}

impl Default for Rules {
    fn default() -> Self {
        Rules {
            channel_one_by_one: true,
            speed_limit_kn: None,
        }
    }
}

fn default_true() -> bool {
    true
}

/// Reach `position` within `radius` at less than `max_speed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionGoal {
    pub berth: String,
    pub position: Point,
    pub radius: f64,
    /// m/s
    pub max_speed: f64,
}

/// A timed order for a scripted ship. Missing fields keep the last value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedOrder {
    pub time: f64,
    /// rad
    pub rudder: Option<f64>,
    /// rev/s
    pub shaft: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioShip {
    pub id: String,
    pub ship_ref: String,
    pub config: ShipConfig,
    pub config_hash: String,
    pub role: Role,
    pub initial: ManeuverState,
    /// Initial orders: rudder rad, shaft rev/s.
    pub rudder_command: f64,
    pub shaft_command: f64,
    pub mission: Option<MissionGoal>,
    pub orders: Vec<ScriptedOrder>,
}

impl ScenarioShip {
    pub fn footprint(&self, state: &ManeuverState) -> Footprint {
        let p = &self.config.particulars;
        Footprint::new(state.x, state.y, state.psi, p.length_pp, p.breadth)
    }

    pub fn draft(&self) -> f64 {
        self.config.particulars.draft
    }

    /// Orders in force at `time`: (rudder, shaft).
    pub fn orders_at(&self, time: f64) -> (f64, f64) {
        let mut rudder = self.rudder_command;
        let mut shaft = self.shaft_command;
        for o in self.orders.iter().take_while(|o| o.time <= time) {
            rudder = o.rudder.unwrap_or(rudder);
            shaft = o.shaft.unwrap_or(shaft);
        }
        (rudder, shaft)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub path: PathBuf,
    pub source_hash: String,
    pub port: PortGeometry,
    pub ships: Vec<ScenarioShip>,
    pub environment: Environment,
    pub rules: Rules,
    /// Session length, s.
    pub duration: Option<f64>,
}

impl Scenario {
    pub fn ship(&self, id: &str) -> Option<&ScenarioShip> {
        self.ships.iter().find(|s| s.id == id)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema: u32,
    name: String,
    geometry: String,
    duration: Option<f64>,
    #[serde(default)]
    environment: RawEnvironment,
    wave: Option<RawWave>,
    #[serde(default)]
    rules: Rules,
    ships: Vec<RawShipEntry>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawEnvironment {
    water_density: Option<f64>,
    #[serde(default)]
    current_kn: f64,
    /// Direction the current sets towards, deg.
    #[serde(default)]
    current_direction: f64,
    #[serde(default)]
    wind_kn: f64,
    /// Direction the wind blows from, deg.
    #[serde(default)]
    wind_direction: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWave {
    amplitude: f64,
    period: f64,
    /// Direction the waves travel towards, deg.
    direction: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShipEntry {
    id: String,
    ship: String,
    role: Role,
    position: Point,
    #[serde(default)]
    heading: f64,
    #[serde(default)]
    speed_kn: f64,
    shaft_rpm: Option<f64>,
    #[serde(default)]
    rudder: f64,
    mission: Option<RawMission>,
    #[serde(default)]
    orders: Vec<RawOrder>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMission {
    berth: String,
    #[serde(default = "default_radius")]
    radius: f64,
    #[serde(default = "default_mission_speed")]
    max_speed_kn: f64,
}

fn default_radius() -> f64 {
    100.0
}
fn default_mission_speed() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOrder {
    time: f64,
    rudder: Option<f64>,
    shaft_rpm: Option<f64>,
}

fn load_geometry_ref(spec: &str, base: &Path) -> Result<PortGeometry, ConfigError> {
    let candidate = base.join(spec);
    if candidate.is_file() {
        return super::load_geometry(&candidate);
    }
    let direct = PathBuf::from(spec);
    if direct.is_file() {
        return super::load_geometry(&direct);
    }
    if spec == "salerno" || spec.ends_with("salerno.geo") {
        return parse_geometry(salerno_source(), Path::new("ports/salerno.geo"));
    }
    Err(ConfigError::Io {
        path: candidate,
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such geometry file"),
    })
}

/// Parses a scenario held in memory; `origin` locates relative references.
pub fn parse_scenario(text: &str, origin: &Path) -> Result<Scenario, ConfigError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: origin.to_path_buf(),
        line: e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(1),
        message: e.message().to_string(),
    })?;
    let fail = |line: usize, key: &str, message: String| ConfigError::Invalid {
        path: origin.to_path_buf(),
        line,
        key: key.to_string(),
        message,
    };
    if raw.schema != SCENARIO_SCHEMA {
        return Err(fail(
            key_line(text, "", "schema"),
            "schema",
            format!(
                "unsupported schema {}, expected {SCENARIO_SCHEMA}",
                raw.schema
            ),
        ));
    }
    if let Some(d) = raw.duration {
        if !(d > 0.0) {
            return Err(fail(
                key_line(text, "", "duration"),
                "duration",
                "must be positive".into(),
            ));
        }
    }
    let base = origin.parent().unwrap_or(Path::new("."));
    let port = load_geometry_ref(&raw.geometry, base)?;

    let mut env = Environment::default();
    let re = &raw.environment;
    if let Some(rho) = re.water_density {
        env.water_density = rho;
    }
    let cur = knots_to_ms(re.current_kn);
    let cd = re.current_direction.to_radians();
    env.current = [cur * cd.cos(), cur * cd.sin()];
    if re.wind_kn > 0.0 {
        env.wind = Some(Wind {
            speed: knots_to_ms(re.wind_kn),
            direction: re.wind_direction.to_radians(),
        });
    }
    env.validate()
        .map_err(|m| fail(line_containing(text, "[environment]"), "environment", m))?;
    if let Some(w) = &raw.wave {
        let wave =
            WaveState::from_period(w.amplitude, w.period, w.direction.to_radians(), env.gravity)
                .map_err(|e| fail(line_containing(text, "[wave]"), "wave", e.to_string()))?;
        env.wave = Some(wave);
    }
    if let Some(limit) = raw.rules.speed_limit_kn {
        if !(limit > 0.0) {
            return Err(fail(
                key_line(text, "rules", "speed_limit_kn"),
                "rules.speed_limit_kn",
                "must be positive".into(),
            ));
        }
    }

    let mut ships: Vec<ScenarioShip> = Vec::new();
    for s in &raw.ships {
        let line = line_containing(text, &format!("id = \"{}\"", s.id));
        if ships.iter().any(|o| o.id == s.id) {
            return Err(fail(
                line,
                "ships.id",
                format!("duplicate ship id `{}`", s.id),
            ));
        }
        let (ship_text, ship_origin) = resolve_ship_source(&s.ship, Some(base))?;
        let config = parse_ship(&ship_text, &ship_origin)?;
        let speed = knots_to_ms(s.speed_kn);
        let shaft = match s.shaft_rpm {
            Some(rpm) => rpm_to_rps(rpm),
            None if speed > 0.0 => trim_shaft_rate(&config, &env, speed)
                .map_err(|e| fail(line, "ships.speed_kn", e.to_string()))?,
            None => 0.0,
        };
        let rudder = s.rudder.to_radians();
        if rudder.abs() > config.rudder.max_angle * (1.0 + 1e-12) {
            return Err(fail(
                line,
                "ships.rudder",
                format!("{} deg beyond the rudder limit", s.rudder),
            ));
        }
        let initial = ManeuverState {
            x: s.position[0],
            y: s.position[1],
            psi: crate::units::wrap_pi(s.heading.to_radians()),
            u: speed,
            delta: rudder,
            n: shaft,
            ..Default::default()
        };
        let mission = match &s.mission {
            Some(m) => {
                let berth = port
                    .berth(&m.berth)
                    .map_err(|e| fail(line, "ships.mission.berth", e.to_string()))?;
                if !(m.radius > 0.0 && m.max_speed_kn > 0.0) {
                    return Err(fail(
                        line,
                        "ships.mission",
                        "radius and max_speed_kn must be positive".into(),
                    ));
                }
                Some(MissionGoal {
                    berth: berth.name.clone(),
                    position: berth.position,
                    radius: m.radius,
                    max_speed: knots_to_ms(m.max_speed_kn),
                })
            }
            None => None,
        };
        let mut orders = Vec::new();
        let mut last = f64::NEG_INFINITY;
        for o in &s.orders {
            if !(o.time >= 0.0 && o.time >= last) {
                return Err(fail(
                    line,
                    "ships.orders.time",
                    "order times must be non-negative and sorted".into(),
                ));
            }
            last = o.time;
            if let Some(r) = o.rudder {
                if r.to_radians().abs() > config.rudder.max_angle * (1.0 + 1e-12) {
                    return Err(fail(
                        line,
                        "ships.orders.rudder",
                        format!("{r} deg beyond the rudder limit"),
                    ));
                }
            }
            orders.push(ScriptedOrder {
                time: o.time,
                rudder: o.rudder.map(f64::to_radians),
                shaft: o.shaft_rpm.map(rpm_to_rps),
            });
        }
        let ship = ScenarioShip {
            id: s.id.clone(),
            ship_ref: s.ship.clone(),
            config_hash: source_hash(&ship_text),
            config,
            role: s.role,
            initial,
            rudder_command: rudder,
            shaft_command: shaft,
            mission,
            orders,
        };
        let fp = ship.footprint(&initial);
        let mut probes = fp.corners().to_vec();
        probes.push([fp.x, fp.y]);
        for p in probes {
            let depth = port
                .depth_at(p)
                .map_err(|e| fail(line, "ships.position", e.to_string()))?;
            if depth < ship.draft() {
                return Err(fail(
                    line,
                    "ships.position",
                    format!(
                        "depth {depth} m at ({:.1}, {:.1}) is less than the draft {:.2} m",
                        p[0],
                        p[1],
                        ship.draft()
                    ),
                ));
            }
        }
        ships.push(ship);
    }
    if ships.is_empty() {
        return Err(fail(1, "ships", "scenario has no ships".into()));
    }

    Ok(Scenario {
        name: raw.name,
        path: origin.to_path_buf(),
        source_hash: source_hash(text),
        port,
        ships,
        environment: env,
        rules: raw.rules,
        duration: raw.duration,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_SHIPS: &str = r#"
schema = 1
name = "test"
geometry = "salerno"

[rules]
speed_limit_kn = 8.0

[[ships]]
id = "alpha"
ship = "kriso"
role = "piloted"
position = [-2500.0, 500.0]
heading = 0.0
speed_kn = 6.0

[ships.mission]
berth = "ligea"
radius = 150.0

[[ships]]
id = "bravo"
ship = "kriso"
role = "scripted"
position = [-300.0, 500.0]
heading = 180.0
speed_kn = 4.0

[[ships.orders]]
time = 60.0
rudder = 10.0
"#;

    #[test]
    fn parses_two_ship_scenario() {
        let s = parse_scenario(TWO_SHIPS, Path::new("mem.toml")).unwrap();
        assert_eq!(s.ships.len(), 2);
        assert!(s.ships[0].shaft_command > 0.0);
        assert_eq!(s.ships[0].mission.as_ref().unwrap().berth, "ligea");
        assert_eq!(s.ships[1].orders_at(30.0).0, 0.0);
        assert!((s.ships[1].orders_at(60.0).0 - 10f64.to_radians()).abs() < 1e-15);
        assert_eq!(s.rules.speed_limit_kn, Some(8.0));
        assert!(s.rules.channel_one_by_one);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = TWO_SHIPS.replace("id = \"bravo\"", "id = \"alpha\"");
        let err = parse_scenario(&text, Path::new("mem.toml")).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn ship_on_land_rejected() {
        let text = TWO_SHIPS.replace("position = [-300.0, 500.0]", "position = [1000.0, 0.0]");
        let err = parse_scenario(&text, Path::new("mem.toml")).unwrap_err();
        let expected = text
            .lines()
            .position(|l| l.contains("id = \"bravo\""))
            .unwrap()
            + 1;
        assert_eq!(err.line(), Some(expected), "{err}");
    }
}
