//! Harbour geometry, scenarios and the rule predicates evaluated over ship
//! footprints.
//!
//! Geometry files (`.geo`) are TOML in the local frame (x north, y east,
//! metres). See `ports/salerno.geo`.

mod geometry;
mod predicates;
mod rules;
mod scenario;
mod session;

pub use geometry::{
    circle_contains, footprints_overlap, polygons_contact, polyline_length, segments_intersect,
    Aabb, Footprint, Point, Polygon,
};
pub use predicates::{
    channel_occupancy, check_collision, check_grounding, Collision, ContactKind, Grounding,
};
pub use rules::{EpisodeTracker, EventKind, PortEvent, RuleMonitor, ShipSnapshot};
pub use scenario::{
    load_scenario, parse_scenario, MissionGoal, Role, Rules, Scenario, ScenarioShip, ScriptedOrder,
    SCENARIO_SCHEMA,
};
pub use session::{mean_std, MissionTracker, ScenarioRunner, SessionMetrics};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{key_line, line_containing, line_of_offset};
use crate::error::ConfigError;

pub const GEO_SCHEMA: u32 = 1;

/// Declared and measured quay lengths may differ by this much, m.
pub const QUAY_LENGTH_TOLERANCE: f64 = 0.5;

const SALERNO_GEO: &str = include_str!("../../../../ports/salerno.geo");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PortError {
    #[error("point ({0:.1}, {1:.1}) is outside the scenario bounds")]
    OutOfBounds(f64, f64),
    #[error("unknown quay `{0}`")]
    UnknownQuay(String),
    #[error("unknown berth `{0}`")]
    UnknownBerth(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandFeature {
    pub name: String,
    pub polygon: Polygon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quay {
    pub name: String,
    /// First and last docking number.
    pub docking: (u32, u32),
    /// Declared length, m.
    pub length: f64,
    pub line: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub polygon: Polygon,
    pub depth: f64,
    pub width: f64,
    /// Axis heading, rad.
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionArea {
    pub center: Point,
    pub diameter: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthArea {
    pub name: String,
    pub polygon: Polygon,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Berth {
    pub name: String,
    pub quay: String,
    pub position: Point,
    /// Approach heading, rad.
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortGeometry {
    pub name: String,
    pub bounds: Aabb,
    pub ambient_depth: f64,
    pub land: Vec<LandFeature>,
    pub quays: Vec<Quay>,
    pub channel: Channel,
    pub evolution: EvolutionArea,
    pub depth_areas: Vec<DepthArea>,
    /// Area where the speed limit applies.
    pub harbour: Polygon,
    pub berths: Vec<Berth>,
}

impl PortGeometry {
    /// Water depth at a point. Land wins over the channel, the channel over
    /// the evolution area, then depth areas in file order, then ambient.
    pub fn depth_at(&self, p: Point) -> Result<f64, PortError> {
        if !self.bounds.contains(p) {
            return Err(PortError::OutOfBounds(p[0], p[1]));
        }
        if self.is_land(p) {
            return Ok(0.0);
        }
        if self.channel.polygon.contains(p) {
            return Ok(self.channel.depth);
        }
        if circle_contains(self.evolution.center, 0.5 * self.evolution.diameter, p) {
            return Ok(self.evolution.depth);
        }
        if let Some(a) = self.depth_areas.iter().find(|a| a.polygon.contains(p)) {
            return Ok(a.depth);
        }
        Ok(self.ambient_depth)
    }

    pub fn is_land(&self, p: Point) -> bool {
        self.land.iter().any(|l| l.polygon.contains(p))
    }

    /// Declared length of a quay; names match case-insensitively.
    pub fn quay_length(&self, name: &str) -> Result<f64, PortError> {
        self.quay(name).map(|q| q.length)
    }

    pub fn quay(&self, name: &str) -> Result<&Quay, PortError> {
        self.quays
            .iter()
            .find(|q| q.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| PortError::UnknownQuay(name.to_string()))
    }

    pub fn berth(&self, name: &str) -> Result<&Berth, PortError> {
        self.berths
            .iter()
            .find(|b| b.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| PortError::UnknownBerth(name.to_string()))
    }

    pub fn in_harbour(&self, p: Point) -> bool {
        self.harbour.contains(p)
    }

    /// The whole layout shifted by (dx, dy).
    pub fn translated(&self, dx: f64, dy: f64) -> PortGeometry {
        let sh = |p: Point| [p[0] + dx, p[1] + dy];
        PortGeometry {
            name: self.name.clone(),
            bounds: Aabb {
                min: sh(self.bounds.min),
                max: sh(self.bounds.max),
            },
            ambient_depth: self.ambient_depth,
            land: self
                .land
                .iter()
                .map(|l| LandFeature {
                    name: l.name.clone(),
                    polygon: l.polygon.translated(dx, dy),
                })
                .collect(),
            quays: self
                .quays
                .iter()
                .map(|q| Quay {
                    line: q.line.iter().map(|p| sh(*p)).collect(),
                    ..q.clone()
                })
                .collect(),
            channel: Channel {
                polygon: self.channel.polygon.translated(dx, dy),
                ..self.channel.clone()
            },
            evolution: EvolutionArea {
                center: sh(self.evolution.center),
                ..self.evolution
            },
            depth_areas: self
                .depth_areas
                .iter()
                .map(|a| DepthArea {
                    polygon: a.polygon.translated(dx, dy),
                    ..a.clone()
                })
                .collect(),
            harbour: self.harbour.translated(dx, dy),
            berths: self
                .berths
                .iter()
                .map(|b| Berth {
                    position: sh(b.position),
                    ..b.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeo {
    schema: u32,
    name: String,
    ambient_depth: f64,
    bounds: RawBounds,
    #[serde(default)]
    land: Vec<RawNamedPolygon>,
    channel: RawChannel,
    evolution: RawEvolution,
    #[serde(default)]
    depth_areas: Vec<RawDepthArea>,
    harbour: RawHarbour,
    #[serde(default)]
    quays: Vec<RawQuay>,
    #[serde(default)]
    berths: Vec<RawBerth>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    min: Point,
    max: Point,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNamedPolygon {
    name: String,
    polygon: Vec<Point>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    depth: f64,
    width: f64,
    #[serde(default)]
    heading: f64,
    polygon: Vec<Point>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvolution {
    center: Point,
    diameter: f64,
    depth: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDepthArea {
    name: String,
    depth: f64,
    polygon: Vec<Point>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHarbour {
    polygon: Vec<Point>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuay {
    name: String,
    docking: (u32, u32),
    length: f64,
    line: Vec<Point>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBerth {
    name: String,
    quay: String,
    position: Point,
    heading: f64,
}

/// Parses and validates a geometry file held in memory.
pub fn parse_geometry(text: &str, origin: &Path) -> Result<PortGeometry, ConfigError> {
    let raw: RawGeo = toml::from_str(text).map_err(|e| ConfigError::Parse {
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
    let named_line = |name: &str| line_containing(text, &format!("\"{name}\""));

    if raw.schema != GEO_SCHEMA {
        return Err(fail(
            key_line(text, "", "schema"),
            "schema",
            format!("unsupported schema {}, expected {GEO_SCHEMA}", raw.schema),
        ));
    }
    let check_positive = |v: f64, line: usize, key: &str| {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(fail(line, key, format!("{v} must be positive")))
        }
    };
    let check_polygon = |pts: &[Point], line: usize, key: &str| -> Result<Polygon, ConfigError> {
        let poly = Polygon::new(pts.to_vec());
        if pts.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(fail(line, key, "non-finite vertex".into()));
        }
        if !poly.is_simple() || poly.signed_area() == 0.0 {
            return Err(fail(line, key, "polygon is not simple".into()));
        }
        Ok(poly)
    };

    check_positive(
        raw.ambient_depth,
        key_line(text, "", "ambient_depth"),
        "ambient_depth",
    )?;
    let bounds = Aabb {
        min: raw.bounds.min,
        max: raw.bounds.max,
    };
    if !(bounds.min[0] < bounds.max[0] && bounds.min[1] < bounds.max[1]) {
        return Err(fail(
            key_line(text, "", "bounds"),
            "bounds",
            "empty bounds".into(),
        ));
    }

    let mut land = Vec::new();
    for l in &raw.land {
        let line = named_line(&l.name);
        land.push(LandFeature {
            name: l.name.clone(),
            polygon: check_polygon(&l.polygon, line, "land.polygon")?,
        });
    }

    let ch = &raw.channel;
    check_positive(
        ch.depth,
        key_line(text, "channel", "depth"),
        "channel.depth",
    )?;
    check_positive(
        ch.width,
        key_line(text, "channel", "width"),
        "channel.width",
    )?;
    let channel = Channel {
        polygon: check_polygon(
            &ch.polygon,
            key_line(text, "channel", "polygon"),
            "channel.polygon",
        )?,
        depth: ch.depth,
        width: ch.width,
        heading: ch.heading.to_radians(),
    };

    let ev = &raw.evolution;
    check_positive(
        ev.depth,
        key_line(text, "evolution", "depth"),
        "evolution.depth",
    )?;
    check_positive(
        ev.diameter,
        key_line(text, "evolution", "diameter"),
        "evolution.diameter",
    )?;

    let mut depth_areas = Vec::new();
    for a in &raw.depth_areas {
        let line = named_line(&a.name);
        check_positive(a.depth, line, "depth_areas.depth")?;
        depth_areas.push(DepthArea {
            name: a.name.clone(),
            polygon: check_polygon(&a.polygon, line, "depth_areas.polygon")?,
            depth: a.depth,
        });
    }

    let harbour = check_polygon(
        &raw.harbour.polygon,
        key_line(text, "harbour", "polygon"),
        "harbour.polygon",
    )?;

    let mut quays: Vec<Quay> = Vec::new();
    for q in &raw.quays {
        let line = named_line(&q.name);
        if quays.iter().any(|o| o.name.eq_ignore_ascii_case(&q.name)) {
            return Err(fail(
                line,
                "quays.name",
                format!("duplicate quay `{}`", q.name),
            ));
        }
        check_positive(q.length, line, "quays.length")?;
        if q.line.len() < 2 {
            return Err(fail(line, "quays.line", "needs at least two points".into()));
        }
        let measured = polyline_length(&q.line);
        if (measured - q.length).abs() > QUAY_LENGTH_TOLERANCE {
            return Err(fail(
                line,
                "quays.length",
                format!(
                    "declared {} m but the line measures {measured:.2} m",
                    q.length
                ),
            ));
        }
        if q.docking.0 > q.docking.1 {
            return Err(fail(
                line,
                "quays.docking",
                "first docking number after last".into(),
            ));
        }
        quays.push(Quay {
            name: q.name.clone(),
            docking: q.docking,
            length: q.length,
            line: q.line.clone(),
        });
    }

    let mut berths: Vec<Berth> = Vec::new();
    for b in &raw.berths {
        let line = named_line(&b.name);
        if !quays.iter().any(|q| q.name.eq_ignore_ascii_case(&b.quay)) {
            return Err(fail(
                line,
                "berths.quay",
                format!("unknown quay `{}`", b.quay),
            ));
        }
        if berths.iter().any(|o| o.name.eq_ignore_ascii_case(&b.name)) {
            return Err(fail(
                line,
                "berths.name",
                format!("duplicate berth `{}`", b.name),
            ));
        }
        berths.push(Berth {
            name: b.name.clone(),
            quay: b.quay.clone(),
            position: b.position,
            heading: b.heading.to_radians(),
        });
    }

    let geo = PortGeometry {
        name: raw.name,
        bounds,
        ambient_depth: raw.ambient_depth,
        land,
        quays,
        channel,
        evolution: EvolutionArea {
            center: ev.center,
            diameter: ev.diameter,
            depth: ev.depth,
        },
        depth_areas,
        harbour,
        berths,
    };
    for b in &geo.berths {
        if geo.is_land(b.position) || !geo.bounds.contains(b.position) {
            return Err(fail(
                named_line(&b.name),
                "berths.position",
                "berth is not on water".into(),
            ));
        }
    }
    Ok(geo)
}

pub fn load_geometry(path: &Path) -> Result<PortGeometry, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_geometry(&text, path)
}

/// The bundled Salerno layout.
pub fn salerno() -> PortGeometry {
    parse_geometry(SALERNO_GEO, Path::new("ports/salerno.geo")).expect("bundled geometry is valid")
}

pub fn salerno_source() -> &'static str {
    SALERNO_GEO
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_examples() {
        let g = salerno();
        assert_eq!(g.depth_at([-1000.0, 500.0]).unwrap(), 13.0);
        assert_eq!(g.depth_at([-300.0, 500.0]).unwrap(), 12.0);
        assert_eq!(g.depth_at([1000.0, 0.0]).unwrap(), 0.0);
        assert_eq!(g.depth_at([0.0, -500.0]).unwrap(), 11.0);
        assert_eq!(g.depth_at([-3000.0, 0.0]).unwrap(), 25.0);
        assert_eq!(
            g.depth_at([-9000.0, 0.0]),
            Err(PortError::OutOfBounds(-9000.0, 0.0))
        );
    }

    #[test]
    fn quay_lengths() {
        let g = salerno();
        assert_eq!(g.quay_length("Ponente").unwrap(), 563.0);
        assert_eq!(g.quay_length("Trapezio").unwrap(), 890.0);
        assert_eq!(g.quay_length("Manfredi").unwrap(), 380.0);
        assert!(matches!(
            g.quay_length("Molo Nord"),
            Err(PortError::UnknownQuay(_))
        ));
        for q in &g.quays {
            assert!((polyline_length(&q.line) - q.length).abs() <= QUAY_LENGTH_TOLERANCE);
        }
    }

    #[test]
    fn channel_width_matches_polygon() {
        let g = salerno();
        let b = g.channel.polygon.bbox();
        assert_eq!(b.max[1] - b.min[1], g.channel.width);
    }

    #[test]
    fn quay_length_mismatch_reports_line() {
        let text = SALERNO_GEO.replace("length = 226.0", "length = 230.0");
        let err = parse_geometry(&text, Path::new("bad.geo")).unwrap_err();
        let expected = SALERNO_GEO
            .lines()
            .position(|l| l.contains("\"Rosso\""))
            .unwrap()
            + 1;
        assert_eq!(err.line(), Some(expected), "{err}");
    }

    #[test]
    fn self_intersecting_polygon_rejected() {
        let text = SALERNO_GEO.replace(
            "polygon = [[400.0, -200.0], [800.0, -200.0], [800.0, -50.0], [400.0, -50.0]]",
            "polygon = [[400.0, -200.0], [800.0, -50.0], [800.0, -200.0], [400.0, -50.0]]",
        );
        let err = parse_geometry(&text, Path::new("bad.geo")).unwrap_err();
        let expected = SALERNO_GEO
            .lines()
            .position(|l| l.contains("\"trapezio pier\""))
            .unwrap()
            + 1;
        assert_eq!(err.line(), Some(expected), "{err}");
    }

    #[test]
    fn non_positive_depth_rejected() {
        let text = SALERNO_GEO.replace("depth = 13.0", "depth = 0.0");
        let err = parse_geometry(&text, Path::new("bad.geo")).unwrap_err();
        let expected = SALERNO_GEO
            .lines()
            .position(|l| l.contains("depth = 13.0"))
            .unwrap()
            + 1;
        assert_eq!(err.line(), Some(expected), "{err}");
    }

    #[test]
    fn berths_are_clear_of_land() {
        let g = salerno();
        for b in &g.berths {
            let fp = Footprint::new(b.position[0], b.position[1], b.heading, 230.0, 32.2);
            for l in &g.land {
                assert!(
                    polygons_contact(&fp.polygon(), &l.polygon).is_none(),
                    "{} touches {}",
                    b.name,
                    l.name
                );
            }
        }
    }
}
