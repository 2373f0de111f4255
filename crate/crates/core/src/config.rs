//! Ship configuration files.
//!
//! Ship files are TOML with one table per submodel (`[particulars]`,
//! `[mass]`, `[derivatives]`, `[propeller]`, `[rudder]`, `[[thrusters]]`,
//! `[engine]`, `[wind]`, `[seakeeping]`). Angles are degrees, rudder rate
//! deg/s and shaft rate rpm; everything is converted to SI on load. See
//! `docs/cli.md` for the full schema and `ships/kriso.cfg` for an example.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dynamics::{
    resistance_coefficient, EngineModel, HydroDerivatives, InteractionSign, MassProperties,
    PropellerModel, RotationHand, RudderModel, SeakeepingHull, ShipConfig, ShipParticulars,
    Thruster, WindModel, MAX_THRUSTERS,
};
use crate::error::ConfigError;
use crate::units::rpm_to_rps;

/// Schema version understood by this loader.
pub const SHIP_SCHEMA: u32 = 1;

/// Density used when a file does not fix the mass explicitly.
pub const REFERENCE_DENSITY: f64 = 1025.0;

const GRAVITY: f64 = 9.81;

const KRISO_CFG: &str = include_str!("../../../ships/kriso.cfg");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShip {
    name: String,
    #[serde(default = "default_schema")]
    schema: u32,
    particulars: RawParticulars,
    #[serde(default)]
    mass: RawMass,
    derivatives: RawDerivatives,
    propeller: RawPropeller,
    rudder: RawRudder,
    #[serde(default)]
    thrusters: Vec<RawThruster>,
    engine: RawEngine,
    #[serde(default)]
    wind: RawWind,
    #[serde(default)]
    seakeeping: RawSeakeeping,
}

fn default_schema() -> u32 {
    SHIP_SCHEMA
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParticulars {
    length_pp: f64,
    length_wl: f64,
    breadth: f64,
    hull_depth: f64,
    displacement_volume: f64,
    block_coeff: f64,
    draft: Option<f64>,
    wetted_surface: Option<f64>,
    #[serde(default)]
    x_g: f64,
    resistance_coeff: f64,
    #[serde(default = "default_gyradius")]
    yaw_gyradius_fraction: f64,
}

fn default_gyradius() -> f64 {
    0.25
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMass {
    mass: Option<f64>,
    added_mass_x: Option<f64>,
    added_mass_y: Option<f64>,
    yaw_inertia: Option<f64>,
    added_yaw_inertia: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDerivatives {
    x0: Option<f64>,
    xvr: f64,
    yv: f64,
    yr: f64,
    yvvv: f64,
    yvvr: f64,
    yvrr: f64,
    yrrr: f64,
    nv: f64,
    nr: f64,
    nvvv: f64,
    nvvr: f64,
    nvrr: f64,
    nrrr: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPropeller {
    blades: u32,
    diameter: f64,
    pitch_ratio: f64,
    rotation: RotationHand,
    wake_fraction: f64,
    thrust_deduction: f64,
    kt: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRudder {
    #[serde(rename = "type", default)]
    kind: String,
    area: f64,
    surface_area: Option<f64>,
    aspect_ratio: f64,
    #[serde(default = "default_max_angle")]
    max_angle: f64,
    #[serde(default = "default_max_rate")]
    max_rate: f64,
    drag_coeff: f64,
    interaction_coeff: f64,
    x_r: f64,
    x_h: f64,
    #[serde(default = "default_sign")]
    interaction_sign: InteractionSign,
    #[serde(default = "default_straightening")]
    flow_straightening: f64,
    #[serde(default = "default_lever")]
    inflow_lever: f64,
    #[serde(default = "default_one")]
    wake_ratio: f64,
    #[serde(default)]
    race_factor: f64,
    #[serde(default = "default_one")]
    race_coverage: f64,
}

fn default_max_angle() -> f64 {
    35.0
}
fn default_max_rate() -> f64 {
    2.32
}
fn default_sign() -> InteractionSign {
    InteractionSign::Printed
}
fn default_straightening() -> f64 {
    0.5
}
fn default_lever() -> f64 {
    -0.71
}
fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThruster {
    name: String,
    x: f64,
    rated_thrust: f64,
    cutoff_speed: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEngine {
    #[serde(default = "default_engine_tau")]
    time_constant: f64,
    max_shaft_rpm: f64,
}

fn default_engine_tau() -> f64 {
    20.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWind {
    #[serde(default)]
    enabled: bool,
    #[serde(default = "default_air_density")]
    air_density: f64,
    #[serde(default)]
    frontal_area: f64,
    #[serde(default)]
    lateral_area: f64,
    #[serde(default)]
    cx: f64,
    #[serde(default)]
    cy: f64,
    #[serde(default)]
    cn: f64,
}

impl Default for RawWind {
    fn default() -> Self {
        RawWind {
            enabled: false,
            air_density: default_air_density(),
            frontal_area: 0.0,
            lateral_area: 0.0,
            cx: 0.0,
            cy: 0.0,
            cn: 0.0,
        }
    }
}

fn default_air_density() -> f64 {
    1.225
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeakeeping {
    #[serde(default = "default_gm")]
    gm_t: f64,
    roll_period: Option<f64>,
    #[serde(default = "default_roll_zeta")]
    roll_damping_ratio: f64,
    roll_damping: Option<f64>,
    roll_excitation: Option<f64>,
}

impl Default for RawSeakeeping {
    fn default() -> Self {
        RawSeakeeping {
            gm_t: default_gm(),
            roll_period: None,
            roll_damping_ratio: default_roll_zeta(),
            roll_damping: None,
            roll_excitation: None,
        }
    }
}

fn default_gm() -> f64 {
    0.6
}
fn default_roll_zeta() -> f64 {
    0.05
}

/// Parses and validates a ship file held in memory. `origin` is only used
/// in error messages.
pub fn parse_ship(text: &str, origin: &Path) -> Result<ShipConfig, ConfigError> {
    let raw: RawShip = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: origin.to_path_buf(),
        line: e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(1),
        message: e.message().to_string(),
    })?;
    if raw.schema != SHIP_SCHEMA {
        return Err(invalid(
            text,
            origin,
            "",
            "schema",
            format!("unsupported schema {}, expected {SHIP_SCHEMA}", raw.schema),
        ));
    }
    let cfg = build(raw);
    check_sections(&cfg, text, origin)?;
    Ok(cfg)
}

/// Reads and validates a ship file.
pub fn load_ship(path: &Path) -> Result<ShipConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_ship(&text, path)
}

/// Resolves a `--ship` argument: an existing file path, or a bare name
/// looked up as `ships/<name>.cfg`. `kriso` falls back to the copy built
/// into the binary when no file is found.
pub fn resolve_ship(spec: &str) -> Result<ShipConfig, ConfigError> {
    let (text, origin) = resolve_ship_source(spec, None)?;
    parse_ship(&text, &origin)
}

/// Text and origin of a ship reference. Relative paths are tried against
/// `base` first, then the working directory; bare names are also looked up
/// in a `ships/` directory next to `base` or its parent.
pub fn resolve_ship_source(
    spec: &str,
    base: Option<&Path>,
) -> Result<(String, PathBuf), ConfigError> {
    let file = format!("{spec}.cfg");
    let mut candidates = Vec::new();
    if let Some(dir) = base {
        candidates.push(dir.join(spec));
        candidates.push(dir.join("ships").join(&file));
        if let Some(parent) = dir.parent() {
            candidates.push(parent.join("ships").join(&file));
        }
    }
    candidates.push(PathBuf::from(spec));
    candidates.push(PathBuf::from("ships").join(&file));
    for c in candidates {
        if c.is_file() {
            let text = std::fs::read_to_string(&c).map_err(|source| ConfigError::Io {
                path: c.clone(),
                source,
            })?;
            return Ok((text, c));
        }
    }
    if spec == "kriso" {
        return Ok((KRISO_CFG.to_string(), PathBuf::from("ships/kriso.cfg")));
    }
    Err(ConfigError::Io {
        path: PathBuf::from(spec),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such ship file"),
    })
}

/// Hex SHA-256 of a configuration text.
pub fn source_hash(text: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// The Kriso container ship shipped with the repository.
pub fn kriso() -> ShipConfig {
    parse_ship(KRISO_CFG, Path::new("ships/kriso.cfg")).expect("built-in kriso.cfg is valid")
}

/// Text of the built-in Kriso file, for hashing and export.
pub fn kriso_source() -> &'static str {
    KRISO_CFG
}

fn build(raw: RawShip) -> ShipConfig {
    let p = &raw.particulars;
    let draft = p.draft.unwrap_or_else(|| {
        ShipParticulars::draft_from_displacement(
            p.displacement_volume,
            p.length_pp,
            p.breadth,
            p.block_coeff,
        )
    });
    let wetted_surface = p.wetted_surface.unwrap_or_else(|| {
        ShipParticulars::denny_wetted_surface(p.length_pp, p.breadth, draft, p.block_coeff)
    });
    let particulars = ShipParticulars {
        length_pp: p.length_pp,
        length_wl: p.length_wl,
        breadth: p.breadth,
        hull_depth: p.hull_depth,
        draft,
        displacement_volume: p.displacement_volume,
        block_coeff: p.block_coeff,
        x_g: p.x_g,
        wetted_surface,
        resistance_coeff: p.resistance_coeff,
        yaw_gyradius_fraction: p.yaw_gyradius_fraction,
    };

    let estimate = MassProperties::estimate(&particulars, REFERENCE_DENSITY);
    let m = &raw.mass;
    let mass = MassProperties {
        mass: m.mass.unwrap_or(estimate.mass),
        added_mass_x: m.added_mass_x.unwrap_or(estimate.added_mass_x),
        added_mass_y: m.added_mass_y.unwrap_or(estimate.added_mass_y),
        yaw_inertia: m.yaw_inertia.unwrap_or(estimate.yaw_inertia),
        added_yaw_inertia: m.added_yaw_inertia.unwrap_or(estimate.added_yaw_inertia),
    };

    let d = &raw.derivatives;
    let derivatives = HydroDerivatives {
        x0: d.x0.unwrap_or_else(|| resistance_coefficient(&particulars)),
        xvr: d.xvr,
        yv: d.yv,
        yr: d.yr,
        yvvv: d.yvvv,
        yvvr: d.yvvr,
        yvrr: d.yvrr,
        yrrr: d.yrrr,
        nv: d.nv,
        nr: d.nr,
        nvvv: d.nvvv,
        nvvr: d.nvvr,
        nvrr: d.nvrr,
        nrrr: d.nrrr,
    };

    let pr = &raw.propeller;
    let propeller = PropellerModel {
        diameter: pr.diameter,
        blade_count: pr.blades,
        pitch_ratio: pr.pitch_ratio,
        rotation_hand: pr.rotation,
        wake_fraction: pr.wake_fraction,
        thrust_deduction: pr.thrust_deduction,
        kt_coeffs: pr.kt,
    };

    let r = &raw.rudder;
    let rudder = RudderModel {
        area: r.area,
        surface_area: r.surface_area.unwrap_or(r.area),
        aspect_ratio: r.aspect_ratio,
        drag_coeff: r.drag_coeff,
        interaction_coeff: r.interaction_coeff,
        x_r: r.x_r,
        x_h: r.x_h,
        max_angle: r.max_angle.to_radians(),
        max_rate: r.max_rate.to_radians(),
        interaction_sign: r.interaction_sign,
        flow_straightening: r.flow_straightening,
        inflow_lever: r.inflow_lever,
        wake_ratio: r.wake_ratio,
        race_factor: r.race_factor,
        race_coverage: r.race_coverage,
    };

    let thrusters = raw
        .thrusters
        .iter()
        .map(|t| Thruster {
            name: t.name.clone(),
            x: t.x,
            rated_thrust: t.rated_thrust,
            cutoff_speed: t.cutoff_speed,
        })
        .collect();

    let engine = EngineModel {
        time_constant: raw.engine.time_constant,
        max_shaft_rate: rpm_to_rps(raw.engine.max_shaft_rpm),
    };

    let w = &raw.wind;
    let wind = WindModel {
        enabled: w.enabled,
        air_density: w.air_density,
        frontal_area: w.frontal_area,
        lateral_area: w.lateral_area,
        cx: w.cx,
        cy: w.cy,
        cn: w.cn,
    };

    let s = &raw.seakeeping;
    let seakeeping = SeakeepingHull {
        gm_t: s.gm_t,
        roll_period: s.roll_period.unwrap_or_else(|| {
            SeakeepingHull::estimate_roll_period(particulars.breadth, s.gm_t, GRAVITY)
        }),
        roll_damping_ratio: s.roll_damping_ratio,
        roll_damping: s.roll_damping,
        roll_excitation: s.roll_excitation,
    };

    ShipConfig {
        name: raw.name,
        rudder_type: raw.rudder.kind.clone(),
        particulars,
        mass,
        derivatives,
        propeller,
        rudder,
        thrusters,
        engine,
        wind,
        seakeeping,
    }
}

fn check_sections(cfg: &ShipConfig, text: &str, origin: &Path) -> Result<(), ConfigError> {
    let sections: [(&str, Result<(), String>); 5] = [
        ("particulars", cfg.particulars.validate()),
        (
            "mass",
            cfg.mass.validate(&cfg.particulars, REFERENCE_DENSITY),
        ),
        ("derivatives", cfg.derivatives.validate()),
        ("propeller", cfg.propeller.validate()),
        ("rudder", cfg.rudder.validate()),
    ];
    for (section, result) in sections {
        if let Err(message) = result {
            let key = message.split_whitespace().next().unwrap_or("").to_string();
            return Err(invalid(text, origin, section, &key, message));
        }
    }
    if cfg.thrusters.len() > MAX_THRUSTERS {
        return Err(invalid(
            text,
            origin,
            "thrusters",
            "name",
            format!("at most {MAX_THRUSTERS} thrusters supported"),
        ));
    }
    for t in &cfg.thrusters {
        if !(t.rated_thrust >= 0.0 && t.cutoff_speed >= 0.0) {
            return Err(invalid(
                text,
                origin,
                "thrusters",
                "rated_thrust",
                format!(
                    "thruster {} needs non-negative rated_thrust and cutoff_speed",
                    t.name
                ),
            ));
        }
    }
    if !(cfg.engine.time_constant > 0.0) {
        return Err(invalid(
            text,
            origin,
            "engine",
            "time_constant",
            "must be positive".into(),
        ));
    }
    if !(cfg.engine.max_shaft_rate > 0.0) {
        return Err(invalid(
            text,
            origin,
            "engine",
            "max_shaft_rpm",
            "must be positive".into(),
        ));
    }
    let sk = &cfg.seakeeping;
    if !(sk.gm_t >= 0.0) {
        return Err(invalid(
            text,
            origin,
            "seakeeping",
            "gm_t",
            "must be non-negative".into(),
        ));
    }
    if !(sk.roll_period > 0.0 && sk.roll_period.is_finite()) {
        return Err(invalid(
            text,
            origin,
            "seakeeping",
            "roll_period",
            format!(
                "must be positive and finite, got {} (zero gm_t needs an explicit roll_period)",
                sk.roll_period
            ),
        ));
    }
    Ok(())
}

fn invalid(text: &str, origin: &Path, section: &str, key: &str, message: String) -> ConfigError {
    ConfigError::Invalid {
        path: origin.to_path_buf(),
        line: key_line(text, section, key),
        key: if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        },
        message,
    }
}

pub(crate) fn line_of_offset(text: &str, offset: usize) -> usize {
    let end = offset.min(text.len());
    text.as_bytes()[..end]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

/// Line of `key = ...` inside `[section]`, else the section header, else 1.
/// An empty section means the top level.
pub(crate) fn key_line(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut header_line = None;
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            current = trimmed
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string();
            if current == section && header_line.is_none() {
                header_line = Some(idx + 1);
            }
            continue;
        }
        if current == section {
            if let Some(rest) = trimmed.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return idx + 1;
                }
            }
        }
    }
    header_line.unwrap_or(1)
}

/// First line containing `needle`, else 1.
pub(crate) fn line_containing(text: &str, needle: &str) -> usize {
    text.lines()
        .position(|l| l.contains(needle))
        .map(|i| i + 1)
        .unwrap_or(1)
}
