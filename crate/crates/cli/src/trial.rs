use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use harbour_core::config::resolve_ship;
use harbour_core::trials::{
    record_csv, record_hash, run_and_measure, run_battery, standard_battery, TrialError,
    TrialMetrics, TrialRecord, TrialSpec,
};
use harbour_core::units::{ms_to_knots, parse_speed};
use harbour_core::{DynamicsError, Environment};

use crate::{exit, CmdResult, Failure, Format};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Circle,
    Zigzag,
    Stop,
    /// The four reference trials, run in parallel.
    Battery,
}

#[derive(Debug, Args)]
pub struct TrialArgs {
    #[arg(value_enum)]
    kind: Kind,
    /// Approach speed, e.g. `8kn` or `4.1m/s`; bare numbers are knots.
    #[arg(long, default_value = "8kn", value_parser = speed)]
    speed: f64,
    /// Circle rudder angle, deg; negative turns to port.
    #[arg(long, default_value_t = 35.0, allow_hyphen_values = true)]
    rudder: f64,
    /// Zigzag execute/switch angles, deg, e.g. `10/10` or `-20/20`.
    #[arg(long, default_value = "10/10", value_parser = pair)]
    pair: (f64, f64),
    /// Ship file or name of a file under `ships/`.
    #[arg(long, default_value = "kriso")]
    ship: String,
    /// Integration step, s.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated-time limit, s.
    #[arg(long)]
    max_time: Option<f64>,
    /// Directory for record and metrics files.
    #[arg(long, default_value = "trials")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

fn speed(s: &str) -> Result<f64, String> {
    parse_speed(s)
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("cannot read speed {s:?}"))
}

fn pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once('/')
        .ok_or_else(|| format!("expected EXEC/SWITCH, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

fn trial_failure(e: TrialError) -> Failure {
    match e {
        TrialError::InvalidSpec(_) | TrialError::Dynamics(DynamicsError::BadTimeStep(_)) => {
            Failure::config(e)
        }
        TrialError::Io(_) => Failure::new(exit::RUNTIME, e),
        _ => Failure::new(exit::FAILED, e),
    }
}

fn specs(a: &TrialArgs) -> Vec<(String, TrialSpec)> {
    let kn = ms_to_knots(a.speed);
    let tag = format!("{}kn", fmt_num(kn));
    let mut out: Vec<(String, TrialSpec)> = match a.kind {
        Kind::Circle => vec![(
            format!("circle_{tag}_{}deg", fmt_num(a.rudder)),
            TrialSpec::circle(kn, a.rudder),
        )],
        Kind::Zigzag => vec![(
            format!("zigzag_{}_{}_{tag}", fmt_num(a.pair.0), fmt_num(a.pair.1)),
            TrialSpec::zigzag(kn, a.pair.0, a.pair.1),
        )],
        Kind::Stop => vec![(format!("stop_{tag}"), TrialSpec::stop(kn))],
        Kind::Battery => standard_battery()
            .into_iter()
            .map(|(n, s)| (n.to_string(), s))
            .collect(),
    };
    for (_, s) in &mut out {
        if a.kind != Kind::Battery {
            s.approach_speed = a.speed;
        }
        if let Some(dt) = a.dt {
            s.dt = dt;
        }
        if let Some(t) = a.max_time {
            s.max_sim_time = t;
        }
    }
    out
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn write_outputs(
    dir: &Path,
    name: &str,
    record: &TrialRecord,
    metrics: &TrialMetrics,
) -> Result<String, Failure> {
    let io = |e: std::io::Error| Failure::new(exit::RUNTIME, format!("{}: {e}", dir.display()));
    let csv = record_csv(record).map_err(trial_failure)?;
    fs::write(dir.join(format!("{name}.csv")), &csv).map_err(io)?;
    let mut m = String::from("metric,value\n");
    for (k, v) in metrics.rows() {
        m.push_str(&format!("{k},{v}\n"));
    }
    fs::write(dir.join(format!("{name}.metrics.csv")), m).map_err(io)?;
    record_hash(record).map_err(trial_failure)
}

pub fn run(a: TrialArgs) -> CmdResult {
    let cfg = resolve_ship(&a.ship).map_err(Failure::config)?;
    let env = Environment::default();
    let specs = specs(&a);
    for (_, s) in &specs {
        s.validate(&cfg).map_err(trial_failure)?;
    }
    fs::create_dir_all(&a.out)
        .map_err(|e| Failure::new(exit::RUNTIME, format!("{}: {e}", a.out.display())))?;
    let results = if specs.len() > 1 {
        let only: Vec<TrialSpec> = specs.iter().map(|(_, s)| *s).collect();
        run_battery(&only, &cfg, &env)
    } else {
        vec![run_and_measure(&specs[0].1, &cfg, &env)]
    };
    if a.format == Format::Csv {
        println!("trial,metric,value");
    }
    let mut failed = None;
    for ((name, _), r) in specs.iter().zip(results) {
        let (record, metrics) = match r {
            Ok(v) => v,
            Err(e) => {
                eprintln!("{name}: {e}");
                failed.get_or_insert(trial_failure(e));
                continue;
            }
        };
        let hash = write_outputs(&a.out, name, &record, &metrics)?;
        match a.format {
            Format::Csv => {
                for (k, v) in metrics.rows() {
                    println!("{name},{k},{v}");
                }
                println!("{name},samples,{}", record.len());
            }
            Format::Json => {
                let v = serde_json::json!({"trial": name, "metrics": metrics, "samples": record.len(), "sha256": hash});
                println!("{v}");
            }
            Format::Table => {
                println!("{name}");
                for (k, v) in metrics.rows() {
                    println!("  {k:<24} {v:>14.4}");
                }
                println!("  {:<24} {:>14}", "samples", record.len());
                println!("  {:<24} {hash}", "sha256");
            }
        }
    }
    failed.map_or(Ok(()), Err)
}
