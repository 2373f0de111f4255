use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread::sleep;
use std::time::Duration;

use clap::Args;
use harbour_core::config::source_hash;
use harbour_core::port::{load_scenario, Role, Scenario};
use harbour_fed::bridge::{
    read_order_log, start_bridge, BridgeOptions, BridgeSim, ReplayError, RunError, DEFAULT_DT,
};
use harbour_fed::rti::{RtiServer, ServerConfig, DEFAULT_RTI_ENDPOINT, RTI_ENV};
use harbour_fed::tower::{start_tower, TowerOptions, DEFAULT_HISTORY};

use crate::{exit, interrupted, CmdResult, Failure};

const WAIT_TICK: Duration = Duration::from_millis(50);

fn scenario(path: &Path) -> Result<Scenario, Failure> {
    load_scenario(path).map_err(Failure::config)
}

fn run_failure(e: RunError) -> Failure {
    match e {
        RunError::Bind(..) => Failure::new(exit::BIND, e),
        RunError::JoinRejected(_) => Failure::new(exit::REJECTED, e),
        RunError::NoUi => Failure::config(e),
        _ => Failure::new(exit::RUNTIME, e),
    }
}

pub fn serve(listen: &str, heartbeat: f64, queue_bound: usize) -> CmdResult {
    if !(heartbeat > 0.0) || queue_bound == 0 {
        return Err(Failure::config(
            "heartbeat and queue bound must be positive",
        ));
    }
    let config = ServerConfig {
        heartbeat_interval: heartbeat,
        queue_bound,
        ..Default::default()
    };
    let server = RtiServer::bind(listen, config)
        .map_err(|e| Failure::new(exit::BIND, format!("{listen}: {e}")))?;
    println!("rti listening on {}", server.local_addr());
    while !interrupted() {
        sleep(WAIT_TICK);
    }
    server.shutdown();
    println!("rti stopped");
    Ok(())
}

#[derive(Debug, Args)]
pub struct BridgeArgs {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Ship to pilot; defaults to the scenario's first piloted ship.
    #[arg(long)]
    ship: Option<String>,
    /// Federate id; defaults to `bridge-<ship>`.
    #[arg(long)]
    id: Option<String>,
    /// Router endpoint.
    #[arg(long, env = RTI_ENV, default_value = DEFAULT_RTI_ENDPOINT)]
    rti: String,
    /// Run without joining a federation.
    #[arg(long)]
    standalone: bool,
    /// Local control protocol address.
    #[arg(long, default_value = "127.0.0.1:4517")]
    control: String,
    /// Integration step, s.
    #[arg(long, default_value_t = DEFAULT_DT)]
    dt: f64,
    /// Simulated seconds per wall second.
    #[arg(long, default_value_t = 1.0)]
    time_scale: f64,
    /// ShipState publication rate, Hz of simulated time.
    #[arg(long, default_value_t = 10.0)]
    publish_hz: f64,
    /// Session length, simulated s; defaults to the scenario's.
    #[arg(long)]
    duration: Option<f64>,
    /// Order log for replay.
    #[arg(long)]
    order_log: Option<PathBuf>,
    /// Per-step trajectory CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Start paused until a resume command arrives.
    #[arg(long)]
    paused: bool,
    /// Serve the browser socket on the control port + 1000.
    #[arg(long)]
    with_ui: bool,
}

pub fn bridge(a: BridgeArgs) -> CmdResult {
    let s = scenario(&a.scenario)?;
    let ship = match &a.ship {
        Some(id) => id.clone(),
        None => s
            .ships
            .iter()
            .find(|sh| sh.role == Role::Piloted)
            .or(s.ships.first())
            .map(|sh| sh.id.clone())
            .ok_or_else(|| Failure::config("scenario has no ships"))?,
    };
    if !(a.time_scale > 0.0 && a.publish_hz > 0.0) {
        return Err(Failure::config(
            "time scale and publish rate must be positive",
        ));
    }
    let sim = BridgeSim::new(&s, &ship, a.dt).map_err(Failure::config)?;
    let opts = BridgeOptions {
        federate_id: a.id.clone().unwrap_or_else(|| format!("bridge-{ship}")),
        rti: (!a.standalone).then(|| a.rti.clone()),
        control_addr: a.control.clone(),
        time_scale: a.time_scale,
        publish_hz: a.publish_hz,
        duration: a.duration.or(s.duration),
        order_log: a.order_log.clone(),
        trajectory: a.trajectory.clone(),
        start_paused: a.paused,
        with_ui: a.with_ui,
    };
    let id = opts.federate_id.clone();
    let h = start_bridge(&s, sim, opts).map_err(run_failure)?;
    let mode = if h.is_standalone() {
        "standalone"
    } else {
        "federated"
    };
    println!(
        "bridge {id} ship {ship} control {} {mode}",
        h.control_addr()
    );
    if let Some(ui) = h.ui_addr() {
        println!("ui ws://{ui}/ws");
    }
    while !interrupted() && !h.is_finished() {
        sleep(WAIT_TICK);
    }
    let report = h.stop().map_err(run_failure)?;
    if report.federation_lost {
        log::warn!("the federation was lost during the session");
    }
    println!(
        "bridge stopped steps {} sim_time {:.2} published {}",
        report.steps, report.sim_time, report.published
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct TowerArgs {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Federate id.
    #[arg(long, default_value = "tower")]
    id: String,
    /// Router endpoint.
    #[arg(long, env = RTI_ENV, default_value = DEFAULT_RTI_ENDPOINT)]
    rti: String,
    /// Local query protocol address.
    #[arg(long, default_value = "127.0.0.1:4518")]
    query: String,
    /// Append-only event log.
    #[arg(long)]
    event_log: Option<PathBuf>,
    /// Track points kept per ship.
    #[arg(long, default_value_t = DEFAULT_HISTORY)]
    history: usize,
    /// Serve the browser socket on the query port + 1000.
    #[arg(long)]
    with_ui: bool,
}

pub fn tower(a: TowerArgs) -> CmdResult {
    let s = scenario(&a.scenario)?;
    let opts = TowerOptions {
        federate_id: a.id.clone(),
        rti: a.rti.clone(),
        query_addr: a.query.clone(),
        event_log: a.event_log.clone(),
        history_len: a.history,
        with_ui: a.with_ui,
    };
    let h = start_tower(&s, opts).map_err(run_failure)?;
    println!("tower {} query {}", a.id, h.query_addr());
    if let Some(ui) = h.ui_addr() {
        println!("ui ws://{ui}/ws");
    }
    while !interrupted() {
        sleep(WAIT_TICK);
    }
    let report = h.stop();
    let m = &report.metrics;
    println!(
        "tower stopped events {} collisions {} groundings {} wrong_manoeuvres {}",
        report.events,
        m.collisions,
        m.groundings,
        m.wrong_manoeuvres()
    );
    Ok(())
}

pub fn replay(log: &Path, scenario_path: &Path, out: Option<&Path>) -> CmdResult {
    let s = scenario(scenario_path)?;
    let order_log = read_order_log(log).map_err(|e| match e {
        ReplayError::Io(..) => Failure::new(exit::RUNTIME, e),
        _ => Failure::new(exit::FAILED, e),
    })?;
    if order_log.truncated || order_log.end.is_none() {
        log::warn!(
            "order log is truncated; replaying up to step {}",
            order_log.replay_steps()
        );
    }
    let mut csv = Vec::new();
    let report = harbour_fed::bridge::replay(&s, &order_log, &mut csv).map_err(|e| match e {
        ReplayError::Io(..) => Failure::new(exit::RUNTIME, e),
        _ => Failure::new(exit::FAILED, e),
    })?;
    let text = String::from_utf8(csv).map_err(|e| Failure::new(exit::RUNTIME, e))?;
    match out {
        Some(p) => {
            let io = |e: io::Error| Failure::new(exit::RUNTIME, format!("{}: {e}", p.display()));
            let mut w = BufWriter::new(File::create(p).map_err(io)?);
            w.write_all(text.as_bytes()).map_err(io)?;
            w.flush().map_err(io)?;
            println!(
                "replayed steps {} sha256 {}",
                report.steps,
                source_hash(&text)
            );
        }
        None => {
            io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| Failure::new(exit::RUNTIME, e))?;
        }
    }
    Ok(())
}
