mod autopilot;
mod report;
mod session;
mod trial;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Parser, Subcommand, ValueEnum};
use harbour_fed::rti::{DEFAULT_RTI_ENDPOINT, RTI_ENV};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const RUNTIME: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const FAILED: u8 = 3;
    pub const BIND: u8 = 4;
    pub const REJECTED: u8 = 5;
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl fmt::Display) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }

    pub fn config(message: impl fmt::Display) -> Self {
        Failure::new(exit::CONFIG, message)
    }
}

pub type CmdResult = Result<(), Failure>;

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

pub fn interrupted() -> bool {
    INTERRUPTED.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Parser)]
#[command(
    name = "harboursim",
    version,
    about = "Harbour ship-handling simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run standard maneuvering trials.
    Trial(trial::TrialArgs),
    /// Run the federation router.
    Serve {
        /// Listen address.
        #[arg(long, env = RTI_ENV, default_value = DEFAULT_RTI_ENDPOINT)]
        listen: String,
        /// Heartbeat interval handed to joining federates, s.
        #[arg(long, default_value_t = 1.0)]
        heartbeat: f64,
        /// Per-connection outbound queue bound, messages.
        #[arg(long, default_value_t = 256)]
        queue_bound: usize,
    },
    /// Run a ship bridge federate.
    Bridge(session::BridgeArgs),
    /// Run the control tower federate.
    Tower(session::TowerArgs),
    /// Rebuild a session trajectory from its order log.
    Replay {
        /// Order log written by a bridge session.
        #[arg(long)]
        log: PathBuf,
        /// Scenario the session ran.
        #[arg(long)]
        scenario: PathBuf,
        /// Trajectory CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drive a bridge from a timed order script.
    Autopilot(autopilot::AutopilotArgs),
    /// Session metrics from a tower event log.
    Metrics {
        #[arg(long)]
        event_log: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = ctrlc::set_handler(|| INTERRUPTED.store(true, Ordering::SeqCst)) {
        log::warn!("cannot install the interrupt handler: {e}");
    }
    let r = match cli.command {
        Command::Trial(a) => trial::run(a),
        Command::Serve {
            listen,
            heartbeat,
            queue_bound,
        } => session::serve(&listen, heartbeat, queue_bound),
        Command::Bridge(a) => session::bridge(a),
        Command::Tower(a) => session::tower(a),
        Command::Replay { log, scenario, out } => session::replay(&log, &scenario, out.as_deref()),
        Command::Autopilot(a) => autopilot::run(a),
        Command::Metrics { event_log, format } => report::metrics(&event_log, format),
    };
    match r {
        Ok(()) => ExitCode::from(exit::OK),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
