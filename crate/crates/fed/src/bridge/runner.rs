//! Real-time bridge session: one simulation thread paced to the wall clock,
//! fed by the local control server and the federation through a channel.

use std::fs::File;
use std::io::{self, BufWriter};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, unbounded, Receiver, RecvTimeoutError, Sender};
use harbour_core::port::Scenario;
use serde_json::{json, Value};
use thiserror::Error;

use super::log::{LogEntry, LogHeader, OrderLogWriter, TrajectoryWriter};
use super::sim::{
    BridgeError, BridgeSim, ConningSnapshot, EnvironmentUpdate, HelmOrder, Setpoints,
    SHIP_STATE_SCHEMA,
};
use crate::local::{Handler, LocalServer};
use crate::rti::{from_payload, ClientError, FedMessage, MsgType, Payload, RtiClient};

/// Default local control port.
pub const DEFAULT_CONTROL_PORT: u16 = 4517;

/// Most steps run back to back before the remaining lag is written off.
pub const MAX_CATCH_UP: u64 = 10;

/// Object class carrying the conning snapshot for the tower.
pub const CONNING_CLASS: &str = "ConningSnapshot";
pub const SHIP_STATE_CLASS: &str = "ShipState";
/// Interaction class for instructor environment changes.
pub const ENVIRONMENT_CLASS: &str = "EnvironmentControl";

const CONNING_SUFFIX: &str = ".conning";

pub fn conning_object(ship: &str) -> String {
    format!("{ship}{CONNING_SUFFIX}")
}

/// Ship id of a conning object name.
pub fn conning_ship(object: &str) -> Option<&str> {
    object.strip_suffix(CONNING_SUFFIX)
}

#[derive(Debug, Clone)]
pub struct BridgeOptions {
    pub federate_id: String,
    /// Federation endpoint; None runs standalone.
    pub rti: Option<String>,
    pub control_addr: String,
    /// Simulated seconds per wall-clock second.
    pub time_scale: f64,
    pub publish_hz: f64,
    /// Stop after this much simulated time.
    pub duration: Option<f64>,
    pub order_log: Option<PathBuf>,
    pub trajectory: Option<PathBuf>,
    pub start_paused: bool,
    /// Serve the browser gateway on the control port + 1000.
    pub with_ui: bool,
}

impl Default for BridgeOptions {
    fn default() -> Self {
        BridgeOptions {
            federate_id: "bridge".into(),
            rti: None,
            control_addr: format!("127.0.0.1:{DEFAULT_CONTROL_PORT}"),
            time_scale: 1.0,
            publish_hz: 10.0,
            duration: None,
            order_log: None,
            trajectory: None,
            start_paused: false,
            with_ui: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot bind {0}: {1}")]
    Bind(String, io::Error),
    #[error("join rejected: {0}")]
    JoinRejected(String),
    #[error("{0}: {1}")]
    Io(String, io::Error),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error("browser gateway not built; rebuild with the ui feature")]
    NoUi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeReport {
    pub steps: u64,
    pub sim_time: f64,
    /// Never joined a federation.
    pub standalone: bool,
    /// Joined, then lost the federation and carried on alone.
    pub federation_lost: bool,
    /// Times the pacing lag exceeded the catch-up budget and was dropped.
    pub debt_drops: u64,
    pub published: u64,
}

enum Command {
    Order(HelmOrder, Sender<Result<(Setpoints, f64), String>>),
    Snapshot(Sender<ConningSnapshot>),
    Pause(Sender<f64>),
    Resume(Sender<f64>),
    Environment(EnvironmentUpdate, Sender<Result<f64, String>>),
    Stop,
}

pub struct BridgeHandle {
    commands: Sender<Command>,
    thread: Option<JoinHandle<Result<BridgeReport, RunError>>>,
    control: LocalServer,
    #[cfg(feature = "ui")]
    gateway: Option<crate::gateway::Gateway>,
    standalone: bool,
}

impl BridgeHandle {
    pub fn control_addr(&self) -> SocketAddr {
        self.control.local_addr()
    }

    pub fn ui_addr(&self) -> Option<SocketAddr> {
        #[cfg(feature = "ui")]
        {
            self.gateway.as_ref().map(|g| g.local_addr())
        }
        #[cfg(not(feature = "ui"))]
        {
            None
        }
    }

    pub fn is_standalone(&self) -> bool {
        self.standalone
    }

    pub fn snapshot(&self) -> Option<ConningSnapshot> {
        let (tx, rx) = bounded(1);
        self.commands.send(Command::Snapshot(tx)).ok()?;
        rx.recv_timeout(Duration::from_secs(5)).ok()
    }

    pub fn is_finished(&self) -> bool {
        self.thread.as_ref().map_or(true, |t| t.is_finished())
    }

    /// Waits for a duration-limited session to end.
    pub fn wait(mut self) -> Result<BridgeReport, RunError> {
        self.thread
            .take()
            .expect("running")
            .join()
            .expect("bridge thread panicked")
    }

    pub fn stop(self) -> Result<BridgeReport, RunError> {
        let _ = self.commands.send(Command::Stop);
        self.wait()
    }
}

impl Drop for BridgeHandle {
    fn drop(&mut self) {
        if let Some(t) = self.thread.take() {
            let _ = self.commands.send(Command::Stop);
            let _ = t.join();
        }
    }
}

/// Binds the control port, joins the federation if one is given and
/// reachable, and starts the simulation thread.
pub fn start_bridge(
    scenario: &Scenario,
    sim: BridgeSim,
    opts: BridgeOptions,
) -> Result<BridgeHandle, RunError> {
    if opts.with_ui && !cfg!(feature = "ui") {
        return Err(RunError::NoUi);
    }
    let (tx, rx) = unbounded();
    let handler = control_handler(tx.clone(), opts.federate_id.clone());
    let control = LocalServer::bind(&opts.control_addr, "bridge-control", handler.clone())
        .map_err(|e| RunError::Bind(opts.control_addr.clone(), e))?;
    #[cfg(feature = "ui")]
    let gateway = if opts.with_ui {
        let mut addr = control.local_addr();
        addr.set_port(addr.port() + 1000);
        Some(
            crate::gateway::Gateway::bind(addr, handler)
                .map_err(|e| RunError::Bind(addr.to_string(), e))?,
        )
    } else {
        None
    };
    #[cfg(not(feature = "ui"))]
    let _ = handler;

    let client = match &opts.rti {
        Some(endpoint) => match RtiClient::connect(endpoint, &opts.federate_id) {
            Ok(c) => Some(c),
            Err(ClientError::Rejected { code, message }) => {
                return Err(RunError::JoinRejected(format!("{code}: {message}")))
            }
            Err(e) => {
                log::warn!("federation unavailable ({e}); running standalone");
                None
            }
        },
        None => None,
    };
    let standalone = client.is_none();
    if let Some(c) = &client {
        let ship = &sim.ship().id;
        let fed = (|| -> Result<(), ClientError> {
            c.publish(SHIP_STATE_CLASS, ship, SHIP_STATE_SCHEMA)?;
            c.publish(CONNING_CLASS, &conning_object(ship), &[])?;
            c.subscribe(ENVIRONMENT_CLASS)?;
            Ok(())
        })();
        if let Err(e) = fed {
            log::warn!("federation setup failed: {e}");
        }
    }

    let log = match &opts.order_log {
        Some(p) => Some(
            OrderLogWriter::create(p, &LogHeader::for_sim(scenario, &sim))
                .map_err(|e| RunError::Io(p.display().to_string(), e))?,
        ),
        None => None,
    };
    let traj = match &opts.trajectory {
        Some(p) => {
            let f = File::create(p).map_err(|e| RunError::Io(p.display().to_string(), e))?;
            Some(
                TrajectoryWriter::new(BufWriter::new(f))
                    .map_err(|e| RunError::Io(p.display().to_string(), e))?,
            )
        }
        None => None,
    };
    let session = Session {
        sim,
        opts,
        rx,
        client,
        log,
        traj,
        report: BridgeReport {
            steps: 0,
            sim_time: 0.0,
            standalone,
            federation_lost: false,
            debt_drops: 0,
            published: 0,
        },
    };
    let thread = thread::Builder::new()
        .name("bridge-sim".into())
        .spawn(move || session.run())
        .map_err(|e| RunError::Io("thread".into(), e))?;
    Ok(BridgeHandle {
        commands: tx,
        thread: Some(thread),
        control,
        #[cfg(feature = "ui")]
        gateway,
        standalone,
    })
}

struct Session {
    sim: BridgeSim,
    opts: BridgeOptions,
    rx: Receiver<Command>,
    client: Option<RtiClient>,
    log: Option<OrderLogWriter>,
    traj: Option<TrajectoryWriter<BufWriter<File>>>,
    report: BridgeReport,
}

enum Flow {
    Continue,
    Stop,
}

impl Session {
    fn run(mut self) -> Result<BridgeReport, RunError> {
        let dt = self.sim.dt();
        let scale = self.opts.time_scale.max(1e-6);
        let publish_every = ((1.0 / (self.opts.publish_hz * dt)).round() as u64).max(1);
        let mut paused = self.opts.start_paused;
        let mut origin = Instant::now();
        let mut origin_step = self.sim.steps();
        self.write_traj()?;
        self.publish();
        'outer: loop {
            while let Ok(cmd) = self.rx.try_recv() {
                match self.command(cmd, &mut paused, &mut origin, &mut origin_step)? {
                    Flow::Continue => {}
                    Flow::Stop => break 'outer,
                }
            }
            self.poll_federation()?;
            if self.finished() {
                break;
            }
            if paused {
                match self.rx.recv_timeout(Duration::from_millis(50)) {
                    Ok(cmd) => {
                        if let Flow::Stop =
                            self.command(cmd, &mut paused, &mut origin, &mut origin_step)?
                        {
                            break;
                        }
                    }
                    Err(RecvTimeoutError::Timeout) => {}
                    Err(RecvTimeoutError::Disconnected) => break,
                }
                continue;
            }
            let elapsed = origin.elapsed().as_secs_f64();
            let due = origin_step + (elapsed * scale / dt) as u64;
            let behind = due.saturating_sub(self.sim.steps());
            if behind > 0 {
                for _ in 0..behind.min(MAX_CATCH_UP) {
                    self.sim.step()?;
                    self.write_traj()?;
                    if self.sim.steps() % publish_every == 0 {
                        self.publish();
                    }
                    if self.finished() {
                        break 'outer;
                    }
                }
                if behind > MAX_CATCH_UP {
                    self.report.debt_drops += 1;
                    log::warn!(
                        "bridge fell {} steps behind; dropping the pacing debt",
                        behind - MAX_CATCH_UP
                    );
                    origin = Instant::now();
                    origin_step = self.sim.steps();
                }
                continue;
            }
            let next_at = (self.sim.steps() + 1 - origin_step) as f64 * dt / scale;
            let wait = Duration::from_secs_f64((next_at - origin.elapsed().as_secs_f64()).max(0.0));
            match self.rx.recv_timeout(wait) {
                Ok(cmd) => {
                    if let Flow::Stop =
                        self.command(cmd, &mut paused, &mut origin, &mut origin_step)?
                    {
                        break;
                    }
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => break,
            }
        }
        self.shutdown()
    }

    fn finished(&self) -> bool {
        self.opts
            .duration
            .is_some_and(|d| self.sim.sim_time() >= d - 0.5 * self.sim.dt())
    }

    fn command(
        &mut self,
        cmd: Command,
        paused: &mut bool,
        origin: &mut Instant,
        origin_step: &mut u64,
    ) -> Result<Flow, RunError> {
        match cmd {
            Command::Order(order, reply) => {
                let r = match self.sim.apply_order(&order) {
                    Ok(sp) => {
                        self.log_entry(LogEntry::Order {
                            step: self.sim.steps(),
                            order,
                        })?;
                        Ok((sp, self.sim.sim_time()))
                    }
                    Err(e) => Err(e.to_string()),
                };
                let _ = reply.send(r);
            }
            Command::Snapshot(reply) => {
                let _ = reply.send(self.sim.snapshot());
            }
            Command::Pause(reply) => {
                if !*paused {
                    *paused = true;
                    // the federation sees the state the session froze at
                    self.publish();
                }
                let _ = reply.send(self.sim.sim_time());
            }
            Command::Resume(reply) => {
                if *paused {
                    *paused = false;
                    *origin = Instant::now();
                    *origin_step = self.sim.steps();
                }
                let _ = reply.send(self.sim.sim_time());
            }
            Command::Environment(update, reply) => {
                let r = self.environment(update);
                let _ = reply.send(r.map(|_| self.sim.sim_time()));
            }
            Command::Stop => return Ok(Flow::Stop),
        }
        Ok(Flow::Continue)
    }

    fn environment(&mut self, update: EnvironmentUpdate) -> Result<(), String> {
        self.sim
            .set_environment(&update)
            .map_err(|e| e.to_string())?;
        self.log_entry(LogEntry::Environment {
            step: self.sim.steps(),
            environment: update,
        })
        .map_err(|e| e.to_string())
    }

    fn log_entry(&mut self, entry: LogEntry) -> Result<(), RunError> {
        if let Some(l) = &mut self.log {
            l.write(&entry)
                .map_err(|e| RunError::Io("order log".into(), e))?;
        }
        Ok(())
    }

    fn write_traj(&mut self) -> Result<(), RunError> {
        if let Some(t) = &mut self.traj {
            t.row(&self.sim)
                .map_err(|e| RunError::Io("trajectory".into(), e))?;
        }
        Ok(())
    }

    fn lose_federation(&mut self, why: &str) {
        if self.client.take().is_some() {
            log::warn!("federation lost ({why}); continuing standalone");
            self.report.federation_lost = true;
        }
    }

    fn publish(&mut self) {
        let Some(c) = &self.client else { return };
        let snap = self.sim.snapshot();
        let p = &self.sim.ship().config.particulars;
        let attrs = snap.ship_state(p.length_pp, p.breadth, p.draft);
        let t = snap.sim_time;
        let ship = snap.ship.clone();
        let r = c
            .update(&ship, t, attrs)
            .and_then(|_| c.update(&conning_object(&ship), t, snap.payload()));
        match r {
            Ok(_) => self.report.published += 1,
            Err(e) => self.lose_federation(&e.to_string()),
        }
    }

    fn poll_federation(&mut self) -> Result<(), RunError> {
        loop {
            let msg = match &self.client {
                Some(c) => c.try_recv(),
                None => return Ok(()),
            };
            match msg {
                Ok(Some(m)) => self.federation_message(m),
                Ok(None) => return Ok(()),
                Err(e) => {
                    self.lose_federation(&e.to_string());
                    return Ok(());
                }
            }
        }
    }

    fn federation_message(&mut self, m: FedMessage) {
        match m.msg_type {
            MsgType::Interaction if m.str_field("class") == Some(ENVIRONMENT_CLASS) => {
                let params = m
                    .payload
                    .get("params")
                    .and_then(Value::as_object)
                    .cloned()
                    .unwrap_or_default();
                match from_payload::<EnvironmentUpdate>(&params) {
                    Ok(update) => {
                        if let Err(e) = self.environment(update) {
                            log::warn!("environment change from {} rejected: {e}", m.federate_id);
                        }
                    }
                    Err(e) => log::warn!("bad environment change from {}: {e}", m.federate_id),
                }
            }
            MsgType::Error => log::warn!("federation error: {:?}", m.payload),
            _ => {}
        }
    }

    fn shutdown(mut self) -> Result<BridgeReport, RunError> {
        self.log_entry(LogEntry::End {
            steps: self.sim.steps(),
        })?;
        if let Some(t) = self.traj.take() {
            t.finish()
                .map_err(|e| RunError::Io("trajectory".into(), e))?;
        }
        if let Some(c) = self.client.take() {
            let _ = c.resign();
        }
        self.report.steps = self.sim.steps();
        self.report.sim_time = self.sim.sim_time();
        Ok(self.report)
    }
}

fn control_handler(tx: Sender<Command>, id: String) -> Handler {
    let seq = Arc::new(std::sync::atomic::AtomicU64::new(0));
    Arc::new(move |req: FedMessage| {
        let n = seq.fetch_add(1, std::sync::atomic::Ordering::SeqCst) + 1;
        let reply = |t: MsgType, time: f64, payload: Payload| {
            let mut m = FedMessage::new(t, &id, time, n);
            m.payload = payload;
            m
        };
        let error = |code: &str, text: String| FedMessage::error(&id, n, code, text);
        let gone = || error("bridge_stopped", "the bridge session has ended".into());
        match req.msg_type {
            MsgType::HelmOrder => {
                let order: HelmOrder = match from_payload(&req.payload) {
                    Ok(o) => o,
                    Err(e) => return error("bad_order", e.to_string()),
                };
                let (rtx, rrx) = bounded(1);
                if tx.send(Command::Order(order, rtx)).is_err() {
                    return gone();
                }
                match rrx.recv() {
                    Ok(Ok((sp, t))) => reply(MsgType::OrderAck, t, crate::rti::to_payload(&sp)),
                    Ok(Err(e)) => error("order_rejected", e),
                    Err(_) => gone(),
                }
            }
            MsgType::SnapshotRequest => {
                let (rtx, rrx) = bounded(1);
                if tx.send(Command::Snapshot(rtx)).is_err() {
                    return gone();
                }
                match rrx.recv() {
                    Ok(s) => reply(MsgType::Snapshot, s.sim_time, s.payload()),
                    Err(_) => gone(),
                }
            }
            MsgType::SessionControl => {
                let action = req.str_field("action").unwrap_or("").to_string();
                let ack = |t: f64| {
                    let p = json!({"action": action});
                    reply(MsgType::Ack, t, p.as_object().unwrap().clone())
                };
                match action.as_str() {
                    "pause" | "resume" => {
                        let (rtx, rrx) = bounded(1);
                        let cmd = if action == "pause" {
                            Command::Pause(rtx)
                        } else {
                            Command::Resume(rtx)
                        };
                        if tx.send(cmd).is_err() {
                            return gone();
                        }
                        rrx.recv().map(ack).unwrap_or_else(|_| gone())
                    }
                    "set_environment" => {
                        let env = req
                            .payload
                            .get("environment")
                            .and_then(Value::as_object)
                            .cloned()
                            .unwrap_or_default();
                        let update: EnvironmentUpdate = match from_payload(&env) {
                            Ok(u) => u,
                            Err(e) => return error("bad_environment", e.to_string()),
                        };
                        let (rtx, rrx) = bounded(1);
                        if tx.send(Command::Environment(update, rtx)).is_err() {
                            return gone();
                        }
                        match rrx.recv() {
                            Ok(Ok(t)) => ack(t),
                            Ok(Err(e)) => error("bad_environment", e),
                            Err(_) => gone(),
                        }
                    }
                    "stop" => {
                        let _ = tx.send(Command::Stop);
                        ack(0.0)
                    }
                    other => error("bad_action", format!("unknown session action {other:?}")),
                }
            }
            other => error("unsupported", format!("{other:?} is not a bridge request")),
        }
    })
}
