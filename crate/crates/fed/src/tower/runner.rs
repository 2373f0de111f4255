//! Tower session: one thread owns the tower state and serves queries; the
//! federation and the query server feed it through channels.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, never, select, unbounded, Receiver, Sender};
use harbour_core::port::{Scenario, SessionMetrics};
use serde_json::{json, Value};

use super::core::{EventLogWriter, TowerCore, TowerError};
use super::picture::DEFAULT_HISTORY;
use crate::bridge::{
    EnvironmentUpdate, RunError, CONNING_CLASS, ENVIRONMENT_CLASS, SHIP_STATE_CLASS,
};
use crate::local::{Handler, LocalServer};
use crate::rti::{from_payload, to_payload, ClientError, FedMessage, MsgType, Payload, RtiClient};

/// Default local query port.
pub const DEFAULT_QUERY_PORT: u16 = 4518;

const RECONNECT_PERIOD: Duration = Duration::from_secs(1);

#[derive(Debug, Clone)]
pub struct TowerOptions {
    pub federate_id: String,
    pub rti: String,
    pub query_addr: String,
    pub event_log: Option<PathBuf>,
    pub history_len: usize,
    pub with_ui: bool,
}

impl Default for TowerOptions {
    fn default() -> Self {
        TowerOptions {
            federate_id: "tower".into(),
            rti: crate::rti::DEFAULT_RTI_ENDPOINT.into(),
            query_addr: format!("127.0.0.1:{DEFAULT_QUERY_PORT}"),
            event_log: None,
            history_len: DEFAULT_HISTORY,
            with_ui: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TowerReport {
    pub events: usize,
    pub metrics: SessionMetrics,
}

enum Command {
    Query(FedMessage, Sender<FedMessage>),
    Stop,
}

pub struct TowerHandle {
    commands: Sender<Command>,
    thread: Option<JoinHandle<TowerReport>>,
    query: LocalServer,
    #[cfg(feature = "ui")]
    gateway: Option<crate::gateway::Gateway>,
}

impl TowerHandle {
    pub fn query_addr(&self) -> SocketAddr {
        self.query.local_addr()
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

    /// Runs one query against the tower state directly.
    pub fn query(&self, msg_type: MsgType, payload: Value) -> Option<FedMessage> {
        let mut req = FedMessage::new(msg_type, "local", 0.0, 1);
        if let Value::Object(m) = payload {
            req.payload = m;
        }
        let (tx, rx) = bounded(1);
        self.commands.send(Command::Query(req, tx)).ok()?;
        rx.recv_timeout(Duration::from_secs(5)).ok()
    }

    pub fn stop(mut self) -> TowerReport {
        let _ = self.commands.send(Command::Stop);
        self.thread
            .take()
            .expect("running")
            .join()
            .expect("tower thread panicked")
    }
}

impl Drop for TowerHandle {
    fn drop(&mut self) {
        if let Some(t) = self.thread.take() {
            let _ = self.commands.send(Command::Stop);
            let _ = t.join();
        }
    }
}

fn join(endpoint: &str, id: &str) -> Result<RtiClient, ClientError> {
    let c = RtiClient::connect(endpoint, id)?;
    c.subscribe(SHIP_STATE_CLASS)?;
    c.subscribe(CONNING_CLASS)?;
    Ok(c)
}

/// Binds the query port, joins the federation (retrying in the background
/// while it is unreachable) and starts the tower thread.
pub fn start_tower(scenario: &Scenario, opts: TowerOptions) -> Result<TowerHandle, RunError> {
    if opts.with_ui && !cfg!(feature = "ui") {
        return Err(RunError::NoUi);
    }
    let mut core = TowerCore::new(scenario, opts.history_len);
    if let Some(p) = &opts.event_log {
        let log =
            EventLogWriter::create(p).map_err(|e| RunError::Io(p.display().to_string(), e))?;
        core = core.with_log(log);
    }
    let (tx, rx) = unbounded();
    let handler: Handler = {
        let tx = tx.clone();
        Arc::new(move |req: FedMessage| {
            let (rtx, rrx) = bounded(1);
            let seq = req.seq;
            if tx.send(Command::Query(req, rtx)).is_err() {
                return FedMessage::error(
                    "tower",
                    seq,
                    "tower_stopped",
                    "the tower session has ended",
                );
            }
            rrx.recv().unwrap_or_else(|_| {
                FedMessage::error("tower", seq, "tower_stopped", "the tower session has ended")
            })
        })
    };
    let query = LocalServer::bind(&opts.query_addr, "tower-query", handler.clone())
        .map_err(|e| RunError::Bind(opts.query_addr.clone(), e))?;
    #[cfg(feature = "ui")]
    let gateway = if opts.with_ui {
        let mut addr = query.local_addr();
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

    let client = match join(&opts.rti, &opts.federate_id) {
        Ok(c) => Some(c),
        Err(ClientError::Rejected { code, message }) => {
            return Err(RunError::JoinRejected(format!("{code}: {message}")))
        }
        Err(e) => {
            log::warn!("federation unavailable ({e}); retrying");
            None
        }
    };
    let session = TowerSession {
        core,
        opts,
        client,
        clock: Instant::now(),
        last_attempt: Instant::now(),
        seq: 0,
    };
    let thread = thread::Builder::new()
        .name("tower".into())
        .spawn(move || session.run(rx))
        .map_err(|e| RunError::Io("thread".into(), e))?;
    Ok(TowerHandle {
        commands: tx,
        thread: Some(thread),
        query,
        #[cfg(feature = "ui")]
        gateway,
    })
}

struct TowerSession {
    core: TowerCore,
    opts: TowerOptions,
    client: Option<RtiClient>,
    clock: Instant,
    last_attempt: Instant,
    seq: u64,
}

impl TowerSession {
    fn now(&self) -> f64 {
        self.clock.elapsed().as_secs_f64()
    }

    fn run(mut self, rx: Receiver<Command>) -> TowerReport {
        if let Some(c) = &self.client {
            let objects = c.snapshot().to_vec();
            let now = self.now();
            self.core.join_snapshot(&objects, now);
            self.core.evaluate();
        }
        loop {
            if self.client.is_none() && self.last_attempt.elapsed() >= RECONNECT_PERIOD {
                self.last_attempt = Instant::now();
                match join(&self.opts.rti, &self.opts.federate_id) {
                    Ok(c) => {
                        log::info!("joined federation at {}", self.opts.rti);
                        let objects = c.snapshot().to_vec();
                        let now = self.now();
                        self.core.join_snapshot(&objects, now);
                        self.client = Some(c);
                    }
                    Err(e) => log::debug!("federation still unavailable: {e}"),
                }
            }
            let fed_rx = self
                .client
                .as_ref()
                .map(|c| c.receiver().clone())
                .unwrap_or_else(never);
            select! {
                recv(rx) -> cmd => match cmd {
                    Ok(Command::Query(req, reply)) => {
                        let r = self.query(req);
                        let _ = reply.send(r);
                    }
                    Ok(Command::Stop) | Err(_) => break,
                },
                recv(fed_rx) -> msg => match msg {
                    Ok(m) => {
                        let now = self.now();
                        self.core.federation_message(&m, now);
                        while let Ok(m) = fed_rx.try_recv() {
                            self.core.federation_message(&m, now);
                        }
                        self.core.evaluate();
                    }
                    Err(_) => {
                        log::warn!("federation lost; retrying");
                        self.client = None;
                        self.last_attempt = Instant::now();
                    }
                },
                default(Duration::from_millis(100)) => {}
            }
        }
        if let Some(c) = self.client.take() {
            let _ = c.resign();
        }
        TowerReport {
            events: self.core.events.len(),
            metrics: self.core.metrics.clone(),
        }
    }

    fn query(&mut self, req: FedMessage) -> FedMessage {
        self.seq += 1;
        let id = self.opts.federate_id.clone();
        let now = self.now();
        let t = self.core.picture.sim_time();
        let reply = |msg_type: MsgType, payload: Value| {
            let mut m = FedMessage::new(msg_type, &id, t, self.seq);
            if let Value::Object(p) = payload {
                m.payload = p;
            }
            m
        };
        match req.msg_type {
            MsgType::PictureRequest => reply(
                MsgType::Picture,
                json!({"sim_time": t, "ships": self.core.picture.views(now)}),
            ),
            MsgType::EventsRequest => {
                let since = req
                    .payload
                    .get("since")
                    .and_then(Value::as_u64)
                    .unwrap_or(0) as usize;
                let events = &self.core.events[since.min(self.core.events.len())..];
                reply(
                    MsgType::Events,
                    json!({"total": self.core.events.len(), "events": events}),
                )
            }
            MsgType::MetricsRequest => {
                let m = &self.core.metrics;
                let mut p = to_payload(m);
                p.insert("wrong_manoeuvres".into(), m.wrong_manoeuvres().into());
                reply(MsgType::Metrics, Value::Object(p))
            }
            MsgType::TeleportRequest => {
                let ship = req.str_field("ship").unwrap_or("");
                match self.core.teleport(ship, now) {
                    Ok(view) => reply(
                        MsgType::Teleport,
                        serde_json::to_value(view).expect("serializable"),
                    ),
                    Err(e @ TowerError::ShipUnknown(_)) => {
                        FedMessage::error(&id, self.seq, "ship_unknown", e.to_string())
                    }
                }
            }
            MsgType::InstructorSetEnvironment => {
                let env: Payload = req
                    .payload
                    .get("environment")
                    .and_then(Value::as_object)
                    .cloned()
                    .unwrap_or_default();
                if let Err(e) = from_payload::<EnvironmentUpdate>(&env) {
                    return FedMessage::error(&id, self.seq, "bad_environment", e.to_string());
                }
                let Some(c) = &self.client else {
                    return FedMessage::error(
                        &id,
                        self.seq,
                        "federation_unavailable",
                        "not joined to a federation",
                    );
                };
                match c.interaction(ENVIRONMENT_CLASS, None, env, t) {
                    Ok(_) => reply(MsgType::Ack, json!({"forwarded": true})),
                    Err(e) => {
                        FedMessage::error(&id, self.seq, "federation_unavailable", e.to_string())
                    }
                }
            }
            other => FedMessage::error(
                &id,
                self.seq,
                "unsupported",
                format!("{other:?} is not a tower request"),
            ),
        }
    }
}
