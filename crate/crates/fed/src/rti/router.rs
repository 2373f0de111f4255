//! Routing state of the federation server, free of any I/O.
//!
//! The server feeds every decoded frame and every connection event into
//! [`Router`] and performs the returned [`Outbound`] actions in order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde_json::{json, Value};

use super::message::{FedMessage, MsgType, Payload, PROTOCOL_VERSION};

pub type ConnId = u64;

/// Identity used on messages the router originates.
pub const ROUTER_ID: &str = "rti";

/// Heartbeat intervals of silence after which a federate is resigned.
pub const SILENCE_INTERVALS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Outbound {
    Send(ConnId, FedMessage),
    /// Close once everything queued before it has been written.
    Close(ConnId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectRecord {
    pub class: String,
    pub owner: Option<String>,
    /// Attribute name to semantic type, fixed at the first PUBLISH.
    pub schema: Payload,
    pub attributes: Payload,
    pub sim_time: f64,
    pub stale: bool,
}

#[derive(Debug, Clone)]
struct Federate {
    conn: ConnId,
    last_seen: f64,
    last_seq: u64,
    subscriptions: BTreeSet<String>,
}

/// Reason a federate left, reported in the RESIGN broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResignReason {
    Voluntary,
    Timeout,
    Disconnected,
}

impl ResignReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ResignReason::Voluntary => "voluntary",
            ResignReason::Timeout => "timeout",
            ResignReason::Disconnected => "disconnected",
        }
    }
}

#[derive(Debug)]
pub struct Router {
    heartbeat_interval: f64,
    federates: BTreeMap<String, Federate>,
    conns: HashMap<ConnId, String>,
    objects: BTreeMap<String, ObjectRecord>,
    seq: u64,
}

impl Router {
    pub fn new(heartbeat_interval: f64) -> Self {
        Router {
            heartbeat_interval,
            federates: BTreeMap::new(),
            conns: HashMap::new(),
            objects: BTreeMap::new(),
            seq: 0,
        }
    }

    pub fn heartbeat_interval(&self) -> f64 {
        self.heartbeat_interval
    }

    pub fn federates(&self) -> impl Iterator<Item = &str> {
        self.federates.keys().map(String::as_str)
    }

    pub fn object(&self, name: &str) -> Option<&ObjectRecord> {
        self.objects.get(name)
    }

    fn own(&mut self, msg_type: MsgType, now: f64) -> FedMessage {
        self.seq += 1;
        FedMessage::new(msg_type, ROUTER_ID, now.max(0.0), self.seq)
    }

    fn error(
        &mut self,
        conn: ConnId,
        code: &str,
        message: impl Into<String>,
        now: f64,
    ) -> Outbound {
        let msg = self
            .own(MsgType::Error, now)
            .with("code", code)
            .with("message", message.into());
        Outbound::Send(conn, msg)
    }

    /// JOIN_ACK snapshot: every object with its latest attributes, ordered
    /// by object name.
    pub fn snapshot(&self) -> Value {
        Value::Array(
            self.objects
                .iter()
                .map(|(name, o)| {
                    json!({
                        "object": name,
                        "class": o.class,
                        "owner": o.owner,
                        "attributes": o.attributes,
                        "sim_time": o.sim_time,
                        "stale": o.stale,
                    })
                })
                .collect(),
        )
    }

    pub fn handle(&mut self, conn: ConnId, msg: FedMessage, now: f64) -> Vec<Outbound> {
        if msg.msg_type == MsgType::Join {
            return self.join(conn, msg, now);
        }
        let Some(id) = self.conns.get(&conn).cloned() else {
            return vec![self.error(conn, "not_joined", "JOIN first", now)];
        };
        if msg.federate_id != id {
            return vec![self.error(conn, "wrong_id", format!("connection joined as {id}"), now)];
        }
        let fed = self.federates.get_mut(&id).expect("joined federate");
        fed.last_seen = now;
        if msg.seq <= fed.last_seq {
            let last = fed.last_seq;
            return vec![self.error(
                conn,
                "bad_seq",
                format!("seq {} after {last}", msg.seq),
                now,
            )];
        }
        fed.last_seq = msg.seq;
        match msg.msg_type {
            MsgType::Heartbeat => Vec::new(),
            MsgType::Resign => self.resign(&id, ResignReason::Voluntary, now),
            MsgType::Publish => self.publish(conn, &id, &msg, now),
            MsgType::Subscribe => match msg.str_field("class") {
                Some(class) => {
                    let class = class.to_string();
                    self.federates
                        .get_mut(&id)
                        .unwrap()
                        .subscriptions
                        .insert(class);
                    Vec::new()
                }
                None => vec![self.error(conn, "bad_payload", "SUBSCRIBE needs a class", now)],
            },
            MsgType::Update => self.update(conn, &id, msg, now),
            MsgType::Interaction => self.interaction(conn, &id, msg, now),
            other => vec![self.error(
                conn,
                "unsupported",
                format!("{other:?} is not a federation message"),
                now,
            )],
        }
    }

    fn join(&mut self, conn: ConnId, msg: FedMessage, now: f64) -> Vec<Outbound> {
        let version = msg.payload.get("protocol_version").and_then(Value::as_u64);
        if version != Some(PROTOCOL_VERSION) {
            let e = self.error(
                conn,
                "version_mismatch",
                format!("protocol version {version:?}, expected {PROTOCOL_VERSION}"),
                now,
            );
            return vec![e, Outbound::Close(conn)];
        }
        if self.conns.contains_key(&conn) {
            return vec![self.error(conn, "already_joined", "connection already joined", now)];
        }
        let id = msg.federate_id.clone();
        if id.is_empty() || id == ROUTER_ID {
            let e = self.error(
                conn,
                "bad_id",
                format!("federate id {id:?} is reserved"),
                now,
            );
            return vec![e, Outbound::Close(conn)];
        }
        if self.federates.contains_key(&id) {
            let e = self.error(
                conn,
                "duplicate_id",
                format!("federate {id} already joined"),
                now,
            );
            return vec![e, Outbound::Close(conn)];
        }
        self.federates.insert(
            id.clone(),
            Federate {
                conn,
                last_seen: now,
                last_seq: msg.seq,
                subscriptions: BTreeSet::new(),
            },
        );
        self.conns.insert(conn, id);
        let objects = self.snapshot();
        let interval = self.heartbeat_interval;
        let ack = self
            .own(MsgType::JoinAck, now)
            .with("objects", objects)
            .with("heartbeat_interval", interval)
            .with("protocol_version", PROTOCOL_VERSION);
        vec![Outbound::Send(conn, ack)]
    }

    fn publish(&mut self, conn: ConnId, id: &str, msg: &FedMessage, now: f64) -> Vec<Outbound> {
        let (Some(class), Some(object)) = (msg.str_field("class"), msg.str_field("object")) else {
            return vec![self.error(conn, "bad_payload", "PUBLISH needs class and object", now)];
        };
        let schema = match msg.payload.get("attributes") {
            Some(Value::Object(m)) => m.clone(),
            None => Payload::new(),
            Some(_) => {
                return vec![self.error(conn, "bad_payload", "attributes must be a map", now)]
            }
        };
        if let Some(existing) = self.objects.get_mut(object) {
            if let Some(owner) = &existing.owner {
                if owner != id {
                    let text = format!("{object} is owned by {owner}");
                    return vec![self.error(conn, "not_owner", text, now)];
                }
            }
            if existing.class != class || existing.schema != schema {
                let text = format!("{object} was published with a different class or schema");
                return vec![self.error(conn, "schema_mismatch", text, now)];
            }
            existing.owner = Some(id.to_string());
            return Vec::new();
        }
        self.objects.insert(
            object.to_string(),
            ObjectRecord {
                class: class.to_string(),
                owner: Some(id.to_string()),
                schema,
                attributes: Payload::new(),
                sim_time: msg.sim_time,
                stale: false,
            },
        );
        Vec::new()
    }

    fn update(&mut self, conn: ConnId, id: &str, msg: FedMessage, now: f64) -> Vec<Outbound> {
        let Some(object) = msg.str_field("object").map(str::to_string) else {
            return vec![self.error(conn, "bad_payload", "UPDATE needs an object", now)];
        };
        let Some(Value::Object(attrs)) = msg.payload.get("attributes") else {
            return vec![self.error(conn, "bad_payload", "UPDATE needs an attribute map", now)];
        };
        let Some(record) = self.objects.get_mut(&object) else {
            return vec![self.error(
                conn,
                "unknown_object",
                format!("{object} was never published"),
                now,
            )];
        };
        if record.owner.as_deref() != Some(id) {
            return vec![self.error(
                conn,
                "not_owner",
                format!("{id} does not own {object}"),
                now,
            )];
        }
        if !record.schema.is_empty() {
            if let Some(bad) = attrs.keys().find(|k| !record.schema.contains_key(*k)) {
                let text = format!("{bad} is not an attribute of {object}");
                return vec![self.error(conn, "unknown_attribute", text, now)];
            }
        }
        for (k, v) in attrs {
            record.attributes.insert(k.clone(), v.clone());
        }
        record.sim_time = msg.sim_time;
        record.stale = false;
        let class = record.class.clone();
        self.federates
            .iter()
            .filter(|(fid, f)| fid.as_str() != id && f.subscriptions.contains(&class))
            .map(|(_, f)| Outbound::Send(f.conn, msg.clone()))
            .collect()
    }

    fn interaction(&mut self, conn: ConnId, id: &str, msg: FedMessage, now: f64) -> Vec<Outbound> {
        let Some(class) = msg.str_field("class").map(str::to_string) else {
            return vec![self.error(conn, "bad_payload", "INTERACTION needs a class", now)];
        };
        let targets: Vec<String> = match msg.payload.get("to") {
            None | Some(Value::Null) => self
                .federates
                .iter()
                .filter(|(fid, f)| fid.as_str() != id && f.subscriptions.contains(&class))
                .map(|(fid, _)| fid.clone())
                .collect(),
            Some(Value::String(s)) => vec![s.clone()],
            Some(Value::Array(a)) if a.iter().all(Value::is_string) => a
                .iter()
                .filter_map(|v| v.as_str().map(str::to_string))
                .collect(),
            Some(_) => {
                return vec![self.error(
                    conn,
                    "bad_payload",
                    "to must be a name or a list of names",
                    now,
                )]
            }
        };
        let mut out = Vec::with_capacity(targets.len());
        for t in &targets {
            match self.federates.get(t) {
                Some(f) if f.subscriptions.contains(&class) => {
                    out.push(Outbound::Send(f.conn, msg.clone()))
                }
                _ => {
                    let text = format!("{t} is not subscribed to {class}");
                    return vec![self.error(conn, "unsubscribed_target", text, now)];
                }
            }
        }
        out
    }

    fn resign(&mut self, id: &str, reason: ResignReason, now: f64) -> Vec<Outbound> {
        let Some(fed) = self.federates.remove(id) else {
            return Vec::new();
        };
        self.conns.remove(&fed.conn);
        for o in self.objects.values_mut() {
            if o.owner.as_deref() == Some(id) {
                o.owner = None;
                o.stale = true;
            }
        }
        let silent_for = now - fed.last_seen;
        let conns: Vec<ConnId> = self.federates.values().map(|f| f.conn).collect();
        let mut out = Vec::with_capacity(conns.len() + 1);
        for c in conns {
            let msg = self
                .own(MsgType::Resign, now)
                .with("federate", id)
                .with("reason", reason.as_str())
                .with("silent_for", silent_for);
            out.push(Outbound::Send(c, msg));
        }
        out.push(Outbound::Close(fed.conn));
        out
    }

    /// The connection dropped; a joined federate on it is resigned.
    pub fn disconnected(&mut self, conn: ConnId, now: f64) -> Vec<Outbound> {
        match self.conns.get(&conn).cloned() {
            Some(id) => {
                let mut out = self.resign(&id, ResignReason::Disconnected, now);
                out.retain(|o| *o != Outbound::Close(conn));
                out
            }
            None => Vec::new(),
        }
    }

    /// Resigns every federate silent for three heartbeat intervals.
    pub fn poll(&mut self, now: f64) -> Vec<Outbound> {
        let limit = SILENCE_INTERVALS * self.heartbeat_interval;
        let silent: Vec<String> = self
            .federates
            .iter()
            .filter(|(_, f)| now - f.last_seen >= limit)
            .map(|(id, _)| id.clone())
            .collect();
        silent
            .iter()
            .flat_map(|id| self.resign(id, ResignReason::Timeout, now))
            .collect()
    }
}
