//! Message envelope shared by the federation and the local control and
//! query protocols.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub type Payload = Map<String, Value>;

/// Wire protocol version carried in JOIN.
pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MsgType {
    // federation
    Join,
    JoinAck,
    Resign,
    Publish,
    Subscribe,
    Update,
    Interaction,
    Heartbeat,
    Error,
    // bridge control
    HelmOrder,
    OrderAck,
    SnapshotRequest,
    Snapshot,
    SessionControl,
    // tower queries
    PictureRequest,
    Picture,
    EventsRequest,
    Events,
    MetricsRequest,
    Metrics,
    TeleportRequest,
    Teleport,
    InstructorSetEnvironment,
    Ack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FedMessage {
    pub msg_type: MsgType,
    pub federate_id: String,
    pub sim_time: f64,
    pub seq: u64,
    #[serde(default)]
    pub payload: Payload,
}

impl FedMessage {
    pub fn new(msg_type: MsgType, federate_id: impl Into<String>, sim_time: f64, seq: u64) -> Self {
        FedMessage {
            msg_type,
            federate_id: federate_id.into(),
            sim_time,
            seq,
            payload: Payload::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.payload.insert(key.to_string(), value.into());
        self
    }

    pub fn error(federate_id: &str, seq: u64, code: &str, message: impl Into<String>) -> Self {
        FedMessage::new(MsgType::Error, federate_id, 0.0, seq)
            .with("code", code)
            .with("message", message.into())
    }

    pub fn str_field(&self, key: &str) -> Option<&str> {
        self.payload.get(key).and_then(Value::as_str)
    }

    pub fn f64_field(&self, key: &str) -> Option<f64> {
        self.payload.get(key).and_then(Value::as_f64)
    }
}

/// Serializes any value into a payload map; panics only on non-map
/// values, which is a programming error.
pub fn to_payload<T: Serialize>(value: &T) -> Payload {
    match serde_json::to_value(value).expect("serializable") {
        Value::Object(m) => m,
        other => panic!("payload must be a map, got {other}"),
    }
}

pub fn from_payload<T: for<'de> Deserialize<'de>>(
    payload: &Payload,
) -> Result<T, serde_json::Error> {
    serde_json::from_value(Value::Object(payload.clone()))
}
