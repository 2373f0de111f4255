//! Lightweight publish/subscribe federation runtime.

pub mod client;
pub mod codec;
pub mod message;
pub mod queue;
pub mod router;
pub mod server;

pub use client::{default_endpoint, ClientError, RtiClient, DEFAULT_RTI_ENDPOINT, RTI_ENV};
pub use codec::{decode, encode, read_frame, write_frame, CodecError, MAX_FRAME};
pub use message::{from_payload, to_payload, FedMessage, MsgType, Payload, PROTOCOL_VERSION};
pub use queue::{OutboundQueue, Overflow, DEFAULT_QUEUE_BOUND};
pub use router::{
    ConnId, ObjectRecord, Outbound, ResignReason, Router, ROUTER_ID, SILENCE_INTERVALS,
};
pub use server::{RtiServer, ServerConfig, DEFAULT_RTI_PORT};
