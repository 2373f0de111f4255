//! Federate-side connection to the federation server.

use std::io::{self, BufReader, BufWriter};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, Weak};
use std::thread;
use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, TryRecvError};
use serde_json::Value;
use thiserror::Error;

use super::codec::{read_frame, write_frame, CodecError};
use super::message::{FedMessage, MsgType, Payload, PROTOCOL_VERSION};

/// Environment variable holding the default federation endpoint.
pub const RTI_ENV: &str = "HARBOUR_RTI";

/// Endpoint used when neither a flag nor [`RTI_ENV`] gives one.
pub const DEFAULT_RTI_ENDPOINT: &str = "127.0.0.1:4516";

const JOIN_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot reach federation at {endpoint}: {source}")]
    Connect { endpoint: String, source: io::Error },
    #[error("join rejected ({code}): {message}")]
    Rejected { code: String, message: String },
    #[error("no JOIN_ACK within {0:?}")]
    JoinTimeout(Duration),
    #[error("nothing received within {0:?}")]
    Timeout(Duration),
    #[error("federation connection lost")]
    Lost,
    #[error(transparent)]
    Codec(#[from] CodecError),
}

struct Inner {
    id: String,
    writer: Mutex<BufWriter<TcpStream>>,
    stream: TcpStream,
    seq: AtomicU64,
    sim_time_bits: AtomicU64,
    closed: AtomicBool,
    heartbeats_paused: AtomicBool,
}

impl Inner {
    fn send(&self, msg_type: MsgType, sim_time: f64, payload: Payload) -> Result<u64, ClientError> {
        if self.closed.load(Ordering::SeqCst) {
            return Err(ClientError::Lost);
        }
        let mut w = self.writer.lock().unwrap();
        // seq is taken under the writer lock so frames leave in seq order
        let seq = self.seq.fetch_add(1, Ordering::SeqCst) + 1;
        let mut msg = FedMessage::new(msg_type, &self.id, sim_time.max(0.0), seq);
        msg.payload = payload;
        if write_frame(&mut *w, &msg).is_err() {
            self.closed.store(true, Ordering::SeqCst);
            return Err(ClientError::Lost);
        }
        self.sim_time_bits
            .store(sim_time.max(0.0).to_bits(), Ordering::Relaxed);
        Ok(seq)
    }
}

/// A joined federate. Sending is thread-safe; received messages arrive on
/// one queue in arrival order.
pub struct RtiClient {
    inner: Arc<Inner>,
    rx: Receiver<FedMessage>,
    join_ack: FedMessage,
}

impl RtiClient {
    /// Connects, joins as `federate_id` and starts the heartbeat thread.
    pub fn connect(endpoint: &str, federate_id: &str) -> Result<Self, ClientError> {
        let connect_err = |source| ClientError::Connect {
            endpoint: endpoint.to_string(),
            source,
        };
        let addrs: Vec<_> = endpoint.to_socket_addrs().map_err(connect_err)?.collect();
        let stream = addrs
            .iter()
            .find_map(|a| TcpStream::connect_timeout(a, Duration::from_secs(2)).ok())
            .ok_or_else(|| {
                connect_err(io::Error::new(
                    io::ErrorKind::ConnectionRefused,
                    "connection refused",
                ))
            })?;
        stream.set_nodelay(true).map_err(connect_err)?;

        let join = FedMessage::new(MsgType::Join, federate_id, 0.0, 1)
            .with("protocol_version", PROTOCOL_VERSION);
        let mut writer = BufWriter::new(stream.try_clone().map_err(connect_err)?);
        write_frame(&mut writer, &join).map_err(connect_err)?;

        stream
            .set_read_timeout(Some(JOIN_TIMEOUT))
            .map_err(connect_err)?;
        let mut reader = BufReader::new(stream.try_clone().map_err(connect_err)?);
        let ack = match read_frame(&mut reader) {
            Ok(m) if m.msg_type == MsgType::JoinAck => m,
            Ok(m) if m.msg_type == MsgType::Error => {
                return Err(ClientError::Rejected {
                    code: m.str_field("code").unwrap_or("error").to_string(),
                    message: m.str_field("message").unwrap_or("").to_string(),
                })
            }
            Ok(m) => {
                return Err(ClientError::Codec(CodecError::MalformedFrame(format!(
                    "expected JOIN_ACK, got {:?}",
                    m.msg_type
                ))))
            }
            Err(CodecError::Io(e))
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) =>
            {
                return Err(ClientError::JoinTimeout(JOIN_TIMEOUT))
            }
            Err(e) => return Err(e.into()),
        };
        stream.set_read_timeout(None).map_err(connect_err)?;

        let inner = Arc::new(Inner {
            id: federate_id.to_string(),
            writer: Mutex::new(writer),
            stream: stream.try_clone().map_err(connect_err)?,
            seq: AtomicU64::new(1),
            sim_time_bits: AtomicU64::new(0f64.to_bits()),
            closed: AtomicBool::new(false),
            heartbeats_paused: AtomicBool::new(false),
        });

        let (tx, rx) = unbounded();
        let reader_inner = Arc::downgrade(&inner);
        thread::Builder::new()
            .name(format!("fed-read-{federate_id}"))
            .spawn(move || {
                loop {
                    match read_frame(&mut reader) {
                        Ok(m) => {
                            if tx.send(m).is_err() {
                                break;
                            }
                        }
                        Err(_) => break,
                    }
                }
                if let Some(i) = reader_inner.upgrade() {
                    i.closed.store(true, Ordering::SeqCst);
                }
            })
            .map_err(connect_err)?;

        let interval = ack.f64_field("heartbeat_interval").unwrap_or(1.0);
        let period = Duration::from_secs_f64(interval.clamp(0.01, 60.0));
        let hb = Arc::downgrade(&inner);
        thread::Builder::new()
            .name(format!("fed-heartbeat-{federate_id}"))
            .spawn(move || heartbeat_loop(hb, period))
            .map_err(connect_err)?;

        Ok(RtiClient {
            inner,
            rx,
            join_ack: ack,
        })
    }

    pub fn id(&self) -> &str {
        &self.inner.id
    }

    pub fn join_ack(&self) -> &FedMessage {
        &self.join_ack
    }

    /// Objects listed in the JOIN_ACK snapshot.
    pub fn snapshot(&self) -> &[Value] {
        self.join_ack
            .payload
            .get("objects")
            .and_then(Value::as_array)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn is_connected(&self) -> bool {
        !self.inner.closed.load(Ordering::SeqCst)
    }

    /// Stops (or resumes) heartbeats, to exercise the liveness check.
    pub fn pause_heartbeats(&self, paused: bool) {
        self.inner.heartbeats_paused.store(paused, Ordering::SeqCst);
    }

    pub fn send(
        &self,
        msg_type: MsgType,
        sim_time: f64,
        payload: Payload,
    ) -> Result<u64, ClientError> {
        self.inner.send(msg_type, sim_time, payload)
    }

    pub fn publish(
        &self,
        class: &str,
        object: &str,
        schema: &[(&str, &str)],
    ) -> Result<u64, ClientError> {
        let mut p = Payload::new();
        p.insert("class".into(), class.into());
        p.insert("object".into(), object.into());
        let attrs: Payload = schema
            .iter()
            .map(|(k, v)| (k.to_string(), Value::from(*v)))
            .collect();
        p.insert("attributes".into(), Value::Object(attrs));
        self.send(MsgType::Publish, 0.0, p)
    }

    pub fn subscribe(&self, class: &str) -> Result<u64, ClientError> {
        let mut p = Payload::new();
        p.insert("class".into(), class.into());
        self.send(MsgType::Subscribe, 0.0, p)
    }

    pub fn update(
        &self,
        object: &str,
        sim_time: f64,
        attributes: Payload,
    ) -> Result<u64, ClientError> {
        let mut p = Payload::new();
        p.insert("object".into(), object.into());
        p.insert("attributes".into(), Value::Object(attributes));
        self.send(MsgType::Update, sim_time, p)
    }

    /// Sends an interaction to `to`, or to every subscriber of `class`.
    pub fn interaction(
        &self,
        class: &str,
        to: Option<&str>,
        params: Payload,
        sim_time: f64,
    ) -> Result<u64, ClientError> {
        let mut p = Payload::new();
        p.insert("class".into(), class.into());
        if let Some(t) = to {
            p.insert("to".into(), t.into());
        }
        p.insert("params".into(), Value::Object(params));
        self.send(MsgType::Interaction, sim_time, p)
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Result<FedMessage, ClientError> {
        self.rx.recv_timeout(timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => ClientError::Timeout(timeout),
            RecvTimeoutError::Disconnected => ClientError::Lost,
        })
    }

    /// Next received message if one is waiting; `Err(Lost)` once the
    /// connection is gone and the queue is drained.
    pub fn try_recv(&self) -> Result<Option<FedMessage>, ClientError> {
        match self.rx.try_recv() {
            Ok(m) => Ok(Some(m)),
            Err(TryRecvError::Empty) => Ok(None),
            Err(TryRecvError::Disconnected) => Err(ClientError::Lost),
        }
    }

    pub fn receiver(&self) -> &Receiver<FedMessage> {
        &self.rx
    }

    /// Sends RESIGN and closes the connection.
    pub fn resign(self) -> Result<(), ClientError> {
        let sim_time = f64::from_bits(self.inner.sim_time_bits.load(Ordering::Relaxed));
        let r = self.inner.send(MsgType::Resign, sim_time, Payload::new());
        self.close();
        r.map(|_| ())
    }

    fn close(&self) {
        self.inner.closed.store(true, Ordering::SeqCst);
        let _ = self.inner.stream.shutdown(Shutdown::Both);
    }
}

impl Drop for RtiClient {
    fn drop(&mut self) {
        self.close();
    }
}

fn heartbeat_loop(inner: Weak<Inner>, period: Duration) {
    loop {
        thread::sleep(period);
        let Some(i) = inner.upgrade() else { return };
        if i.closed.load(Ordering::SeqCst) {
            return;
        }
        if !i.heartbeats_paused.load(Ordering::SeqCst) {
            let t = f64::from_bits(i.sim_time_bits.load(Ordering::Relaxed));
            let _ = i.send(MsgType::Heartbeat, t, Payload::new());
        }
    }
}

/// Endpoint from an explicit value, else [`RTI_ENV`], else the default.
pub fn default_endpoint(explicit: Option<&str>) -> String {
    explicit
        .map(str::to_string)
        .or_else(|| std::env::var(RTI_ENV).ok().filter(|s| !s.is_empty()))
        .unwrap_or_else(|| DEFAULT_RTI_ENDPOINT.to_string())
}
