//! TCP federation server: one reader and one writer thread per connection
//! around a single router thread that owns all routing state.

use std::collections::HashMap;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};

use super::codec::{read_frame, write_frame, CodecError};
use super::message::FedMessage;
use super::queue::{OutboundQueue, DEFAULT_QUEUE_BOUND};
use super::router::{ConnId, Outbound, Router, ROUTER_ID};

/// Default federation port.
pub const DEFAULT_RTI_PORT: u16 = 4516;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Expected heartbeat period, s.
    pub heartbeat_interval: f64,
    pub queue_bound: usize,
    /// Period of the liveness check.
    pub poll_tick: Duration,
    /// Pause before every frame written, to build up queue pressure in tests.
    pub write_delay: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            heartbeat_interval: 1.0,
            queue_bound: DEFAULT_QUEUE_BOUND,
            poll_tick: Duration::from_millis(50),
            write_delay: Duration::ZERO,
        }
    }
}

enum Event {
    Connected(ConnId, ConnHandle),
    Frame(ConnId, FedMessage),
    Malformed(ConnId, String),
    Disconnected(ConnId),
}

struct QueueState {
    queue: OutboundQueue,
    closing: bool,
    aborted: bool,
}

/// Router-side handle of one connection's outbound path.
#[derive(Clone)]
struct ConnHandle {
    shared: Arc<(Mutex<QueueState>, Condvar)>,
    stream: Arc<TcpStream>,
}

impl ConnHandle {
    fn push(&self, msg: FedMessage, coalesced: &AtomicU64) -> bool {
        let (lock, cv) = &*self.shared;
        let mut st = lock.lock().unwrap();
        if st.closing || st.aborted {
            return true;
        }
        let before = st.queue.coalesced();
        let ok = st.queue.push(msg).is_ok();
        coalesced.fetch_add(st.queue.coalesced() - before, Ordering::Relaxed);
        cv.notify_one();
        ok
    }

    fn close_after_drain(&self) {
        let (lock, cv) = &*self.shared;
        lock.lock().unwrap().closing = true;
        cv.notify_one();
    }

    fn abort(&self) {
        let (lock, cv) = &*self.shared;
        lock.lock().unwrap().aborted = true;
        cv.notify_one();
        let _ = self.stream.shutdown(Shutdown::Both);
    }
}

pub struct RtiServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    coalesced: Arc<AtomicU64>,
    threads: Vec<JoinHandle<()>>,
}

impl RtiServer {
    pub fn bind(addr: impl ToSocketAddrs, config: ServerConfig) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let coalesced = Arc::new(AtomicU64::new(0));
        let (tx, rx) = unbounded();

        let router = {
            let stop = stop.clone();
            let coalesced = coalesced.clone();
            let config = config.clone();
            thread::Builder::new()
                .name("rti-router".into())
                .spawn(move || router_loop(rx, config, stop, coalesced))?
        };
        let acceptor = {
            let stop = stop.clone();
            thread::Builder::new()
                .name("rti-accept".into())
                .spawn(move || accept_loop(listener, tx, config, stop))?
        };
        log::info!("rti listening on {addr}");
        Ok(RtiServer {
            addr,
            stop,
            coalesced,
            threads: vec![router, acceptor],
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// UPDATEs replaced or dropped by outbound coalescing so far.
    pub fn coalesced(&self) -> u64 {
        self.coalesced.load(Ordering::Relaxed)
    }

    pub fn shutdown(mut self) {
        self.stop_threads();
    }

    fn stop_threads(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for RtiServer {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

fn accept_loop(
    listener: TcpListener,
    tx: Sender<Event>,
    config: ServerConfig,
    stop: Arc<AtomicBool>,
) {
    let mut next_id: ConnId = 0;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                next_id += 1;
                log::debug!("connection {next_id} from {peer}");
                if let Err(e) = start_connection(next_id, stream, &tx, &config) {
                    log::warn!("connection {next_id} setup failed: {e}");
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                thread::sleep(Duration::from_millis(5))
            }
            Err(e) => {
                log::warn!("accept failed: {e}");
                thread::sleep(Duration::from_millis(20));
            }
        }
    }
}

fn start_connection(
    id: ConnId,
    stream: TcpStream,
    tx: &Sender<Event>,
    config: &ServerConfig,
) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let stream = Arc::new(stream);
    let handle = ConnHandle {
        shared: Arc::new((
            Mutex::new(QueueState {
                queue: OutboundQueue::new(config.queue_bound),
                closing: false,
                aborted: false,
            }),
            Condvar::new(),
        )),
        stream: stream.clone(),
    };
    let _ = tx.send(Event::Connected(id, handle.clone()));

    let reader_stream = stream.try_clone()?;
    let reader_tx = tx.clone();
    thread::Builder::new()
        .name(format!("rti-read-{id}"))
        .spawn(move || {
            let mut r = BufReader::new(reader_stream);
            loop {
                match read_frame(&mut r) {
                    Ok(msg) => {
                        if reader_tx.send(Event::Frame(id, msg)).is_err() {
                            break;
                        }
                    }
                    Err(CodecError::MalformedFrame(m)) => {
                        let _ = reader_tx.send(Event::Malformed(id, m));
                        break;
                    }
                    Err(_) => break,
                }
            }
            let _ = reader_tx.send(Event::Disconnected(id));
        })?;

    let delay = config.write_delay;
    let writer_stream = stream.try_clone()?;
    thread::Builder::new()
        .name(format!("rti-write-{id}"))
        .spawn(move || writer_loop(handle, writer_stream, delay))?;
    Ok(())
}

fn writer_loop(handle: ConnHandle, stream: TcpStream, delay: Duration) {
    let mut w = BufWriter::new(stream);
    let (lock, cv) = &*handle.shared;
    loop {
        let msg = {
            let mut st = lock.lock().unwrap();
            loop {
                if st.aborted {
                    return;
                }
                if let Some(m) = st.queue.pop() {
                    break Some(m);
                }
                if st.closing {
                    break None;
                }
                st = cv.wait(st).unwrap();
            }
        };
        let Some(msg) = msg else {
            let _ = w.flush();
            let _ = handle.stream.shutdown(Shutdown::Both);
            return;
        };
        if !delay.is_zero() {
            thread::sleep(delay);
        }
        if write_frame(&mut w, &msg).is_err() {
            let _ = handle.stream.shutdown(Shutdown::Both);
            return;
        }
    }
}

fn router_loop(
    rx: Receiver<Event>,
    config: ServerConfig,
    stop: Arc<AtomicBool>,
    coalesced: Arc<AtomicU64>,
) {
    let start = Instant::now();
    let now = || start.elapsed().as_secs_f64();
    let mut router = Router::new(config.heartbeat_interval);
    let mut conns: HashMap<ConnId, ConnHandle> = HashMap::new();
    let mut next_poll = config.poll_tick;
    let perform =
        |out: Vec<Outbound>, conns: &mut HashMap<ConnId, ConnHandle>, router: &mut Router| {
            let mut pending = out;
            while !pending.is_empty() {
                let mut more = Vec::new();
                for o in pending {
                    match o {
                        Outbound::Send(c, msg) => {
                            if let Some(h) = conns.get(&c) {
                                if !h.push(msg, &coalesced) {
                                    log::warn!("connection {c} outbound queue overflow; closing");
                                    h.abort();
                                    conns.remove(&c);
                                    more.extend(router.disconnected(c, now()));
                                }
                            }
                        }
                        Outbound::Close(c) => {
                            if let Some(h) = conns.remove(&c) {
                                h.close_after_drain();
                            }
                        }
                    }
                }
                pending = more;
            }
        };
    while !stop.load(Ordering::SeqCst) {
        let wait = next_poll.saturating_sub(start.elapsed());
        match rx.recv_timeout(wait) {
            Ok(Event::Connected(c, h)) => {
                conns.insert(c, h);
            }
            Ok(Event::Frame(c, msg)) => {
                let out = router.handle(c, msg, now());
                perform(out, &mut conns, &mut router);
            }
            Ok(Event::Malformed(c, why)) => {
                log::warn!("connection {c}: malformed frame: {why}");
                let err = FedMessage::error(ROUTER_ID, 0, "malformed_frame", why);
                let mut out = vec![Outbound::Send(c, err), Outbound::Close(c)];
                out.extend(router.disconnected(c, now()));
                perform(out, &mut conns, &mut router);
            }
            Ok(Event::Disconnected(c)) => {
                let out = router.disconnected(c, now());
                perform(out, &mut conns, &mut router);
                if let Some(h) = conns.remove(&c) {
                    h.close_after_drain();
                }
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break,
        }
        if start.elapsed() >= next_poll {
            let out = router.poll(now());
            perform(out, &mut conns, &mut router);
            while next_poll <= start.elapsed() {
                next_poll += config.poll_tick;
            }
        }
    }
    for h in conns.values() {
        h.abort();
    }
}
