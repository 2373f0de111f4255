//! Request/response server for the local control and query protocols.
//! Each request frame gets exactly one reply frame, in order.

use std::io::{self, BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crate::rti::{read_frame, write_frame, CodecError, FedMessage, MsgType};

/// Maps one request to its reply.
pub type Handler = Arc<dyn Fn(FedMessage) -> FedMessage + Send + Sync>;

pub struct LocalServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    open: Arc<Mutex<Vec<TcpStream>>>,
    thread: Option<JoinHandle<()>>,
}

impl LocalServer {
    pub fn bind(addr: impl ToSocketAddrs, name: &str, handler: Handler) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let open: Arc<Mutex<Vec<TcpStream>>> = Arc::default();
        let conns = open.clone();
        let thread = thread::Builder::new()
            .name(format!("{name}-accept"))
            .spawn(move || {
                while !flag.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            if let Ok(c) = stream.try_clone() {
                                conns.lock().unwrap().push(c);
                            }
                            let h = handler.clone();
                            let _ = thread::Builder::new()
                                .name("local-conn".into())
                                .spawn(move || serve_connection(stream, h));
                        }
                        Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                            thread::sleep(Duration::from_millis(5))
                        }
                        Err(_) => thread::sleep(Duration::from_millis(20)),
                    }
                }
            })?;
        Ok(LocalServer {
            addr,
            stop,
            open,
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for LocalServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
        for s in self.open.lock().unwrap().drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

fn serve_connection(stream: TcpStream, handler: Handler) {
    if stream.set_nonblocking(false).is_err() || stream.set_nodelay(true).is_err() {
        return;
    }
    let Ok(read_half) = stream.try_clone() else {
        return;
    };
    let mut r = BufReader::new(read_half);
    let mut w = BufWriter::new(stream);
    loop {
        match read_frame(&mut r) {
            Ok(req) => {
                if write_frame(&mut w, &handler(req)).is_err() {
                    return;
                }
            }
            Err(CodecError::MalformedFrame(m)) => {
                let _ = write_frame(&mut w, &FedMessage::error("local", 0, "malformed_frame", m));
                return;
            }
            Err(_) => return,
        }
    }
}

/// Blocking client for the local protocols, used by the CLI and tests.
pub struct LocalClient {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    id: String,
    seq: AtomicU64,
}

impl LocalClient {
    pub fn connect(addr: impl ToSocketAddrs, id: &str) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(Duration::from_secs(10)))?;
        Ok(LocalClient {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
            id: id.to_string(),
            seq: AtomicU64::new(0),
        })
    }

    /// Sends one request and waits for its reply.
    pub fn request(
        &mut self,
        msg_type: MsgType,
        payload: serde_json::Value,
    ) -> Result<FedMessage, CodecError> {
        let seq = self.seq.fetch_add(1, Ordering::SeqCst) + 1;
        let mut msg = FedMessage::new(msg_type, &self.id, 0.0, seq);
        if let serde_json::Value::Object(m) = payload {
            msg.payload = m;
        }
        write_frame(&mut self.writer, &msg)?;
        read_frame(&mut self.reader)
    }
}
