//! Mock inference server: answers every observation with a chunk from a
//! scripted policy. Each connection owns its own policy instance.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use compliant_core::policy::{Policy, PolicyHandle, PolicyKind, ScriptedPolicy};
use tungstenite::handshake::server::{Request, Response};
use tungstenite::{Message as WsMessage, WebSocket};

use crate::protocol::{encode_action_chunk, encode_error, frame_from_message, ErrorCode, Message};
use crate::BridgeError;

#[derive(Debug, Clone, Copy)]
pub struct ServerConfig {
    /// Connections beyond this get an `Overloaded` error and are closed.
    pub max_connections: usize,
    /// How often idle loops look at the shutdown flag.
    pub poll_interval: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { max_connections: 16, poll_interval: Duration::from_millis(20) }
    }
}

/// Protocol state of one connection, independent of any socket.
pub struct Session {
    policy: ScriptedPolicy,
    last_seq: Option<u64>,
}

impl Session {
    /// `seed` replaces the noise seed of a noisy handle; it is ignored otherwise.
    pub fn new(handle: &PolicyHandle, seed: Option<u64>) -> Result<Self, BridgeError> {
        let mut handle = handle.clone();
        if let (PolicyKind::ScriptedNoisy { seed: s, .. }, Some(seed)) = (&mut handle.kind, seed) {
            *s = seed;
        }
        Ok(Self { policy: ScriptedPolicy::new(handle)?, last_seq: None })
    }

    /// Reply to one text frame. Never fails: problems become error messages.
    pub fn respond(&mut self, text: &str) -> Vec<u8> {
        let msg = match Message::from_json(text) {
            Ok(Message::Observation(m)) => m,
            Ok(_) => return encode_error(None, ErrorCode::BadRequest, "expected an observation message"),
            Err(e) => return encode_error(None, ErrorCode::BadRequest, e.to_string()),
        };
        if self.last_seq.is_some_and(|last| msg.seq <= last) {
            return encode_error(Some(msg.seq), ErrorCode::BadRequest, "seq must increase on a connection");
        }
        let obs = match frame_from_message(&msg) {
            Ok(o) => o,
            Err(e) => return encode_error(Some(msg.seq), ErrorCode::BadRequest, e.to_string()),
        };
        self.last_seq = Some(msg.seq);
        match self.policy.next_chunk(&obs) {
            Ok(mut chunk) => {
                chunk.seq = msg.seq;
                encode_action_chunk(&chunk)
            }
            Err(e) => encode_error(Some(msg.seq), ErrorCode::Internal, e.to_string()),
        }
    }
}

/// A running server. Dropping it shuts it down and joins every thread.
pub struct MockServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn bind(addr: &str, handle: PolicyHandle) -> Result<Self, BridgeError> {
        Self::bind_with(addr, handle, ServerConfig::default())
    }

    pub fn bind_with(addr: &str, handle: PolicyHandle, cfg: ServerConfig) -> Result<Self, BridgeError> {
        // Fail here rather than on the first connection.
        Session::new(&handle, None)?;
        let listener = TcpListener::bind(addr).map_err(|e| BridgeError::Bind { addr: addr.to_string(), source: e })?;
        let local = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = shutdown.clone();
        let acceptor = thread::Builder::new()
            .name("mock-policy-accept".into())
            .spawn(move || accept_loop(listener, handle, cfg, flag))?;
        log::info!("mock policy server listening on {local}");
        Ok(Self { addr: local, shutdown, acceptor: Some(acceptor) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}", self.addr)
    }

    /// Setting this flag stops the server as if [`MockServer::shutdown`] was called.
    pub fn shutdown_flag(&self) -> Arc<AtomicBool> {
        self.shutdown.clone()
    }

    /// Blocks until the shutdown flag is raised, then closes everything.
    pub fn wait(mut self) {
        if let Some(t) = self.acceptor.take() {
            let _ = t.join();
        }
    }

    pub fn shutdown(self) {
        self.shutdown.store(true, Ordering::SeqCst);
        self.wait();
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(t) = self.acceptor.take() {
            let _ = t.join();
        }
    }
}

fn accept_loop(listener: TcpListener, handle: PolicyHandle, cfg: ServerConfig, shutdown: Arc<AtomicBool>) {
    let active = Arc::new(AtomicUsize::new(0));
    let mut workers: Vec<JoinHandle<()>> = Vec::new();
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let (handle, shutdown, active) = (handle.clone(), shutdown.clone(), active.clone());
                let spawned = thread::Builder::new()
                    .name(format!("mock-policy-{peer}"))
                    .spawn(move || {
                        active.fetch_add(1, Ordering::SeqCst);
                        if let Err(e) = serve_connection(stream, &handle, cfg, &shutdown, &active) {
                            log::warn!("connection {peer}: {e}");
                        }
                        active.fetch_sub(1, Ordering::SeqCst);
                    });
                match spawned {
                    Ok(w) => workers.push(w),
                    Err(e) => log::error!("cannot spawn handler for {peer}: {e}"),
                }
                workers.retain(|w| !w.is_finished());
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(cfg.poll_interval),
            Err(e) => {
                log::error!("accept failed: {e}");
                thread::sleep(cfg.poll_interval);
            }
        }
    }
    for w in workers {
        let _ = w.join();
    }
}

fn text_frame(json: Vec<u8>) -> WsMessage {
    WsMessage::text(String::from_utf8(json).expect("serde_json emits UTF-8"))
}

const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);

fn seed_from_query(req: &Request) -> Option<u64> {
    req.uri().query()?.split('&').find_map(|kv| kv.strip_prefix("seed=")?.parse().ok())
}

fn serve_connection(
    stream: TcpStream,
    handle: &PolicyHandle,
    cfg: ServerConfig,
    shutdown: &AtomicBool,
    active: &AtomicUsize,
) -> Result<(), BridgeError> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    // Bounds a stalled handshake; a half-open client cannot hold up shutdown for long.
    stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT))?;
    let mut seed = None;
    let mut ws: WebSocket<TcpStream> = tungstenite::accept_hdr(stream, |req: &Request, resp: Response| {
        seed = seed_from_query(req);
        Ok(resp)
    })
    .map_err(|e| BridgeError::Transport(e.to_string()))?;
    ws.get_ref().set_read_timeout(Some(cfg.poll_interval))?;

    if active.load(Ordering::SeqCst) > cfg.max_connections {
        let reply = encode_error(None, ErrorCode::Overloaded, "too many connections");
        ws.send(text_frame(reply))?;
        let _ = ws.close(None);
        return Ok(());
    }
    let mut session = Session::new(handle, seed)?;
    loop {
        if shutdown.load(Ordering::SeqCst) {
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        match ws.read() {
            Ok(WsMessage::Text(t)) => {
                let reply = session.respond(t.as_str());
                ws.send(text_frame(reply))?;
            }
            Ok(WsMessage::Binary(_)) => {
                let reply = encode_error(None, ErrorCode::BadRequest, "binary frames are not supported");
                ws.send(text_frame(reply))?;
            }
            Ok(WsMessage::Close(_)) => {}
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e.into()),
        }
    }
}
