//! Blocking client that makes a remote policy server look like an in-process
//! [`Policy`].

use std::net::{TcpStream, ToSocketAddrs};
use std::thread;
use std::time::Duration;

use compliant_core::policy::Policy;
use compliant_core::types::{ActionChunk, ObservationFrame};
use compliant_core::Error as CoreError;
use tungstenite::client::IntoClientRequest;
use tungstenite::{Message as WsMessage, WebSocket};

use crate::protocol::{decode_action_chunk, encode_observation, ErrorCode};
use crate::BridgeError;

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    /// `ws://host:port[/path][?seed=N]`.
    pub url: String,
    /// Applies to connecting and to each read or write.
    pub timeout: Duration,
    /// Extra attempts after a transport failure or an `Overloaded` reply.
    pub retries: u32,
}

impl ClientConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self { url: url.into(), timeout: Duration::from_secs(5), retries: 3 }
    }
}

/// `ws://host:port?q` has an empty request path, which is not valid HTTP; use `/`.
fn with_root_path(url: &str) -> String {
    match url.split_once("://") {
        Some((scheme, rest)) if !rest.contains('/') => match rest.split_once('?') {
            Some((host, query)) => format!("{scheme}://{host}/?{query}"),
            None => format!("{scheme}://{rest}/"),
        },
        _ => url.to_string(),
    }
}

/// Remote policy over one WebSocket connection.
///
/// The server keeps policy state per connection, so a retry that has to
/// reconnect continues against a fresh server-side policy. [`Policy::reset`]
/// uses exactly that to restart the remote script.
pub struct RemotePolicy {
    cfg: ClientConfig,
    socket: Option<WebSocket<TcpStream>>,
    seq: u64,
}

impl RemotePolicy {
    /// Connects eagerly so a wrong URL fails here rather than mid-episode.
    pub fn connect(cfg: ClientConfig) -> Result<Self, BridgeError> {
        let mut p = Self { cfg, socket: None, seq: 0 };
        p.socket = Some(p.open()?);
        Ok(p)
    }

    fn open(&self) -> Result<WebSocket<TcpStream>, BridgeError> {
        let request = with_root_path(&self.cfg.url)
            .into_client_request().map_err(|e| BridgeError::Transport(e.to_string()))?;
        let uri = request.uri();
        if uri.scheme_str() != Some("ws") {
            return Err(BridgeError::Transport(format!("{}: only ws:// URLs are supported", self.cfg.url)));
        }
        let host = uri.host().ok_or_else(|| BridgeError::Transport(format!("{}: no host", self.cfg.url)))?;
        let port = uri.port_u16().unwrap_or(80);
        let mut last = None;
        for addr in (host.trim_matches(|c| c == '[' || c == ']'), port).to_socket_addrs()? {
            match TcpStream::connect_timeout(&addr, self.cfg.timeout) {
                Ok(stream) => {
                    stream.set_read_timeout(Some(self.cfg.timeout))?;
                    stream.set_write_timeout(Some(self.cfg.timeout))?;
                    stream.set_nodelay(true)?;
                    let (ws, _) =
                        tungstenite::client(request, stream).map_err(|e| BridgeError::Transport(e.to_string()))?;
                    return Ok(ws);
                }
                Err(e) => last = Some(e),
            }
        }
        Err(last.map_or_else(|| BridgeError::Transport(format!("{host}: no address")), BridgeError::Io))
    }

    fn exchange(&mut self, payload: &str) -> Result<ActionChunk, BridgeError> {
        if self.socket.is_none() {
            self.socket = Some(self.open()?);
        }
        let ws = self.socket.as_mut().expect("socket opened above");
        ws.send(WsMessage::text(payload))?;
        loop {
            match ws.read()? {
                WsMessage::Text(t) => {
                    let chunk = decode_action_chunk(t.as_bytes())?;
                    if chunk.seq != self.seq {
                        return Err(BridgeError::Protocol(format!("reply seq {} for request {}", chunk.seq, self.seq)));
                    }
                    return Ok(chunk);
                }
                WsMessage::Binary(_) => return Err(BridgeError::Protocol("unexpected binary frame".into())),
                WsMessage::Close(_) => return Err(BridgeError::Transport("server closed the connection".into())),
                _ => {}
            }
        }
    }

    pub fn request(&mut self, obs: &ObservationFrame) -> Result<ActionChunk, BridgeError> {
        let mut attempt = 0;
        loop {
            self.seq += 1;
            let payload = String::from_utf8(encode_observation(obs, self.seq)).expect("JSON is UTF-8");
            let err = match self.exchange(&payload) {
                Ok(chunk) => return Ok(chunk),
                Err(e) => e,
            };
            let retryable = matches!(
                err,
                BridgeError::Transport(_) | BridgeError::Io(_) | BridgeError::Remote { code: ErrorCode::Overloaded, .. }
            );
            if !retryable || attempt >= self.cfg.retries {
                return Err(err);
            }
            attempt += 1;
            log::warn!("policy request {} failed ({err}); retry {attempt}/{}", self.seq, self.cfg.retries);
            self.socket = None;
            thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
        }
    }
}

impl Policy for RemotePolicy {
    fn next_chunk(&mut self, obs: &ObservationFrame) -> compliant_core::Result<ActionChunk> {
        self.request(obs).map_err(|e| CoreError::Policy(e.to_string()))
    }

    fn reset(&mut self) {
        if let Some(mut ws) = self.socket.take() {
            let _ = ws.close(None);
            let _ = ws.flush();
        }
        self.seq = 0;
    }
}

impl Drop for RemotePolicy {
    fn drop(&mut self) {
        self.reset();
    }
}
