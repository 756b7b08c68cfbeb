//! Observation/action transport between a controller and a policy server.
//!
//! One observation in, one action chunk out, as JSON text frames over a plain
//! WebSocket. [`server::MockServer`] serves a scripted policy;
//! [`client::RemotePolicy`] plugs a server into the episode loop.

pub mod client;
pub mod protocol;
pub mod server;

pub use client::{ClientConfig, RemotePolicy};
pub use protocol::{decode_action_chunk, decode_observation, encode_action_chunk, encode_observation, ErrorCode};
pub use server::{MockServer, ServerConfig, Session};

use protocol::ErrorCode as Code;

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    /// A frame that does not follow the message schema.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The server answered with an error message.
    #[error("server error {code:?}: {detail}")]
    Remote { code: Code, detail: String },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("cannot bind {addr}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] compliant_core::Error),
}

impl From<tungstenite::Error> for BridgeError {
    fn from(e: tungstenite::Error) -> Self {
        match e {
            tungstenite::Error::Io(io) => BridgeError::Io(io),
            other => BridgeError::Transport(other.to_string()),
        }
    }
}
