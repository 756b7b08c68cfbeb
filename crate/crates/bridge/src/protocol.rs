//! JSON messages exchanged over WebSocket text frames.
//!
//! ```text
//! client -> server  {"type":"observation","seq":1,"timestamp":0.0,
//!                    "proprio":{"pose":[7],"twist":[6],"wrench":[6],"gripper":0.0},
//!                    "images":{"wrist":"<base64>"}}            (images optional)
//! server -> client  {"type":"action_chunk","seq":1,"actions":[[7],...],"horizon":n}
//!                   {"type":"error","seq":1,"code":"BadRequest","detail":"..."}
//! ```

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use compliant_core::types::{ActionChunk, ActionCommand, ObservationFrame, Pose, Quat, Twist, Vec3, Wrench};
use serde::{Deserialize, Serialize};

use crate::BridgeError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proprio {
    pub pose: [f64; 7],
    pub twist: [f64; 6],
    pub wrench: [f64; 6],
    pub gripper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMessage {
    pub seq: u64,
    pub timestamp: f64,
    pub proprio: Proprio,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionChunkMessage {
    pub seq: u64,
    /// Plain rows so a ragged one can be reported by index.
    pub actions: Vec<Vec<f64>>,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    BadRequest,
    Overloaded,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMessage {
    pub seq: Option<u64>,
    pub code: ErrorCode,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Observation(ObservationMessage),
    ActionChunk(ActionChunkMessage),
    Error(ErrorMessage),
}

impl Message {
    pub fn to_json(&self) -> String {
        // Serializing these plain structs cannot fail; non-finite floats become null.
        serde_json::to_string(self).expect("message serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, BridgeError> {
        serde_json::from_str(text).map_err(|e| BridgeError::Protocol(e.to_string()))
    }
}

pub fn observation_message(obs: &ObservationFrame, seq: u64) -> ObservationMessage {
    ObservationMessage {
        seq,
        timestamp: obs.timestamp,
        proprio: Proprio {
            pose: obs.pose.to_array(),
            twist: obs.twist.to_array(),
            wrench: obs.wrench.to_array(),
            gripper: obs.gripper,
        },
        images: obs
            .images
            .as_ref()
            .map(|m| m.iter().map(|(k, v)| (k.clone(), B64.encode(v))).collect()),
    }
}

/// Serde writes the shortest representation that reads back to the same f64,
/// so the numeric payload survives a round trip bit for bit.
pub fn encode_observation(obs: &ObservationFrame, seq: u64) -> Vec<u8> {
    Message::Observation(observation_message(obs, seq)).to_json().into_bytes()
}

/// Rebuilds the frame without renormalizing the quaternion, so decoding is an
/// exact inverse of encoding.
pub fn frame_from_message(msg: &ObservationMessage) -> Result<ObservationFrame, BridgeError> {
    let p = msg.proprio.pose;
    let images = match &msg.images {
        None => None,
        Some(m) => Some(
            m.iter()
                .map(|(k, v)| {
                    B64.decode(v)
                        .map(|bytes| (k.clone(), bytes))
                        .map_err(|e| BridgeError::Protocol(format!("image `{k}`: {e}")))
                })
                .collect::<Result<BTreeMap<_, _>, _>>()?,
        ),
    };
    Ok(ObservationFrame {
        timestamp: msg.timestamp,
        pose: Pose { position: Vec3::new(p[0], p[1], p[2]), orientation: Quat { w: p[3], x: p[4], y: p[5], z: p[6] } },
        twist: Twist::from_array(msg.proprio.twist),
        wrench: Wrench::from_array(msg.proprio.wrench),
        gripper: msg.proprio.gripper,
        images,
    })
}

/// Returns the frame and its sequence number.
pub fn decode_observation(bytes: &[u8]) -> Result<(ObservationFrame, u64), BridgeError> {
    match parse(bytes)? {
        Message::Observation(m) => Ok((frame_from_message(&m)?, m.seq)),
        other => Err(wrong_type("observation", &other)),
    }
}

pub fn encode_action_chunk(chunk: &ActionChunk) -> Vec<u8> {
    let actions: Vec<Vec<f64>> = chunk.actions.iter().map(|a| a.to_array().to_vec()).collect();
    let horizon = actions.len();
    Message::ActionChunk(ActionChunkMessage { seq: chunk.seq, actions, horizon }).to_json().into_bytes()
}

pub fn chunk_from_message(msg: &ActionChunkMessage) -> Result<ActionChunk, BridgeError> {
    if msg.horizon != msg.actions.len() {
        return Err(BridgeError::Protocol(format!(
            "horizon {} does not match {} actions",
            msg.horizon,
            msg.actions.len()
        )));
    }
    let actions = msg
        .actions
        .iter()
        .enumerate()
        .map(|(i, row)| {
            <[f64; 7]>::try_from(row.as_slice())
                .map(ActionCommand::from_array)
                .map_err(|_| BridgeError::Protocol(format!("action {i} has {} numbers, expected 7", row.len())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    ActionChunk::new(msg.seq, actions).map_err(|e| BridgeError::Protocol(e.to_string()))
}

/// Decodes a server reply. An error message from the server becomes
/// [`BridgeError::Remote`].
pub fn decode_action_chunk(bytes: &[u8]) -> Result<ActionChunk, BridgeError> {
    match parse(bytes)? {
        Message::ActionChunk(m) => chunk_from_message(&m),
        Message::Error(e) => Err(BridgeError::Remote { code: e.code, detail: e.detail }),
        other => Err(wrong_type("action_chunk", &other)),
    }
}

pub fn encode_error(seq: Option<u64>, code: ErrorCode, detail: impl Into<String>) -> Vec<u8> {
    Message::Error(ErrorMessage { seq, code, detail: detail.into() }).to_json().into_bytes()
}

fn parse(bytes: &[u8]) -> Result<Message, BridgeError> {
    let text = std::str::from_utf8(bytes).map_err(|e| BridgeError::Protocol(format!("not UTF-8: {e}")))?;
    Message::from_json(text)
}

fn wrong_type(expected: &str, got: &Message) -> BridgeError {
    let tag = match got {
        Message::Observation(_) => "observation",
        Message::ActionChunk(_) => "action_chunk",
        Message::Error(_) => "error",
    };
    BridgeError::Protocol(format!("expected `{expected}` message, got `{tag}`"))
}
