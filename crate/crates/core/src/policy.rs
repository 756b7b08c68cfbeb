//! Stand-in action policies that emit fixed-horizon chunks of end-effector deltas.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Waypoint;
use crate::types::{ActionChunk, ActionCommand, ObservationFrame, Vec3};

/// Anything that turns an observation into the next chunk of actions.
pub trait Policy: Send {
    fn next_chunk(&mut self, obs: &ObservationFrame) -> Result<ActionChunk>;

    /// Back to the state before the first chunk.
    fn reset(&mut self) {}
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    ScriptedWaypoint,
    /// Waypoint following with seeded Gaussian noise on every delta.
    ScriptedNoisy { noise_std: f64, seed: u64 },
    /// A policy server reached over the network.
    Remote { url: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyHandle {
    pub kind: PolicyKind,
    pub waypoints: Vec<Waypoint>,
    /// Actions per chunk.
    pub chunk_len: usize,
    /// Largest translation per action (m).
    pub step_cap: f64,
    /// A waypoint within this distance counts as reached (m).
    pub tolerance: f64,
    /// Consecutive chunks that each gain less than `min_progress` (m) on the
    /// waypoint before it is given up.
    pub stall_chunks: u32,
    pub min_progress: f64,
}

impl PolicyHandle {
    pub fn scripted(waypoints: Vec<Waypoint>) -> Self {
        Self {
            kind: PolicyKind::ScriptedWaypoint,
            waypoints,
            chunk_len: 8,
            step_cap: 0.01,
            tolerance: 0.003,
            stall_chunks: 25,
            min_progress: 0.0005,
        }
    }

    pub fn noisy(waypoints: Vec<Waypoint>, noise_std: f64, seed: u64) -> Self {
        Self { kind: PolicyKind::ScriptedNoisy { noise_std, seed }, ..Self::scripted(waypoints) }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("policy: {m}")));
        if self.chunk_len == 0 {
            return bad("chunk_len must be >= 1");
        }
        if !(self.step_cap > 0.0 && self.tolerance > 0.0 && self.min_progress >= 0.0) {
            return bad("step_cap and tolerance must be > 0");
        }
        if let PolicyKind::ScriptedNoisy { noise_std, .. } = self.kind {
            if !(noise_std >= 0.0 && noise_std.is_finite()) {
                return bad("noise_std must be finite and >= 0");
            }
        }
        if self.waypoints.iter().any(|w| !w.position.is_finite() || !w.gripper.is_finite()) {
            return bad("waypoints must be finite");
        }
        Ok(())
    }
}

/// Builds the in-process policy for a scripted handle.
pub fn build_policy(handle: &PolicyHandle) -> Result<Box<dyn Policy>> {
    match handle.kind {
        PolicyKind::Remote { .. } => {
            Err(Error::Policy("remote policies need a network client; see compliant_bridge::RemotePolicy".into()))
        }
        _ => Ok(Box::new(ScriptedPolicy::new(handle.clone())?)),
    }
}

/// Walks a waypoint list. Each chunk holds `chunk_len` equal deltas covering the
/// remaining gap to the current waypoint, capped per step. A waypoint is left
/// once reached with its gripper command sent, or after `stall_chunks` chunks
/// without progress (something is in the way).
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    handle: PolicyHandle,
    index: usize,
    last_distance: f64,
    stalled: u32,
    gripper_sent: Option<f64>,
    seq: u64,
    noise: Option<(ChaCha8Rng, Normal<f64>)>,
}

impl ScriptedPolicy {
    pub fn new(handle: PolicyHandle) -> Result<Self> {
        handle.validate()?;
        let noise = match handle.kind {
            PolicyKind::ScriptedWaypoint => None,
            PolicyKind::ScriptedNoisy { noise_std, seed } => Some((
                ChaCha8Rng::seed_from_u64(seed),
                Normal::new(0.0, noise_std).map_err(|e| Error::Config(e.to_string()))?,
            )),
            PolicyKind::Remote { .. } => return Err(Error::Policy("not a scripted policy".into())),
        };
        Ok(Self { handle, index: 0, last_distance: f64::INFINITY, stalled: 0, gripper_sent: None, seq: 0, noise })
    }

    /// Index of the waypoint being pursued; equals the list length once done.
    pub fn waypoint_index(&self) -> usize {
        self.index
    }

    fn advance(&mut self) {
        self.index += 1;
        self.last_distance = f64::INFINITY;
        self.stalled = 0;
    }
}

impl Policy for ScriptedPolicy {
    fn next_chunk(&mut self, obs: &ObservationFrame) -> Result<ActionChunk> {
        let p = obs.pose.position;
        let PolicyHandle { chunk_len, step_cap, tolerance, stall_chunks, min_progress, .. } = self.handle;
        let target = loop {
            let Some(wp) = self.handle.waypoints.get(self.index).copied() else { break None };
            let dist = (wp.position - p).norm();
            let gripper_done = self.gripper_sent == Some(wp.gripper);
            if dist <= tolerance && gripper_done {
                self.advance();
                continue;
            }
            if dist < self.last_distance - min_progress {
                self.stalled = 0;
            } else {
                self.stalled += 1;
            }
            self.last_distance = dist;
            if self.stalled >= stall_chunks && gripper_done {
                log::debug!("waypoint {} abandoned {:.4} m short", self.index, dist);
                self.advance();
                continue;
            }
            break Some(wp);
        };

        let (delta, gripper) = match target {
            Some(wp) => (((wp.position - p) * (1.0 / chunk_len as f64)).cap_norm(step_cap), wp.gripper),
            None => (Vec3::ZERO, self.gripper_sent.unwrap_or(obs.gripper)),
        };
        self.gripper_sent = Some(gripper);

        let actions = (0..chunk_len)
            .map(|_| {
                let mut d = delta;
                if let Some((rng, normal)) = self.noise.as_mut() {
                    d = (d + Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))).cap_norm(step_cap);
                }
                ActionCommand::translation(d, gripper)
            })
            .collect();
        let chunk = ActionChunk::new(self.seq, actions)?;
        self.seq += 1;
        Ok(chunk)
    }

    fn reset(&mut self) {
        *self = Self::new(self.handle.clone()).expect("handle was validated");
    }
}
