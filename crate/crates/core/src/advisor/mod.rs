//! Context-aware impedance advice: prompt construction, reply parsing and
//! clamping, and two interchangeable backends.

mod heuristic;
mod parse;
mod prompt;
mod remote;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mailbox::Mailbox;
use crate::types::{ContactPhase, ImpedanceRange, TaskSpec, Twist, Vec3, Wrench};

pub use heuristic::{heuristic_advise, CONSTRAINT_AXIS_FACTOR, DAMPING_FRACTION, PRIMARY_AXIS_FACTOR};
pub use parse::{clamp_to_range, format_impedance, parse_impedance_response, parse_phase_response};
pub use prompt::{build_impedance_prompt, build_phase_prompt, IMPEDANCE_TEMPLATE, PHASE_TEMPLATE, SYSTEM_MESSAGE};
pub use remote::{RemoteAdvisor, RemoteConfig, ENV_KEY, ENV_MODEL, ENV_TIMEOUT, ENV_URL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisorContext {
    pub task: TaskSpec,
    pub phase: ContactPhase,
    pub velocity: Twist,
    pub wrench: Wrench,
    pub range: ImpedanceRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdviceSource {
    Heuristic,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advice {
    pub k: Vec3,
    pub d: Vec3,
    /// Phase the backend believes the task is in, if it offered one.
    pub phase_claim: Option<ContactPhase>,
    pub source: AdviceSource,
    /// Wall-clock seconds spent producing this advice.
    pub latency: f64,
    pub raw_text: Option<String>,
    /// Set when a remote query failed and the heuristic stood in.
    #[serde(default)]
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub enum BackendHandle {
    Heuristic,
    Remote(RemoteAdvisor),
}

impl BackendHandle {
    pub fn remote_from_env() -> Result<Self> {
        Ok(BackendHandle::Remote(RemoteAdvisor::new(RemoteConfig::from_env()?)))
    }

    pub fn is_remote(&self) -> bool {
        matches!(self, BackendHandle::Remote(_))
    }
}

/// Never fails: a remote error is logged and answered by the heuristic with
/// `fallback` set.
pub fn advise(ctx: &AdvisorContext, backend: &BackendHandle) -> Advice {
    match backend {
        BackendHandle::Heuristic => heuristic_advise(ctx),
        BackendHandle::Remote(remote) => match remote.query(ctx) {
            Ok(a) => a,
            Err(e) => {
                log::warn!("remote advisor failed, using heuristic: {e}");
                Advice { fallback: true, ..heuristic_advise(ctx) }
            }
        },
    }
}

/// Runs advisor queries off the control path. Results land in a latest-wins
/// mailbox keyed by request sequence number, so a slow reply never overwrites a
/// newer one. The heuristic backend answers synchronously.
#[derive(Debug)]
pub struct AdvisorWorker {
    backend: Arc<BackendHandle>,
    mailbox: Arc<Mailbox<Advice>>,
    next_seq: u64,
}

impl AdvisorWorker {
    pub fn new(backend: BackendHandle) -> Self {
        Self { backend: Arc::new(backend), mailbox: Arc::new(Mailbox::new()), next_seq: 0 }
    }

    pub fn submit(&mut self, ctx: AdvisorContext) {
        let seq = self.next_seq;
        self.next_seq += 1;
        match &*self.backend {
            BackendHandle::Heuristic => {
                self.mailbox.post(seq, heuristic_advise(&ctx));
            }
            BackendHandle::Remote(_) => {
                let backend = Arc::clone(&self.backend);
                let mailbox = Arc::clone(&self.mailbox);
                std::thread::spawn(move || mailbox.post(seq, advise(&ctx, &backend)));
            }
        }
    }

    /// Takes the newest unread advice, if any.
    pub fn poll(&self) -> Option<Advice> {
        self.mailbox.take()
    }

    pub fn submitted(&self) -> u64 {
        self.next_seq
    }
}
