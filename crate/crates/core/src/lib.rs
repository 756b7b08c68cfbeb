//! Variable-impedance control stack: context-advised stiffness, force-regulated
//! safety, contact-phase recognition, and a deterministic simulated contact world
//! for comparing a rigid baseline against the adaptive controller.

pub mod advisor;
pub mod datalog;
pub mod error;
pub mod impedance;
pub mod mailbox;
pub mod metrics;
pub mod orchestrator;
pub mod phase;
pub mod policy;
pub mod safety;
pub mod sim;
pub mod types;

pub use error::{Error, Result};
