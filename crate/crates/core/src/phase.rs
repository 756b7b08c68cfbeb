//! Contact-phase recognition from force and kinematics, and fusion with an
//! externally suggested (semantic) phase.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{wrench_force_magnitude, ContactPhase, ObservationFrame, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    /// Force (N) at or above which a sample counts towards contact.
    pub contact_on: f64,
    /// Force (N) below which contact is released.
    pub contact_off: f64,
    /// Distance (m) to the task target inside which free motion becomes an approach.
    pub approach_distance: f64,
    /// Consecutive samples at or above `contact_on` needed to enter contact.
    pub debounce: u32,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self { contact_on: 2.0, contact_off: 0.5, approach_distance: 0.05, debounce: 5 }
    }
}

impl PhaseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.contact_off < self.contact_on && self.contact_off >= 0.0 && self.debounce >= 1 {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid phase config: {self:?}")))
        }
    }
}

/// Kinematic context for one detector step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotionCue {
    /// Distance (m) from the end effector to the current task target.
    pub distance_to_target: f64,
    /// Direction the controller is being asked to move in (any scale).
    pub commanded_motion: Vec3,
}

/// Hysteretic, debounced phase state machine. Its state is the history summary
/// needed for a step: the run length of strong-force samples and the last
/// contact normal.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDetector {
    cfg: PhaseConfig,
    strong_run: u32,
    contact_normal: Option<Vec3>,
}

impl PhaseDetector {
    pub fn new(cfg: PhaseConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, strong_run: 0, contact_normal: None })
    }

    pub fn config(&self) -> &PhaseConfig {
        &self.cfg
    }

    /// Outward normal of the most recent contact, taken from the sensed force direction.
    pub fn contact_normal(&self) -> Option<Vec3> {
        self.contact_normal
    }

    pub fn detect(&mut self, obs: &ObservationFrame, cue: &MotionCue, prev: ContactPhase) -> ContactPhase {
        let f = wrench_force_magnitude(&obs.wrench);
        if f >= self.cfg.contact_on {
            self.strong_run = self.strong_run.saturating_add(1);
            self.contact_normal = Some(obs.wrench.force * (1.0 / f));
        } else {
            self.strong_run = 0;
        }

        let moving_away = self
            .contact_normal
            .map(|n| cue.commanded_motion.dot(n) > 0.0)
            .unwrap_or(false);
        let kinematic = if cue.distance_to_target <= self.cfg.approach_distance {
            ContactPhase::Approaching
        } else {
            ContactPhase::FreeMotion
        };

        match prev {
            ContactPhase::Contact => {
                if f >= self.cfg.contact_off {
                    ContactPhase::Contact
                } else if moving_away {
                    ContactPhase::Retreat
                } else {
                    kinematic
                }
            }
            _ if self.strong_run >= self.cfg.debounce => ContactPhase::Contact,
            ContactPhase::Retreat if moving_away => ContactPhase::Retreat,
            _ => kinematic,
        }
    }
}

/// Combines a semantic phase (possibly missing) with the sensed one. Sensed contact
/// always wins; otherwise a present semantic phase wins.
pub fn fuse(semantic: Option<ContactPhase>, sensed: ContactPhase) -> ContactPhase {
    match (semantic, sensed) {
        (_, ContactPhase::Contact) => ContactPhase::Contact,
        (Some(s), _) => s,
        (None, s) => s,
    }
}
