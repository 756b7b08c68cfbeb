//! Force watchdog: stiffness scaling factor and the consecutive-violation stop rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Wrench;

/// How a wrench sample is reduced to one force value for threshold checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceMetric {
    /// `max(|Fx|, |Fy|, |Fz|)`.
    #[default]
    PerAxisMax,
    /// Euclidean norm of the force.
    Norm,
}

impl ForceMetric {
    /// Non-finite readings measure as infinite force.
    pub fn measure(self, w: &Wrench) -> f64 {
        if !w.force.is_finite() {
            return f64::INFINITY;
        }
        match self {
            ForceMetric::PerAxisMax => w.force.max_abs(),
            ForceMetric::Norm => w.force.norm(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyConfig {
    pub hard_threshold: f64,
    pub soft_threshold: f64,
    pub consecutive_limit: u32,
    pub alpha_min: f64,
    #[serde(default)]
    pub metric: ForceMetric,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            hard_threshold: 30.0,
            soft_threshold: 15.0,
            consecutive_limit: 3,
            alpha_min: 0.2,
            metric: ForceMetric::PerAxisMax,
        }
    }
}

impl SafetyConfig {
    /// Default configuration with the soft threshold at half the hard one.
    pub fn with_hard_threshold(hard: f64) -> Self {
        Self { hard_threshold: hard, soft_threshold: hard / 2.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.soft_threshold > 0.0
            && self.soft_threshold <= self.hard_threshold
            && self.hard_threshold.is_finite()
            && self.consecutive_limit >= 1
            && self.alpha_min > 0.0
            && self.alpha_min <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid safety config: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyState {
    Ok,
    Warning,
    Terminated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyStatus {
    pub state: SafetyState,
    pub consecutive_violations: u32,
    pub peak_force: f64,
    pub violation_total: u64,
}

/// Stiffness scaling factor: 1 up to the soft threshold, `alpha_min` from the hard
/// threshold on, linear in between.
pub fn compute_alpha(w: &Wrench, cfg: &SafetyConfig) -> f64 {
    let f = cfg.metric.measure(w);
    if f <= cfg.soft_threshold {
        return 1.0;
    }
    if f >= cfg.hard_threshold {
        return cfg.alpha_min;
    }
    let t = (f - cfg.soft_threshold) / (cfg.hard_threshold - cfg.soft_threshold);
    1.0 - (1.0 - cfg.alpha_min) * t
}

pub fn reset(_cfg: &SafetyConfig) -> SafetyStatus {
    SafetyStatus { state: SafetyState::Ok, consecutive_violations: 0, peak_force: 0.0, violation_total: 0 }
}

/// Folds one sample into the status. `Terminated` is absorbing: updating it is an error.
pub fn update(status: &SafetyStatus, w: &Wrench, cfg: &SafetyConfig) -> Result<SafetyStatus> {
    if status.state == SafetyState::Terminated {
        return Err(Error::Contract("safety monitor already terminated".into()));
    }
    let f = cfg.metric.measure(w);
    let violated = f > cfg.hard_threshold;
    let mut next = *status;
    next.peak_force = next.peak_force.max(f);
    if violated {
        next.consecutive_violations += 1;
        next.violation_total += 1;
    } else {
        next.consecutive_violations = 0;
    }
    next.state = if next.consecutive_violations >= cfg.consecutive_limit {
        SafetyState::Terminated
    } else if f > cfg.soft_threshold {
        SafetyState::Warning
    } else {
        SafetyState::Ok
    };
    Ok(next)
}

/// Owned watchdog for the control loop.
#[derive(Debug, Clone)]
pub struct SafetyMonitor {
    cfg: SafetyConfig,
    status: SafetyStatus,
}

impl SafetyMonitor {
    pub fn new(cfg: SafetyConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { status: reset(&cfg), cfg })
    }

    pub fn config(&self) -> &SafetyConfig {
        &self.cfg
    }

    pub fn status(&self) -> SafetyStatus {
        self.status
    }

    pub fn is_terminated(&self) -> bool {
        self.status.state == SafetyState::Terminated
    }

    pub fn observe(&mut self, w: &Wrench) -> Result<SafetyStatus> {
        self.status = update(&self.status, w, &self.cfg)?;
        Ok(self.status)
    }

    pub fn alpha(&self, w: &Wrench) -> f64 {
        compute_alpha(w, &self.cfg)
    }
}
