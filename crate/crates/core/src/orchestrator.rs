//! The multi-rate episode loop.
//!
//! Three clocks share one integer tick counter at the control rate:
//!
//! * every tick: sense, watchdog, phase, gains, integrate;
//! * every `ticks_per_chunk` ticks: ask the policy for a chunk, keep the first
//!   `chunk_keep` actions and spread each over `ticks_per_chunk / chunk_keep`
//!   setpoints;
//! * every `advisor_every` chunks (adaptor mode): request advice. Advice lands
//!   through a mailbox, so it takes effect one tick later at the earliest, and
//!   the stiffness then slews linearly to the new value over `slew_time`.
//!
//! Setpoints accumulate on the commanded target, not on the measured pose, so a
//! blocked end effector keeps being commanded further into the obstacle.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::advisor::{AdviceSource, AdvisorContext, AdvisorWorker, BackendHandle};
use crate::datalog::{ControlMode, EpisodeRecord};
use crate::error::{Error, Result};
use crate::impedance::{apply_force_scaling_with_floor, derive_params, GainConstants};
use crate::phase::{fuse, MotionCue, PhaseConfig, PhaseDetector};
use crate::policy::Policy;
use crate::safety::{compute_alpha, SafetyConfig, SafetyMonitor, SafetyState};
use crate::sim::{self, Actuation, ScenarioSpec, SensorModel, WorldState};
use crate::types::{ActionChunk, ActionCommand, ContactPhase, ImpedanceRange, ObservationFrame, Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    pub control_hz: f64,
    /// Seconds between policy chunks.
    pub policy_period: f64,
    /// Advice is requested on every n-th chunk.
    pub advisor_every: u32,
    /// Actions executed from each chunk.
    pub chunk_keep: usize,
    /// Per-component bound on each action's deltas.
    pub action_clip: f64,
    /// Seconds to slew from the old advised stiffness to a new one.
    pub slew_time: f64,
    /// A record is kept every n ticks (1 = every tick). Over-threshold ticks
    /// and the final tick are always kept.
    pub log_every: u32,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            control_hz: 1000.0,
            policy_period: 0.3,
            advisor_every: 2,
            chunk_keep: 2,
            action_clip: 0.02,
            slew_time: 0.05,
            log_every: 10,
        }
    }
}

impl RateConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.control_hz
    }

    pub fn ticks_per_chunk(&self) -> u64 {
        (self.policy_period * self.control_hz).round() as u64
    }

    pub fn substeps(&self) -> usize {
        self.ticks_per_chunk() as usize / self.chunk_keep
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("rates: {m}")));
        if !(self.control_hz > 0.0 && self.dt() <= sim::MAX_DT) {
            return bad(format!("control_hz must be at least {}", 1.0 / sim::MAX_DT));
        }
        let tpc = self.ticks_per_chunk();
        if tpc == 0 || self.chunk_keep == 0 || !tpc.is_multiple_of(self.chunk_keep as u64) {
            return bad(format!("{tpc} ticks per chunk do not split evenly over {} actions", self.chunk_keep));
        }
        if self.advisor_every == 0 || self.log_every == 0 {
            return bad("advisor_every and log_every must be >= 1".into());
        }
        if !(self.action_clip > 0.0 && self.slew_time >= 0.0) {
            return bad("action_clip must be > 0 and slew_time >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub mode: ControlMode,
    #[serde(default)]
    pub rates: RateConfig,
    #[serde(default)]
    pub safety: SafetyConfig,
    #[serde(default)]
    pub phase: PhaseConfig,
    #[serde(default)]
    pub gains: GainConstants,
    #[serde(default)]
    pub range: ImpedanceRange,
    #[serde(default)]
    pub sensor: SensorModel,
}

impl EpisodeConfig {
    pub fn new(mode: ControlMode) -> Self {
        Self {
            mode,
            rates: RateConfig::default(),
            safety: SafetyConfig::default(),
            phase: PhaseConfig::default(),
            gains: GainConstants::default(),
            range: ImpedanceRange::default(),
            sensor: SensorModel::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        self.safety.validate()?;
        self.phase.validate()?;
        self.gains.validate()?;
        self.range.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    FailedForce,
    FailedTimeout,
    FailedDiverged,
}

impl Outcome {
    pub const ALL: [Outcome; 4] =
        [Outcome::Success, Outcome::FailedForce, Outcome::FailedTimeout, Outcome::FailedDiverged];

    pub fn label(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::FailedForce => "failed_force",
            Outcome::FailedTimeout => "failed_timeout",
            Outcome::FailedDiverged => "failed_diverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub ticks: u64,
    pub chunks: u64,
    pub advisor_queries: u64,
    pub advice_applied: u64,
    pub advisor_fallbacks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task_id: String,
    pub mode: ControlMode,
    pub outcome: Outcome,
    pub duration: f64,
    pub peak_force: f64,
    pub violation_total: u64,
    pub stats: EpisodeStats,
    /// Why the episode diverged, when it did.
    pub diagnostic: Option<String>,
    #[serde(skip)]
    pub records: Vec<EpisodeRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    pub pose: Pose,
    pub gripper: f64,
}

/// Clamps every delta component to `[-clip, clip]` and the gripper to `[0, 1]`.
pub fn clip_action(a: &ActionCommand, clip: f64) -> ActionCommand {
    let c = |v: f64| v.clamp(-clip, clip);
    ActionCommand {
        delta_position: a.delta_position.map(c),
        delta_orientation: a.delta_orientation.map(c),
        gripper: a.gripper.clamp(0.0, 1.0),
    }
}

/// The first `keep` actions of a chunk (all of them if it is shorter).
pub fn truncate_chunk(chunk: &ActionChunk, keep: usize) -> &[ActionCommand] {
    &chunk.actions[..keep.min(chunk.actions.len())]
}

/// Spreads each action over `substeps` setpoints. Setpoint `i` of an action
/// sits `(i + 1) / substeps` of the way along it, so the last one lands on the
/// action's end pose. Actions chain from `start`.
pub fn interpolate_chunk(start: &Pose, actions: &[ActionCommand], substeps: usize) -> Vec<Setpoint> {
    let mut out = Vec::with_capacity(actions.len() * substeps);
    let mut from = *start;
    for a in actions {
        let to = from.displaced(a.delta_position, a.delta_orientation);
        for i in 0..substeps {
            let s = (i + 1) as f64 / substeps as f64;
            out.push(Setpoint {
                pose: Pose::new(from.position.lerp(to.position, s), from.orientation.slerp(to.orientation, s)),
                gripper: a.gripper,
            });
        }
        from = to;
    }
    out
}

/// Linear ramp between two stiffness vectors over a fixed number of ticks.
#[derive(Debug, Clone, Copy)]
struct Slew {
    from: Vec3,
    to: Vec3,
    start: u64,
    ticks: u64,
}

impl Slew {
    fn at(&self, tick: u64) -> Vec3 {
        if self.ticks == 0 {
            return self.to;
        }
        let s = ((tick - self.start) as f64 / self.ticks as f64).min(1.0);
        self.from.lerp(self.to, s)
    }
}

/// Runs one episode to success, force stop, divergence or the task's time limit.
///
/// Errors are reserved for bad configuration and policy failures; every
/// physical outcome, including numerical divergence, is an `Ok` result.
pub fn run_episode(
    spec: &ScenarioSpec,
    policy: &mut dyn Policy,
    backend: BackendHandle,
    cfg: &EpisodeConfig,
) -> Result<EpisodeResult> {
    cfg.validate()?;
    spec.validate()?;
    let rates = &cfg.rates;
    let dt = rates.dt();
    let tpc = rates.ticks_per_chunk();
    let substeps = rates.substeps();
    let n_ticks = (spec.task.time_limit * rates.control_hz).round() as u64;
    let slew_ticks = (rates.slew_time * rates.control_hz).round() as u64;
    let adaptive = cfg.mode == ControlMode::Adaptor;

    let mut monitor = SafetyMonitor::new(cfg.safety)?;
    let mut detector = PhaseDetector::new(cfg.phase)?;
    let mut worker = AdvisorWorker::new(backend);
    let baseline_params = derive_params(cfg.range.k_max, &cfg.gains)?;

    let mut state = WorldState::initial(spec);
    let mut commanded = Setpoint { pose: state.pose, gripper: state.gripper };
    let mut queue: VecDeque<Setpoint> = VecDeque::new();
    let mut slew = Slew { from: cfg.range.k_max, to: cfg.range.k_max, start: 0, ticks: 0 };
    let mut advice_source: Option<AdviceSource> = None;
    let mut semantic: Option<ContactPhase> = None;
    let mut sensed_phase = ContactPhase::FreeMotion;
    let mut last_setpoint = commanded;

    let mut stats = EpisodeStats::default();
    let mut records = Vec::new();
    let mut diagnostic = None;

    let mut tick = 0u64;
    let outcome = loop {
        if sim::check_success(&state, spec) {
            break Outcome::Success;
        }
        if tick >= n_ticks {
            break Outcome::FailedTimeout;
        }

        let wrench = sim::sense(&state, spec, &cfg.sensor, tick);
        let obs = ObservationFrame {
            timestamp: state.time,
            pose: state.pose,
            twist: state.twist,
            wrench,
            gripper: state.gripper,
            images: None,
        };
        let safety = monitor.observe(&wrench)?;

        if adaptive {
            if let Some(advice) = worker.poll() {
                slew = Slew { from: slew.at(tick), to: advice.k, start: tick, ticks: slew_ticks };
                semantic = advice.phase_claim;
                advice_source = Some(advice.source);
                stats.advice_applied += 1;
                stats.advisor_fallbacks += u64::from(advice.fallback);
            }
        }

        if tick.is_multiple_of(tpc) {
            let chunk = policy.next_chunk(&obs)?;
            let kept: Vec<ActionCommand> =
                truncate_chunk(&chunk, rates.chunk_keep).iter().map(|a| clip_action(a, rates.action_clip)).collect();
            let stream = interpolate_chunk(&commanded.pose, &kept, substeps);
            if let Some(last) = stream.last() {
                commanded = *last;
            }
            queue = stream.into();
            if adaptive && stats.chunks % u64::from(rates.advisor_every) == 0 {
                worker.submit(AdvisorContext {
                    task: spec.task.clone(),
                    phase: fuse(semantic, sensed_phase),
                    velocity: state.twist,
                    wrench,
                    range: cfg.range,
                });
                stats.advisor_queries += 1;
            }
            stats.chunks += 1;
        }
        let setpoint = queue.pop_front().unwrap_or(last_setpoint);

        let cue = MotionCue {
            distance_to_target: (sim::approach_target(&state, spec) - state.pose.position).norm(),
            commanded_motion: setpoint.pose.position - last_setpoint.pose.position,
        };
        sensed_phase = detector.detect(&obs, &cue, sensed_phase);
        let phase = fuse(semantic, sensed_phase);
        last_setpoint = setpoint;

        let (params, alpha) = if adaptive {
            let alpha = compute_alpha(&wrench, &cfg.safety);
            let k = apply_force_scaling_with_floor(slew.at(tick), alpha, cfg.safety.alpha_min)?;
            (derive_params(k, &cfg.gains)?, alpha)
        } else {
            (baseline_params, 1.0)
        };

        let terminated = safety.state == SafetyState::Terminated;
        let over = cfg.safety.metric.measure(&wrench) > cfg.safety.hard_threshold;
        if terminated || over || tick.is_multiple_of(u64::from(rates.log_every)) {
            records.push(EpisodeRecord {
                t: state.time,
                task_id: spec.task.id.clone(),
                mode: cfg.mode,
                phase,
                wrench: wrench.to_array(),
                k: params.k.to_array(),
                d: params.d.to_array(),
                alpha,
                pose: state.pose.to_array(),
                setpoint: setpoint.pose.to_array(),
                advisor_source: advice_source,
                safety_state: safety.state,
            });
        }
        if terminated {
            stats.ticks = tick + 1;
            break Outcome::FailedForce;
        }

        state.gripper = setpoint.gripper;
        let act = Actuation::Impedance { params, setpoint: setpoint.pose };
        match sim::step(&state, &act, spec, dt) {
            Ok(next) => state = next,
            Err(Error::Integration { time, detail }) => {
                diagnostic = Some(format!("diverged at t={time:.3}s: {detail}"));
                stats.ticks = tick + 1;
                break Outcome::FailedDiverged;
            }
            Err(e) => return Err(e),
        }
        tick += 1;
        state.time = tick as f64 * dt;
    };
    if outcome != Outcome::FailedForce && outcome != Outcome::FailedDiverged {
        stats.ticks = tick;
    }

    let status = monitor.status();
    Ok(EpisodeResult {
        task_id: spec.task.id.clone(),
        mode: cfg.mode,
        outcome,
        duration: stats.ticks as f64 * dt,
        peak_force: status.peak_force,
        violation_total: status.violation_total,
        stats,
        diagnostic,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{PolicyHandle, ScriptedPolicy};
    use crate::sim::find_scenario;
    use crate::types::Quat;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn step_x(d: f64) -> ActionCommand {
        ActionCommand::translation(Vec3::new(d, 0.0, 0.0), 0.0)
    }

    #[test]
    fn interpolation_lands_on_each_action_end() {
        let sp = interpolate_chunk(&Pose::default(), &[step_x(0.01), step_x(0.02)], 150);
        assert_eq!(sp.len(), 300);
        assert_abs_diff_eq!(sp[0].pose.position.x, 0.01 / 150.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sp[149].pose.position.x, 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(sp[299].pose.position.x, 0.03, epsilon = 1e-15);
    }

    #[test]
    fn interpolation_slerps_orientation() {
        let a = ActionCommand { delta_orientation: Vec3::new(0.0, 0.0, 0.02), ..Default::default() };
        let sp = interpolate_chunk(&Pose::default(), &[a], 4);
        let half = sp[1].pose.orientation.to_rotation_vector();
        assert_abs_diff_eq!(half.z, 0.01, epsilon = 1e-12);
        assert_eq!(sp[3].pose.orientation, Quat::from_rotation_vector(Vec3::new(0.0, 0.0, 0.02)));
    }

    #[test]
    fn clipping_and_truncation() {
        let a = ActionCommand {
            delta_position: Vec3::new(0.05, -0.05, 0.01),
            delta_orientation: Vec3::new(0.0, 0.3, 0.0),
            gripper: 1.7,
        };
        let c = clip_action(&a, 0.02);
        assert_eq!(c.delta_position, Vec3::new(0.02, -0.02, 0.01));
        assert_eq!(c.delta_orientation.y, 0.02);
        assert_eq!(c.gripper, 1.0);

        let chunk = ActionChunk::new(0, vec![step_x(0.001); 8]).unwrap();
        assert_eq!(truncate_chunk(&chunk, 2).len(), 2);
        let short = ActionChunk::new(0, vec![step_x(0.001)]).unwrap();
        assert_eq!(truncate_chunk(&short, 2).len(), 1);
    }

    #[test]
    fn rate_config_validation() {
        assert_eq!(RateConfig::default().ticks_per_chunk(), 300);
        assert_eq!(RateConfig::default().substeps(), 150);
        let odd = RateConfig { chunk_keep: 7, ..Default::default() };
        assert!(odd.validate().is_err());
        let slow = RateConfig { control_hz: 100.0, ..Default::default() };
        assert!(slow.validate().is_err());
    }

    #[test]
    fn slew_ramps_linearly() {
        let s = Slew { from: Vec3::splat(1000.0), to: Vec3::splat(100.0), start: 10, ticks: 50 };
        assert_eq!(s.at(10), Vec3::splat(1000.0));
        assert_abs_diff_eq!(s.at(35).x, 550.0, epsilon = 1e-9);
        assert_eq!(s.at(60), Vec3::splat(100.0));
        assert_eq!(s.at(500), Vec3::splat(100.0));
    }

    fn run(id: &str, mode: ControlMode, time_limit: Option<f64>) -> EpisodeResult {
        let mut spec = find_scenario(id).unwrap();
        if let Some(t) = time_limit {
            spec.task.time_limit = t;
        }
        let mut pol = ScriptedPolicy::new(PolicyHandle::noisy(spec.script.clone(), 0.0003, 1)).unwrap();
        run_episode(&spec, &mut pol, BackendHandle::Heuristic, &EpisodeConfig::new(mode)).unwrap()
    }

    #[test]
    fn six_seconds_of_bookkeeping() {
        let r = run("push_box", ControlMode::Adaptor, Some(6.0));
        assert_eq!(r.outcome, Outcome::FailedTimeout);
        assert_eq!(r.stats.ticks, 6000);
        assert_eq!(r.stats.chunks, 20);
        assert_eq!(r.stats.advisor_queries, 10);
        assert_abs_diff_eq!(r.duration, 6.0, epsilon = 1e-12);
        assert_eq!(r.records.len(), 600);
    }

    #[test]
    fn baseline_never_asks_for_advice() {
        let r = run("push_box", ControlMode::Baseline, Some(3.0));
        assert_eq!(r.stats.advisor_queries, 0);
        assert!(r.records.iter().all(|x| x.advisor_source.is_none() && x.k == [1000.0; 3] && x.alpha == 1.0));
    }

    #[test]
    fn advice_waits_for_the_next_tick() {
        let r = run("push_box", ControlMode::Adaptor, Some(0.1));
        // Tick 0 runs on the initial stiffness; the first record is from tick 0.
        assert_eq!(r.records[0].k, [1000.0; 3]);
        assert!(r.records[0].advisor_source.is_none());
        assert_eq!(r.records[1].advisor_source, Some(AdviceSource::Heuristic));
    }

    #[test]
    fn zero_travel_goal_succeeds_immediately() {
        let mut spec = find_scenario("drawer_slide").unwrap();
        if let sim::Geometry::DrawerSlide { handle, .. } = spec.geometry {
            spec.target_region.center = handle;
        }
        let mut pol = ScriptedPolicy::new(PolicyHandle::scripted(spec.script.clone())).unwrap();
        let r = run_episode(&spec, &mut pol, BackendHandle::Heuristic, &EpisodeConfig::new(ControlMode::Adaptor))
            .unwrap();
        assert_eq!(r.outcome, Outcome::Success);
        assert_eq!(r.duration, 0.0);
        assert_eq!(r.stats.chunks, 0);
    }

    #[test]
    fn episodes_are_reproducible() {
        let a = run("peg_insert", ControlMode::Adaptor, Some(4.0));
        let b = run("peg_insert", ControlMode::Adaptor, Some(4.0));
        assert_eq!(a, b);
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let spec = find_scenario("push_box").unwrap();
        let mut pol = ScriptedPolicy::new(PolicyHandle::scripted(spec.script.clone())).unwrap();
        let mut cfg = EpisodeConfig::new(ControlMode::Adaptor);
        cfg.safety.alpha_min = 0.0;
        assert!(matches!(
            run_episode(&spec, &mut pol, BackendHandle::Heuristic, &cfg),
            Err(Error::Config(_))
        ));
    }

    proptest! {
        #[test]
        fn setpoint_stream_is_continuous(
            deltas in proptest::collection::vec((-0.05f64..0.05, -0.05f64..0.05, -0.05f64..0.05), 1..8),
        ) {
            let actions: Vec<_> = deltas
                .iter()
                .map(|&(x, y, z)| clip_action(&ActionCommand::translation(Vec3::new(x, y, z), 0.0), 0.02))
                .collect();
            let start = Pose::default();
            let sp = interpolate_chunk(&start, &actions, 150);
            let bound = 0.02 / 150.0 + 1e-12;
            let mut prev = start.position;
            for s in &sp {
                let d = s.pose.position - prev;
                prop_assert!(d.max_abs() <= bound);
                prev = s.pose.position;
            }
        }
    }
}
