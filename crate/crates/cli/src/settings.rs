//! Resolves run settings from defaults, an optional JSON file, and flags, in
//! that order of increasing priority.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use compliant_core::advisor::BackendHandle;
use compliant_core::datalog::ControlMode;
use compliant_core::orchestrator::{EpisodeConfig, RateConfig};
use compliant_core::phase::PhaseConfig;
use compliant_core::safety::SafetyConfig;
use compliant_core::sim::{catalog, find_scenario, ScenarioSpec, SensorModel};
use compliant_core::types::ImpedanceRange;
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Baseline,
    Adaptor,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvisorArg {
    Heuristic,
    /// Chat-completions endpoint from ADVISOR_URL / ADVISOR_KEY / ADVISOR_MODEL.
    Remote,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON file with any of the options below; flags win over the file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario id, or `all`.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub trials: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub advisor: Option<AdvisorArg>,
    /// Output directory for metrics and logs.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Std-dev (m) of the Gaussian noise the scripted policy adds to each delta.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Take actions from a policy server at this ws:// URL instead of in-process.
    #[arg(long)]
    pub policy_url: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Hard force threshold (N); the soft one follows at half.
    #[arg(long)]
    pub force_threshold: Option<f64>,
    #[arg(long)]
    pub control_hz: Option<f64>,
    /// Uniform lower stiffness bound (N/m).
    #[arg(long)]
    pub k_min: Option<f64>,
    /// Uniform upper stiffness bound (N/m).
    #[arg(long)]
    pub k_max: Option<f64>,
    /// Keep one log record every n control ticks.
    #[arg(long)]
    pub log_every: Option<u32>,
}

/// Everything a config file may set. Nested sections replace the defaults
/// wholesale; scalar overrides are applied on top.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    scenario: Option<String>,
    mode: Option<ModeArg>,
    trials: Option<u32>,
    seed: Option<u64>,
    advisor: Option<AdvisorArg>,
    out: Option<PathBuf>,
    noise: Option<f64>,
    policy_url: Option<String>,
    jobs: Option<usize>,
    force_threshold: Option<f64>,
    control_hz: Option<f64>,
    k_min: Option<f64>,
    k_max: Option<f64>,
    log_every: Option<u32>,
    safety: Option<SafetyConfig>,
    rates: Option<RateConfig>,
    range: Option<ImpedanceRange>,
    phase: Option<PhaseConfig>,
    sensor: Option<SensorModel>,
}

fn load_file(path: &Path) -> Result<FileConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub scenarios: Vec<ScenarioSpec>,
    pub modes: Vec<ControlMode>,
    pub trials: u32,
    pub seed: u64,
    pub backend: BackendHandle,
    pub out: PathBuf,
    pub noise: f64,
    pub policy_url: Option<String>,
    pub jobs: Option<usize>,
    /// Mode and sensor seed are filled in per episode.
    pub episode: EpisodeConfig,
}

pub const DEFAULT_NOISE: f64 = 0.0003;

impl RunSettings {
    pub fn resolve(args: &RunArgs) -> Result<Self, Failure> {
        let file = match &args.config {
            Some(p) => load_file(p)?,
            None => FileConfig::default(),
        };
        macro_rules! pick {
            ($f:ident) => {
                args.$f.clone().or(file.$f.clone())
            };
        }

        let scenario = pick!(scenario).unwrap_or_else(|| "all".into());
        let scenarios = if scenario == "all" {
            catalog()
        } else {
            vec![find_scenario(&scenario).map_err(Failure::usage)?]
        };
        let modes = match pick!(mode).unwrap_or(ModeArg::Both) {
            ModeArg::Baseline => vec![ControlMode::Baseline],
            ModeArg::Adaptor => vec![ControlMode::Adaptor],
            ModeArg::Both => vec![ControlMode::Baseline, ControlMode::Adaptor],
        };
        let trials = pick!(trials).unwrap_or(10);
        if trials == 0 {
            return Err(Failure::usage("trials must be at least 1"));
        }
        let noise = pick!(noise).unwrap_or(DEFAULT_NOISE);
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Failure::usage("noise must be finite and >= 0"));
        }
        if pick!(jobs) == Some(0) {
            return Err(Failure::usage("jobs must be at least 1"));
        }
        let backend = match pick!(advisor).unwrap_or(AdvisorArg::Heuristic) {
            AdvisorArg::Heuristic => BackendHandle::Heuristic,
            AdvisorArg::Remote => BackendHandle::remote_from_env().map_err(Failure::usage)?,
        };

        let mut episode = EpisodeConfig::new(ControlMode::Adaptor);
        if let Some(s) = file.safety {
            episode.safety = s;
        }
        if let Some(r) = file.rates {
            episode.rates = r;
        }
        if let Some(r) = file.range {
            episode.range = r;
        }
        if let Some(p) = file.phase {
            episode.phase = p;
        }
        if let Some(s) = file.sensor {
            episode.sensor = s;
        }
        if let Some(f) = pick!(force_threshold) {
            episode.safety = SafetyConfig { metric: episode.safety.metric, ..SafetyConfig::with_hard_threshold(f) };
        }
        if let Some(hz) = pick!(control_hz) {
            episode.rates.control_hz = hz;
        }
        if let Some(n) = pick!(log_every) {
            episode.rates.log_every = n;
        }
        let (k_min, k_max) = (pick!(k_min), pick!(k_max));
        if k_min.is_some() || k_max.is_some() {
            let r = episode.range;
            episode.range = ImpedanceRange {
                k_min: k_min.map_or(r.k_min, |v| [v; 3].into()),
                k_max: k_max.map_or(r.k_max, |v| [v; 3].into()),
                ..r
            };
        }
        episode.validate().map_err(Failure::usage)?;

        Ok(Self {
            scenarios,
            modes,
            trials,
            seed: pick!(seed).unwrap_or(0),
            backend,
            out: pick!(out).unwrap_or_else(|| PathBuf::from("runs")),
            noise,
            policy_url: pick!(policy_url),
            jobs: pick!(jobs),
            episode,
        })
    }
}

/// Per-trial seed shared by baseline and adaptor runs of the same trial, so the
/// two modes face identical policy and sensor noise.
pub fn trial_seed(seed: u64, trial: u32) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(u64::from(trial))
}
