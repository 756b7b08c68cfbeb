use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use compliant_bridge::{ClientConfig, RemotePolicy};
use compliant_core::datalog::{write_jsonl, ControlMode};
use compliant_core::metrics::{compare_report, compute_metrics, MetricsReport};
use compliant_core::orchestrator::{run_episode, EpisodeResult, EpisodeStats, Outcome};
use compliant_core::policy::{Policy, PolicyHandle, ScriptedPolicy};
use compliant_core::sim::ScenarioSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::settings::{trial_seed, RunSettings};
use crate::Failure;

/// One line of the per-episode summary in a metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub task_id: String,
    pub trial: u32,
    pub seed: u64,
    pub outcome: Outcome,
    pub duration: f64,
    pub peak_force: f64,
    pub violation_total: u64,
    pub stats: EpisodeStats,
    pub diagnostic: Option<String>,
    /// Relative to the metrics file.
    pub log: String,
}

/// Contents of `metrics_<mode>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub mode: ControlMode,
    pub seed: u64,
    pub trials: u32,
    pub report: MetricsReport,
    pub episodes: Vec<EpisodeSummary>,
}

#[derive(Debug, Clone)]
struct Job<'a> {
    spec: &'a ScenarioSpec,
    mode: ControlMode,
    trial: u32,
}

fn log_path(mode: ControlMode, task: &str, trial: u32) -> String {
    format!("logs/{}/{task}/trial_{trial:03}.jsonl", mode.label())
}

fn make_policy(s: &RunSettings, spec: &ScenarioSpec, seed: u64) -> anyhow::Result<Box<dyn Policy>> {
    if let Some(url) = &s.policy_url {
        let sep = if url.contains('?') { '&' } else { '?' };
        let remote = RemotePolicy::connect(ClientConfig::new(format!("{url}{sep}seed={seed}")))
            .with_context(|| format!("connecting to policy server {url}"))?;
        return Ok(Box::new(remote));
    }
    let handle = if s.noise > 0.0 {
        PolicyHandle::noisy(spec.script.clone(), s.noise, seed)
    } else {
        PolicyHandle::scripted(spec.script.clone())
    };
    Ok(Box::new(ScriptedPolicy::new(handle)?))
}

fn run_job(s: &RunSettings, job: &Job) -> anyhow::Result<EpisodeResult> {
    let seed = trial_seed(s.seed, job.trial);
    let mut cfg = s.episode.clone();
    cfg.mode = job.mode;
    cfg.sensor.seed = seed;
    let mut policy = make_policy(s, job.spec, seed)?;
    let result = run_episode(job.spec, policy.as_mut(), s.backend.clone(), &cfg)
        .with_context(|| format!("{} {} trial {}", job.spec.id, job.mode, job.trial))?;
    log::info!("{} {} trial {}: {}", job.spec.id, job.mode, job.trial, result.outcome.label());
    Ok(result)
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn cmd_run(s: &RunSettings) -> Result<(), Failure> {
    let jobs: Vec<Job> = s
        .modes
        .iter()
        .flat_map(|&mode| {
            s.scenarios.iter().flat_map(move |spec| (0..s.trials).map(move |trial| Job { spec, mode, trial }))
        })
        .collect();

    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = s.jobs {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| Failure::Runtime(e.into()))?
    };
    // Collecting an indexed parallel iterator keeps job order, whatever the scheduling.
    let results: Vec<EpisodeResult> =
        pool.install(|| jobs.par_iter().map(|j| run_job(s, j)).collect::<anyhow::Result<_>>())?;

    let mut reports = Vec::new();
    for &mode in &s.modes {
        let mut episodes = Vec::new();
        let mut batch = Vec::new();
        for (job, result) in jobs.iter().zip(&results).filter(|(j, _)| j.mode == mode) {
            let log = log_path(mode, &job.spec.id, job.trial);
            let path = s.out.join(&log);
            let dir = path.parent().expect("log path has a parent");
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            write_jsonl(&path, &result.records).map_err(|e| Failure::Runtime(e.into()))?;
            episodes.push(EpisodeSummary {
                task_id: result.task_id.clone(),
                trial: job.trial,
                seed: trial_seed(s.seed, job.trial),
                outcome: result.outcome,
                duration: result.duration,
                peak_force: result.peak_force,
                violation_total: result.violation_total,
                stats: result.stats,
                diagnostic: result.diagnostic.clone(),
                log,
            });
            batch.push(result.clone());
        }
        let report = compute_metrics(&batch).map_err(|e| Failure::Runtime(e.into()))?;
        let file = MetricsFile { mode, seed: s.seed, trials: s.trials, report: report.clone(), episodes };
        let path = metrics_path(&s.out, mode);
        write_json(&path, &file)?;
        println!("{}", summary_table(&report));
        println!("wrote {}", path.display());
        reports.push(report);
    }
    if let [b, a] = reports.as_slice() {
        let c = compare_report(b, a).map_err(|e| Failure::Runtime(e.into()))?;
        print!("{}", c.to_table());
    }
    Ok(())
}

pub fn metrics_path(out: &Path, mode: ControlMode) -> PathBuf {
    out.join(format!("metrics_{}.json", mode.label()))
}

pub fn summary_table(r: &MetricsReport) -> String {
    let mut s = format!("[{}]\n{:<16} {:>7} {:>8} {:>8} {:>8} {:>8} {:>10}\n", r.mode, "task", "success", "ok", "force", "timeout", "diverged", "peak F (N)");
    for t in &r.tasks {
        let n = |o| t.outcomes.get(&o).copied().unwrap_or(0);
        s += &format!(
            "{:<16} {:>7.3} {:>8} {:>8} {:>8} {:>8} {:>10.1}\n",
            t.task_id,
            t.success_rate,
            n(Outcome::Success),
            n(Outcome::FailedForce),
            n(Outcome::FailedTimeout),
            n(Outcome::FailedDiverged),
            t.mean_peak_force
        );
    }
    s += &format!("{:<16} {:>7.3}", "aggregate", r.aggregate_success_rate);
    s
}
