//! Whole episodes through the public API: scenario catalog, scripted policy,
//! orchestrator, logs and metrics.

use compliant_core::advisor::BackendHandle;
use compliant_core::datalog::{read_jsonl, write_jsonl, ControlMode};
use compliant_core::metrics::{compare_report, compute_metrics};
use compliant_core::orchestrator::{run_episode, EpisodeConfig, EpisodeResult, Outcome};
use compliant_core::policy::{PolicyHandle, ScriptedPolicy};
use compliant_core::sim::{catalog, find_scenario, SensorModel};

fn episode(id: &str, mode: ControlMode, seed: u64) -> EpisodeResult {
    let spec = find_scenario(id).unwrap();
    let mut policy = ScriptedPolicy::new(PolicyHandle::noisy(spec.script.clone(), 0.0003, seed)).unwrap();
    let cfg = EpisodeConfig { sensor: SensorModel::with_seed(seed), ..EpisodeConfig::new(mode) };
    run_episode(&spec, &mut policy, BackendHandle::Heuristic, &cfg).unwrap()
}

#[test]
fn stiff_baseline_trips_the_watchdog_where_the_adaptor_succeeds() {
    for id in ["push_box", "peg_insert"] {
        let b = episode(id, ControlMode::Baseline, 3);
        let a = episode(id, ControlMode::Adaptor, 3);
        assert_eq!(b.outcome, Outcome::FailedForce, "{id}");
        assert_eq!(a.outcome, Outcome::Success, "{id}");
        assert!(a.peak_force < 30.0, "{id}: {}", a.peak_force);
        assert!(b.peak_force > 30.0);
    }
}

#[test]
fn every_scenario_is_solvable_by_the_adaptor() {
    for spec in catalog() {
        let r = episode(&spec.id, ControlMode::Adaptor, 0);
        assert_eq!(r.outcome, Outcome::Success, "{}: {:?}", spec.id, r.diagnostic);
        assert!(r.duration <= spec.task.time_limit);
    }
}

#[test]
fn logs_round_trip_through_jsonl() {
    let r = episode("drawer_slide", ControlMode::Adaptor, 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("drawer.jsonl");
    write_jsonl(&path, &r.records).unwrap();
    assert_eq!(read_jsonl(&path).unwrap(), r.records);
    // One record per 10 ticks, so the last one is at most 10 ms before the end.
    let last = r.records.last().unwrap();
    assert!(r.duration - last.t <= 0.01 + 1e-12 && last.t <= r.duration);
}

#[test]
fn metrics_over_a_small_sweep() {
    let mut base = Vec::new();
    let mut adapt = Vec::new();
    for seed in 0..2 {
        for id in ["push_box", "drawer_slide"] {
            base.push(episode(id, ControlMode::Baseline, seed));
            adapt.push(episode(id, ControlMode::Adaptor, seed));
        }
    }
    let b = compute_metrics(&base).unwrap();
    let a = compute_metrics(&adapt).unwrap();
    assert_eq!(b.task("push_box").unwrap().successes, 0);
    assert_eq!(b.task("drawer_slide").unwrap().successes, 2);
    assert_eq!(a.aggregate_success_rate, 1.0);
    assert_eq!(compare_report(&b, &a).unwrap().improvement(), 0.5);
}
