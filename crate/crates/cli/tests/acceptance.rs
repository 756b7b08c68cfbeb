//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any fails. A criterion also fails when it overruns its time budget.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use compliant_bridge::{
    decode_action_chunk, decode_observation, encode_action_chunk, encode_observation, ClientConfig, MockServer,
    RemotePolicy,
};
use compliant_core::advisor::{heuristic_advise, parse_impedance_response, AdvisorContext, BackendHandle};
use compliant_core::datalog::ControlMode;
use compliant_core::impedance::{apply_force_scaling, critical_damping, orientation_gains, GainConstants};
use compliant_core::orchestrator::{run_episode, EpisodeConfig};
use compliant_core::policy::{PolicyHandle, ScriptedPolicy};
use compliant_core::safety::{compute_alpha, SafetyConfig, SafetyMonitor, SafetyState};
use compliant_core::sim::{find_scenario, step, Actuation, SensorModel, WorldState};
use compliant_core::types::{
    ActionChunk, ActionCommand, Axis, ContactPhase, ImpedanceParams, ImpedanceRange, ObservationFrame, Pose, Quat,
    Twist, Vec3, Wrench,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rel_err(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

fn orientation_gain_law() -> Result<String, String> {
    let c = GainConstants::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = Vec3::new(rng.random_range(0.0..=2000.0), rng.random_range(0.0..=2000.0), rng.random_range(0.0..=2000.0));
        let (ko, dout) = orientation_gains(k, &c).map_err(|e| e.to_string())?;
        for i in 0..3 {
            let (k, ko, dout) = (k.to_array()[i], ko.to_array()[i], dout.to_array()[i]);
            let ko_ref = 0.15 * k;
            worst = worst.max(rel_err(ko, ko_ref)).max(rel_err(dout, 2.0 * 0.707 * ko_ref.sqrt()));
        }
    }
    ensure!(worst <= 1e-12, "worst relative error {worst:e}");
    let (ko, dout) = orientation_gains(Vec3::splat(1000.0), &c).map_err(|e| e.to_string())?;
    ensure!(rel_err(ko.x, 150.0) <= 1e-12, "k_o(1000) = {}", ko.x);
    ensure!((dout.x - 17.318).abs() < 5e-4, "d_o(1000) = {}", dout.x);
    Ok(format!("worst rel err {worst:.1e}; k=1000 -> ({}, {:.4})", ko.x, dout.x))
}

fn force_scaling_and_damping() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let k = Vec3::new(rng.random_range(0.0..2000.0), rng.random_range(0.0..2000.0), rng.random_range(0.0..2000.0));
        let alpha = rng.random_range(0.2..=1.0);
        let scaled = apply_force_scaling(k, alpha).map_err(|e| e.to_string())?;
        ensure!(scaled.zip_map(k, |s, k| if s <= k { 0.0 } else { 1.0 }).max_abs() == 0.0, "{k:?} x {alpha} -> {scaled:?}");
    }
    let c = GainConstants { zeta_damping: 0.7, m_eff: Vec3::splat(1.0), ..GainConstants::default() };
    let d = critical_damping(Vec3::splat(400.0), &c).map_err(|e| e.to_string())?;
    ensure!(d.x == 28.0, "critical damping of 400 N/m is {}", d.x);
    let cfg = SafetyConfig::default();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..100_000 {
        let scale = [1.0, 20.0, 50.0, 1e6][i % 4];
        let mut comp = || rng.random_range(-scale..scale);
        let mut w = Wrench {
            force: Vec3::new(comp(), comp(), comp()),
            torque: Vec3::new(comp(), comp(), comp()),
        };
        if i % 1000 == 0 {
            w.force.y = [f64::NAN, f64::INFINITY, f64::NEG_INFINITY][i / 1000 % 3];
        }
        let a = compute_alpha(&w, &cfg);
        lo = lo.min(a);
        hi = hi.max(a);
        ensure!((0.2..=1.0).contains(&a), "alpha {a} for {w:?}");
    }
    Ok(format!("no component increased; D(400)=28; alpha in [{lo}, {hi}] over 1e5 wrenches"))
}

fn safety_rule_exhaustive() -> Result<String, String> {
    let cfg = SafetyConfig::default();
    for pattern in 0u32..1024 {
        let bits: Vec<bool> = (0..10).map(|i| pattern >> i & 1 == 1).collect();
        let oracle = (2..10).find(|&i| bits[i - 2] && bits[i - 1] && bits[i]);
        let mut m = SafetyMonitor::new(cfg).map_err(|e| e.to_string())?;
        let mut got = None;
        for (i, &v) in bits.iter().enumerate() {
            let f = if v { 30.5 } else { 29.5 };
            let s = m.observe(&Wrench::from_force(Vec3::new(0.0, 0.0, f))).map_err(|e| e.to_string())?;
            if s.state == SafetyState::Terminated {
                got = Some(i);
                break;
            }
        }
        ensure!(got == oracle, "pattern {pattern:010b}: monitor {got:?}, oracle {oracle:?}");
    }
    Ok("1024/1024 patterns match the brute-force oracle".into())
}

fn plant_oracle() -> Result<String, String> {
    let spec = find_scenario("fragile_place").map_err(|e| e.to_string())?;
    let mut s = WorldState::initial(&spec);
    let x0 = s.pose.position.x;
    let setpoint = Pose::from_position(s.pose.position + Vec3::new(0.1, 0.0, 0.0));
    let params = ImpedanceParams { k: Vec3::splat(100.0), d: Vec3::splat(20.0), k_o: Vec3::ZERO, d_o: Vec3::ZERO };
    let act = Actuation::Impedance { params, setpoint };
    let (mut worst, mut at_half): (f64, f64) = (0.0, f64::NAN);
    for i in 1..=2000 {
        s = step(&s, &act, &spec, 1e-3).map_err(|e| e.to_string())?;
        let t = i as f64 * 1e-3;
        let x = s.pose.position.x - x0;
        worst = worst.max((x - 0.1 * (1.0 - (1.0 + 10.0 * t) * (-10.0 * t).exp())).abs());
        if i == 500 {
            at_half = x;
        }
    }
    ensure!(worst <= 1e-4, "worst deviation {worst:e} m");
    ensure!((at_half - 0.09596).abs() <= 1e-4, "x(0.5) = {at_half}");
    Ok(format!("worst deviation {worst:.1e} m over 2 s; x(0.5 s) = {at_half:.5} m"))
}

fn phase_hierarchy() -> Result<String, String> {
    let spec = find_scenario("push_box").map_err(|e| e.to_string())?;
    let axis = spec.task.primary_motion_axis;
    let advise = |phase| {
        heuristic_advise(&AdvisorContext {
            task: spec.task.clone(),
            phase,
            velocity: Twist::default(),
            wrench: Wrench::ZERO,
            range: ImpedanceRange::default(),
        })
    };
    let mean = |p| advise(p).k.mean();
    let (free, appr, retr, cont) = (
        mean(ContactPhase::FreeMotion),
        mean(ContactPhase::Approaching),
        mean(ContactPhase::Retreat),
        mean(ContactPhase::Contact),
    );
    ensure!(free > appr && appr == retr && retr > cont, "means {free} {appr} {retr} {cont}");
    for p in [ContactPhase::Contact, ContactPhase::Approaching] {
        let k = advise(p).k;
        for other in Axis::ALL.into_iter().filter(|a| *a != axis) {
            ensure!(k[axis] < k[other], "{p}: k[{axis}]={} not below k[{other}]={}", k[axis], k[other]);
        }
    }
    Ok(format!("mean k {free:.1} > {appr:.1} = {retr:.1} > {cont:.1}; primary axis softest"))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_compliant")
}

fn run_cli(args: &[&str], out: &Path) -> Result<(), String> {
    let o = Command::new(bin()).arg("run").args(args).arg("--out").arg(out).output().map_err(|e| e.to_string())?;
    ensure!(o.status.code() == Some(0), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    Ok(())
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn comparative_claim() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_cli(&["--scenario", "all", "--mode", "both", "--trials", "10", "--seed", "2026"], dir.path())?;
    let base = read_json(&dir.path().join("metrics_baseline.json"))?;
    let adapt = read_json(&dir.path().join("metrics_adaptor.json"))?;
    let count = |v: &Value, task: &str, outcome: &str| {
        v["episodes"].as_array().unwrap().iter().filter(|e| e["task_id"] == task && e["outcome"] == outcome).count()
    };
    let mut detail = Vec::new();
    for task in ["push_box", "peg_insert"] {
        let f = count(&base, task, "failed_force");
        ensure!(f >= 8, "baseline {task}: {f}/10 force failures");
        let s = count(&adapt, task, "success");
        ensure!(s >= 7, "adaptor {task}: {s}/10 successes");
        detail.push(format!("{task} baseline force-fail {f}/10, adaptor success {s}/10"));
    }
    for e in adapt["episodes"].as_array().unwrap() {
        ensure!(e["outcome"] != "failed_force", "adaptor safety termination in {}", e["task_id"]);
        if e["outcome"] == "success" {
            let peak = e["peak_force"].as_f64().unwrap();
            ensure!(peak < 30.0, "adaptor {} trial {} peaked at {peak} N", e["task_id"], e["trial"]);
        }
    }
    let (b, a) = (
        base["report"]["aggregate_success_rate"].as_f64().unwrap(),
        adapt["report"]["aggregate_success_rate"].as_f64().unwrap(),
    );
    ensure!(a > b, "aggregate adaptor {a} vs baseline {b}");
    Ok(format!("{}; aggregate {b:.2} -> {a:.2}", detail.join("; ")))
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Result<String, String> {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let args = ["--scenario", "all", "--mode", "both", "--trials", "5", "--seed", "7"];
    run_cli(&args, a.path())?;
    run_cli(&args, b.path())?;
    let (fa, fb) = (files_under(a.path()), files_under(b.path()));
    ensure!(fa.keys().eq(fb.keys()), "different file sets");
    let logs = fa.keys().filter(|p| p.extension().is_some_and(|e| e == "jsonl")).count();
    ensure!(logs == 40, "expected 40 logs, found {logs}");
    for (path, bytes) in &fa {
        ensure!(&fb[path] == bytes, "{} differs between runs", path.display());
    }
    Ok(format!("{} files byte-identical (2 metrics, {logs} logs)", fa.len()))
}

fn random_observation(rng: &mut ChaCha8Rng) -> ObservationFrame {
    let mut v = || Vec3::new(rng.random_range(-1e3..1e3), rng.random::<f64>() * 1e-9, rng.random_range(-1.0..1.0));
    let (p, q, l, a, f, t) = (v(), v(), v(), v(), v(), v());
    let images = (rng.random::<f64>() < 0.3)
        .then(|| BTreeMap::from([("wrist".to_string(), (0..rng.random_range(0..64)).map(|_| rng.random()).collect())]));
    ObservationFrame {
        timestamp: rng.random_range(0.0..100.0),
        pose: Pose { position: p, orientation: Quat { w: rng.random(), x: q.x, y: q.y, z: q.z } },
        twist: Twist { linear: l, angular: a },
        wrench: Wrench { force: f, torque: t },
        gripper: rng.random(),
        images,
    }
}

fn bridge_protocol() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..1000u64 {
        let obs = random_observation(&mut rng);
        let (back, seq) = decode_observation(&encode_observation(&obs, i)).map_err(|e| e.to_string())?;
        ensure!(back == obs && seq == i, "observation {i} changed on the wire");
        let actions = (0..rng.random_range(1..10))
            .map(|_| ActionCommand::from_array(std::array::from_fn(|_| rng.random_range(-0.05..0.05))))
            .collect();
        let chunk = ActionChunk::new(i, actions).map_err(|e| e.to_string())?;
        let back = decode_action_chunk(&encode_action_chunk(&chunk)).map_err(|e| e.to_string())?;
        ensure!(back == chunk, "chunk {i} changed on the wire");
    }

    let spec = find_scenario("push_box").map_err(|e| e.to_string())?;
    let handle = PolicyHandle::noisy(spec.script.clone(), 0.0003, 5);
    let cfg = EpisodeConfig { sensor: SensorModel::with_seed(5), ..EpisodeConfig::new(ControlMode::Adaptor) };
    let mut local = ScriptedPolicy::new(handle.clone()).map_err(|e| e.to_string())?;
    let expected = run_episode(&spec, &mut local, BackendHandle::Heuristic, &cfg).map_err(|e| e.to_string())?;
    let server = MockServer::bind("127.0.0.1:0", handle).map_err(|e| e.to_string())?;
    let mut remote = RemotePolicy::connect(ClientConfig::new(server.url())).map_err(|e| e.to_string())?;
    let got = run_episode(&spec, &mut remote, BackendHandle::Heuristic, &cfg).map_err(|e| e.to_string())?;
    ensure!(got.outcome == expected.outcome, "outcome {:?} vs {:?}", got.outcome, expected.outcome);
    ensure!(got.records.len() == expected.records.len(), "record counts differ");
    let worst = got
        .records
        .iter()
        .zip(&expected.records)
        .flat_map(|(a, b)| a.pose.iter().zip(&b.pose).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    ensure!(worst <= 1e-9, "trajectories differ by {worst:e}");
    Ok(format!("2000 messages round-trip exactly; remote PushBox {} with max pose gap {worst:e}", got.outcome.label()))
}

fn rate_bookkeeping() -> Result<String, String> {
    let mut spec = find_scenario("push_box").map_err(|e| e.to_string())?;
    spec.task.time_limit = 6.0;
    let mut cfg = EpisodeConfig::new(ControlMode::Adaptor);
    cfg.rates.log_every = 1;
    let mut policy = ScriptedPolicy::new(PolicyHandle::scripted(spec.script.clone())).map_err(|e| e.to_string())?;
    let r = run_episode(&spec, &mut policy, BackendHandle::Heuristic, &cfg).map_err(|e| e.to_string())?;
    let s = r.stats;
    ensure!(s.ticks == 6000 && r.records.len() == 6000, "ticks {} records {}", s.ticks, r.records.len());
    ensure!((19..=21).contains(&s.chunks), "chunks {}", s.chunks);
    ensure!(s.advisor_queries == s.chunks.div_ceil(2), "queries {} for {} chunks", s.advisor_queries, s.chunks);
    Ok(format!("{} ticks logged, {} chunks, {} advisor queries", s.ticks, s.chunks, s.advisor_queries))
}

fn parser_corpus() -> Result<String, String> {
    #[derive(serde::Deserialize)]
    struct Case {
        name: String,
        text: String,
        k: Option<[f64; 3]>,
    }
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/advisor_replies.json");
    let cases: Vec<Case> =
        serde_json::from_str(&std::fs::read_to_string(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure!(cases.len() >= 20, "only {} fixtures", cases.len());
    let range = ImpedanceRange::default();
    let (mut accepted, mut rejected) = (0, 0);
    for c in &cases {
        match (parse_impedance_response(&c.text, &range), c.k) {
            (Ok(a), Some(k)) => {
                ensure!((a.k - Vec3::from(k)).max_abs() < 1e-9, "{}: k {:?}", c.name, a.k);
                for axis in Axis::ALL {
                    let (k, d) = (a.k[axis], a.d[axis]);
                    ensure!(k >= range.k_min[axis] && k <= range.k_max[axis], "{}: k out of range", c.name);
                    ensure!(d >= 0.1 * k - 1e-9 && d <= 0.2 * k + 1e-9, "{}: damping fraction {}", c.name, d / k);
                }
                accepted += 1;
            }
            (Err(_), None) => rejected += 1,
            (got, _) => return Err(format!("{}: unexpected {:?}", c.name, got.map(|a| a.k))),
        }
    }
    Ok(format!("{} fixtures: {accepted} accepted within invariants, {rejected} rejected", cases.len()))
}

fn main() {
    let criteria: [(u32, &str, u64, Check); 10] = [
        (1, "orientation gain law", 1, orientation_gain_law),
        (2, "force scaling and critical damping", 1, force_scaling_and_damping),
        (3, "three-strike safety rule", 1, safety_rule_exhaustive),
        (4, "plant step-response oracle", 1, plant_oracle),
        (5, "phase stiffness hierarchy", 1, phase_hierarchy),
        (6, "baseline vs adaptor outcomes", 120, comparative_claim),
        (7, "run determinism", 120, determinism),
        (8, "bridge protocol", 10, bridge_protocol),
        (9, "rate bookkeeping", 5, rate_bookkeeping),
        (10, "reply parser corpus", 1, parser_corpus),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let verdict = match result {
            Ok(detail) if took <= Duration::from_secs(budget) => ("PASS", detail),
            Ok(detail) => ("FAIL", format!("over {budget} s budget; {detail}")),
            Err(why) => ("FAIL", why),
        };
        if verdict.0 == "FAIL" {
            failed += 1;
        }
        println!("{} #{id:<2} {name:<36} {:>7.2} s  {}", verdict.0, took.as_secs_f64(), verdict.1);
    }
    println!("acceptance: {}/10 passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
