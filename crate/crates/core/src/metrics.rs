//! Success statistics over batches of episodes, and plain-text/SVG reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datalog::{ControlMode, EpisodeRecord};
use crate::error::{Error, Result};
use crate::orchestrator::{EpisodeResult, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub task_id: String,
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    /// 95% Wilson score interval on the success rate.
    pub success_interval: (f64, f64),
    pub outcomes: BTreeMap<Outcome, u64>,
    pub mean_peak_force: f64,
    pub max_peak_force: f64,
    pub mean_duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: ControlMode,
    /// In order of first appearance.
    pub tasks: Vec<TaskMetrics>,
    /// Unweighted mean of the per-task success rates.
    pub aggregate_success_rate: f64,
    pub trials: u64,
}

impl MetricsReport {
    pub fn task(&self, id: &str) -> Option<&TaskMetrics> {
        self.tasks.iter().find(|t| t.task_id == id)
    }
}

fn wilson(successes: u64, n: u64) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let n = n as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// All results must come from one control mode.
pub fn compute_metrics(results: &[EpisodeResult]) -> Result<MetricsReport> {
    let first = results.first().ok_or_else(|| Error::Contract("no episodes to summarise".into()))?;
    if results.iter().any(|r| r.mode != first.mode) {
        return Err(Error::Contract("episodes from different control modes".into()));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&EpisodeResult>> = BTreeMap::new();
    for r in results {
        if !groups.contains_key(r.task_id.as_str()) {
            order.push(&r.task_id);
        }
        groups.entry(&r.task_id).or_default().push(r);
    }
    let tasks: Vec<TaskMetrics> = order
        .iter()
        .map(|id| {
            let rs = &groups[id];
            let n = rs.len() as u64;
            let successes = rs.iter().filter(|r| r.outcome == Outcome::Success).count() as u64;
            let mut outcomes = BTreeMap::new();
            for r in rs {
                *outcomes.entry(r.outcome).or_insert(0) += 1;
            }
            let mean = |f: &dyn Fn(&EpisodeResult) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n as f64;
            TaskMetrics {
                task_id: id.to_string(),
                trials: n,
                successes,
                success_rate: successes as f64 / n as f64,
                success_interval: wilson(successes, n),
                outcomes,
                mean_peak_force: mean(&|r| r.peak_force),
                max_peak_force: rs.iter().map(|r| r.peak_force).fold(0.0, f64::max),
                mean_duration: mean(&|r| r.duration),
            }
        })
        .collect();
    let aggregate = tasks.iter().map(|t| t.success_rate).sum::<f64>() / tasks.len() as f64;
    Ok(MetricsReport { mode: first.mode, trials: results.len() as u64, tasks, aggregate_success_rate: aggregate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub task_id: String,
    pub baseline: f64,
    pub adaptor: f64,
    pub baseline_peak_force: f64,
    pub adaptor_peak_force: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub baseline_aggregate: f64,
    pub adaptor_aggregate: f64,
}

impl Comparison {
    pub fn improvement(&self) -> f64 {
        self.adaptor_aggregate - self.baseline_aggregate
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<16} {:>9} {:>9} {:>14} {:>14}", "task", "baseline", "adaptor", "peak F base", "peak F adapt");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<16} {:>9.3} {:>9.3} {:>12.1} N {:>12.1} N",
                r.task_id, r.baseline, r.adaptor, r.baseline_peak_force, r.adaptor_peak_force
            );
        }
        let _ = writeln!(s, "{:<16} {:>9.3} {:>9.3}", "aggregate", self.baseline_aggregate, self.adaptor_aggregate);
        s
    }

    /// Grouped bar chart of per-task success rates.
    pub fn to_svg(&self) -> String {
        let (w, h, left, bottom, top) = (120.0 * self.rows.len().max(1) as f64 + 80.0, 300.0, 50.0, 40.0, 30.0);
        let plot_h = h - bottom - top;
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
        let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#, h - bottom);
        for tick in 0..=4 {
            let v = tick as f64 * 0.25;
            let y = top + plot_h * (1.0 - v);
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v:.2}</text>"#, left - 4.0, y + 4.0);
            let _ = writeln!(s, r##"<line x1="{left}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##, w - 10.0);
        }
        for (i, r) in self.rows.iter().enumerate() {
            let x0 = left + 20.0 + 120.0 * i as f64;
            for (j, (v, colour)) in [(r.baseline, "#888888"), (r.adaptor, "#2b7bba")].into_iter().enumerate() {
                let bh = plot_h * v;
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{}" width="40" height="{bh}" fill="{colour}"><title>{:.3}</title></rect>"#,
                    x0 + 42.0 * j as f64,
                    top + plot_h - bh,
                    v
                );
            }
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, x0 + 41.0, h - bottom + 15.0, r.task_id);
        }
        let _ = writeln!(s, r##"<rect x="{}" y="8" width="10" height="10" fill="#888888"/><text x="{}" y="17">baseline</text>"##, left, left + 14.0);
        let _ = writeln!(s, r##"<rect x="{}" y="8" width="10" height="10" fill="#2b7bba"/><text x="{}" y="17">adaptor</text>"##, left + 80.0, left + 94.0);
        s.push_str("</svg>\n");
        s
    }
}

/// Lines up two reports task by task. Tasks missing from either side are skipped.
pub fn compare_report(baseline: &MetricsReport, adaptor: &MetricsReport) -> Result<Comparison> {
    if baseline.mode != ControlMode::Baseline || adaptor.mode != ControlMode::Adaptor {
        return Err(Error::Contract("compare_report expects a baseline and an adaptor report".into()));
    }
    let rows = baseline
        .tasks
        .iter()
        .filter_map(|b| {
            adaptor.task(&b.task_id).map(|a| ComparisonRow {
                task_id: b.task_id.clone(),
                baseline: b.success_rate,
                adaptor: a.success_rate,
                baseline_peak_force: b.mean_peak_force,
                adaptor_peak_force: a.mean_peak_force,
            })
        })
        .collect();
    Ok(Comparison {
        rows,
        baseline_aggregate: baseline.aggregate_success_rate,
        adaptor_aggregate: adaptor.aggregate_success_rate,
    })
}

/// Two stacked traces over time: sensed force (per-axis max) with the hard
/// threshold, and applied stiffness per axis.
pub fn trace_svg(records: &[EpisodeRecord], hard_threshold: f64) -> String {
    let (w, panel_h, left, pad) = (720.0, 180.0, 50.0, 20.0);
    let h = 2.0 * panel_h + 3.0 * pad;
    let t_end = records.last().map(|r| r.t).unwrap_or(0.0).max(1e-9);
    let x = |t: f64| left + (w - left - pad) * t / t_end;
    let force: Vec<f64> = records.iter().map(|r| r.wrench[..3].iter().fold(0.0, |m: f64, v| m.max(v.abs()))).collect();
    let peak = force.iter().copied().fold(0.0, f64::max);
    let f_max = peak.max(hard_threshold) * 1.1;
    let k_max = records.iter().flat_map(|r| r.k).fold(1.0, f64::max) * 1.1;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let polyline = |s: &mut String, y0: f64, scale: f64, values: &mut dyn Iterator<Item = (f64, f64)>, colour: &str| {
        let pts: Vec<String> =
            values.map(|(t, v)| format!("{:.2},{:.2}", x(t), y0 + panel_h * (1.0 - v / scale))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1" points="{}"/>"#, pts.join(" "));
    };

    let y_force = pad;
    let _ = writeln!(s, r#"<text x="{left}" y="{}">force (N), peak {peak:.1}</text>"#, y_force - 4.0);
    let thr_y = y_force + panel_h * (1.0 - hard_threshold / f_max);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{thr_y}" x2="{}" y2="{thr_y}" stroke="red" stroke-dasharray="4 3"/>"#, w - pad);
    polyline(&mut s, y_force, f_max, &mut records.iter().zip(&force).map(|(r, f)| (r.t, *f)), "black");

    let y_k = 2.0 * pad + panel_h;
    let _ = writeln!(s, r#"<text x="{left}" y="{}">stiffness (N/m): x red, y green, z blue</text>"#, y_k - 4.0);
    for (axis, colour) in ["red", "green", "blue"].into_iter().enumerate() {
        polyline(&mut s, y_k, k_max, &mut records.iter().map(|r| (r.t, r.k[axis])), colour);
    }
    for y0 in [y_force, y_k] {
        let _ = writeln!(s, r#"<rect x="{left}" y="{y0}" width="{}" height="{panel_h}" fill="none" stroke="black"/>"#, w - left - pad);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">t = {t_end:.2} s</text>"#, w - pad, h - 4.0);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::EpisodeStats;
    use approx::assert_abs_diff_eq;

    fn result(task: &str, mode: ControlMode, outcome: Outcome, peak: f64) -> EpisodeResult {
        EpisodeResult {
            task_id: task.into(),
            mode,
            outcome,
            duration: 10.0,
            peak_force: peak,
            violation_total: 0,
            stats: EpisodeStats::default(),
            diagnostic: None,
            records: vec![],
        }
    }

    #[test]
    fn aggregate_is_unweighted_over_tasks() {
        let mut rs = vec![result("a", ControlMode::Adaptor, Outcome::Success, 5.0)];
        rs.extend((0..3).map(|_| result("b", ControlMode::Adaptor, Outcome::FailedForce, 31.0)));
        let m = compute_metrics(&rs).unwrap();
        // Per-trial mean would be 0.25; per-task mean is 0.5.
        assert_abs_diff_eq!(m.aggregate_success_rate, 0.5);
        assert_eq!(m.tasks[0].task_id, "a");
        assert_eq!(m.task("b").unwrap().outcomes[&Outcome::FailedForce], 3);
        assert_eq!(m.trials, 4);
    }

    #[test]
    fn perfect_and_zero_rates() {
        let rs: Vec<_> = (0..10).map(|_| result("a", ControlMode::Baseline, Outcome::Success, 1.0)).collect();
        let m = compute_metrics(&rs).unwrap();
        assert_eq!(m.aggregate_success_rate, 1.0);
        let (lo, hi) = m.tasks[0].success_interval;
        assert!(lo > 0.72 && lo < 0.73, "{lo}");
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_or_mixed_batches_are_rejected() {
        assert!(compute_metrics(&[]).is_err());
        let rs = vec![
            result("a", ControlMode::Adaptor, Outcome::Success, 1.0),
            result("a", ControlMode::Baseline, Outcome::Success, 1.0),
        ];
        assert!(compute_metrics(&rs).is_err());
    }

    #[test]
    fn comparison_table_and_chart() {
        let b = compute_metrics(&[
            result("push_box", ControlMode::Baseline, Outcome::FailedForce, 30.2),
            result("drawer_slide", ControlMode::Baseline, Outcome::Success, 12.0),
        ])
        .unwrap();
        let a = compute_metrics(&[
            result("push_box", ControlMode::Adaptor, Outcome::Success, 14.0),
            result("drawer_slide", ControlMode::Adaptor, Outcome::Success, 11.0),
        ])
        .unwrap();
        let c = compare_report(&b, &a).unwrap();
        assert_abs_diff_eq!(c.improvement(), 0.5);
        let table = c.to_table();
        assert!(table.contains("push_box"));
        assert!(table.lines().last().unwrap().contains("0.500"));
        let svg = c.to_svg();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 2 * 2 + 2);
        assert!(compare_report(&a, &b).is_err());
    }
}
