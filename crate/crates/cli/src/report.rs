use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use compliant_core::datalog::{read_jsonl, ControlMode};
use compliant_core::metrics::{compare_report, trace_svg};
use compliant_core::safety::SafetyConfig;

use crate::run::{summary_table, MetricsFile};
use crate::Failure;

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Metrics files written by `run` (one per mode).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Where comparison files and traces go (default: next to the first input).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Episode log (JSONL) to render as a force/stiffness trace; repeatable.
    #[arg(long)]
    pub trace: Vec<PathBuf>,
    /// Threshold line drawn on traces (N).
    #[arg(long, default_value_t = SafetyConfig::default().hard_threshold)]
    pub threshold: f64,
}

fn load(path: &Path) -> Result<MetricsFile, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: not a metrics file: {e}", path.display())))
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), Failure> {
    for t in &args.trace {
        if !t.is_file() {
            return Err(Failure::usage(format!("{}: no such file", t.display())));
        }
    }
    let files = args.inputs.iter().map(|p| load(p)).collect::<Result<Vec<_>, _>>()?;
    let out = args.out.clone().unwrap_or_else(|| {
        args.inputs[0].parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
    });
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let find = |m: ControlMode| files.iter().find(|f| f.mode == m);
    match (find(ControlMode::Baseline), find(ControlMode::Adaptor)) {
        (Some(b), Some(a)) => {
            let c = compare_report(&b.report, &a.report).map_err(|e| Failure::Runtime(e.into()))?;
            let table = c.to_table();
            print!("{table}");
            println!("{:<16} {:>+9.3}", "improvement", c.improvement());
            fs::write(out.join("comparison.txt"), &table)?;
            fs::write(out.join("comparison.json"), serde_json::to_string_pretty(&c).map_err(anyhow::Error::from)? + "\n")?;
            fs::write(out.join("comparison.svg"), c.to_svg())?;
            println!("wrote comparison.{{txt,json,svg}} to {}", out.display());
        }
        _ => {
            for f in &files {
                println!("{}", summary_table(&f.report));
            }
        }
    }

    for t in &args.trace {
        let records = read_jsonl(t).map_err(|e| Failure::usage(e.to_string()))?;
        if records.is_empty() {
            return Err(Failure::usage(format!("{}: no records", t.display())));
        }
        let stem = t.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
        let task = &records[0].task_id;
        let path = out.join(format!("{task}_{}_{stem}.svg", records[0].mode));
        fs::write(&path, trace_svg(&records, args.threshold)).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
