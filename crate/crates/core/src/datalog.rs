//! Per-tick episode records and their JSONL form (one JSON object per line).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::advisor::AdviceSource;
use crate::error::{Error, Result};
use crate::safety::SafetyState;
use crate::types::ContactPhase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// Fixed maximum stiffness, no advice, no force scaling.
    Baseline,
    /// Advised stiffness scaled by the force watchdog.
    Adaptor,
}

impl ControlMode {
    pub fn label(self) -> &'static str {
        match self {
            ControlMode::Baseline => "baseline",
            ControlMode::Adaptor => "adaptor",
        }
    }
}

impl std::fmt::Display for ControlMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for ControlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(ControlMode::Baseline),
            "adaptor" => Ok(ControlMode::Adaptor),
            _ => Err(Error::Config(format!("unknown mode `{s}` (expected baseline or adaptor)"))),
        }
    }
}

/// One control tick. Vectors are flat arrays: wrench `[fx, fy, fz, tx, ty, tz]`,
/// poses `[x, y, z, qw, qx, qy, qz]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub t: f64,
    pub task_id: String,
    pub mode: ControlMode,
    pub phase: ContactPhase,
    /// Sensed wrench.
    pub wrench: [f64; 6],
    /// Applied translational stiffness and damping.
    pub k: [f64; 3],
    pub d: [f64; 3],
    pub alpha: f64,
    pub pose: [f64; 7],
    pub setpoint: [f64; 7],
    /// Source of the advice in force; `null` in baseline mode.
    pub advisor_source: Option<AdviceSource>,
    pub safety_state: SafetyState,
}

pub fn write_records<W: Write>(mut out: W, records: &[EpisodeRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Parse(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| Error::io("<stream>", e))?;
    }
    Ok(())
}

pub fn write_jsonl(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_records(&mut w, records)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}
