//! Scenario definitions and the built-in catalog.
//!
//! Each scenario is a JSON document:
//!
//! ```json
//! {
//!   "id": "push_box",
//!   "task": { "id": "push_box", "instruction": "...", "primary_motion_axis": "X", "time_limit": 25.0 },
//!   "geometry": { "kind": "push_box", "face_x": 0.08, ... },
//!   "env_stiffness": 5000.0, "env_damping": 50.0, "friction_coefficient": 0.4,
//!   "target_region": { "center": [0.23, 0.0, 0.05], "tolerance": 0.005 },
//!   "ee_start": [0.0, 0.0, 0.05],
//!   "script": [ { "position": [0.06, 0.0, 0.05], "gripper": 0.0 }, ... ]
//! }
//! ```
//!
//! `target_region.center` is where the manipulated object should end up: the box
//! near face, the drawer handle, the peg tip, or the placed object.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{TaskSpec, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    PushBox,
    DrawerSlide,
    PegInsert,
    FragilePlace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// A box sliding along +x on the table, stopped by a wall.
    PushBox {
        /// Initial x of the face the end effector pushes on.
        face_x: f64,
        center_y: f64,
        half_width: f64,
        /// The box spans `z` in `[0, height]`.
        height: f64,
        depth: f64,
        mass: f64,
        /// Box displacement at which it meets the wall.
        stop_distance: f64,
    },
    /// A drawer on rails. The handle is grasped and pulled along `axis`.
    DrawerSlide { handle: Vec3, axis: Vec3, mass: f64, max_travel: f64 },
    /// A blind bore in a plate whose top surface is at `hole.z`.
    PegInsert { hole: Vec3, radius: f64, depth: f64 },
    /// A flat table at `surface_z`.
    FragilePlace { surface_z: f64 },
}

impl Geometry {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Geometry::PushBox { .. } => ScenarioKind::PushBox,
            Geometry::DrawerSlide { .. } => ScenarioKind::DrawerSlide,
            Geometry::PegInsert { .. } => ScenarioKind::PegInsert,
            Geometry::FragilePlace { .. } => ScenarioKind::FragilePlace,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRegion {
    pub center: Vec3,
    pub tolerance: f64,
}

/// Scripted waypoint for the stand-in policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Vec3,
    /// 0 = open, 1 = closed.
    pub gripper: f64,
}

fn default_mass() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    pub task: TaskSpec,
    pub geometry: Geometry,
    pub env_stiffness: f64,
    pub env_damping: f64,
    pub friction_coefficient: f64,
    pub target_region: TargetRegion,
    pub ee_start: Vec3,
    /// Translational mass of the end effector (kg).
    #[serde(default = "default_mass")]
    pub ee_mass: f64,
    /// Rotational inertia of the end effector about each axis (kg m^2).
    #[serde(default = "default_mass")]
    pub ee_inertia: f64,
    /// Whether the gripper starts closed on the object.
    #[serde(default)]
    pub start_grasped: bool,
    pub script: Vec<Waypoint>,
}

impl ScenarioSpec {
    pub fn kind(&self) -> ScenarioKind {
        self.geometry.kind()
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        let bad = |what: &str| Err(Error::Config(format!("scenario {}: {what}", self.id)));
        if !(self.env_stiffness > 0.0) {
            return bad("env_stiffness must be > 0");
        }
        if !(self.env_damping >= 0.0 && self.friction_coefficient >= 0.0) {
            return bad("env_damping and friction_coefficient must be >= 0");
        }
        if !(self.ee_mass > 0.0 && self.ee_inertia > 0.0) {
            return bad("ee_mass and ee_inertia must be > 0");
        }
        if !(self.target_region.tolerance > 0.0) {
            return bad("target tolerance must be > 0");
        }
        match &self.geometry {
            Geometry::PushBox { mass, half_width, height, depth, .. } => {
                if !(*mass > 0.0 && *half_width > 0.0 && *height > 0.0 && *depth > 0.0) {
                    return bad("box dimensions and mass must be > 0");
                }
            }
            Geometry::DrawerSlide { axis, mass, max_travel, .. } => {
                if !((axis.norm() - 1.0).abs() < 1e-9 && *mass > 0.0 && *max_travel > 0.0) {
                    return bad("drawer axis must be unit length, mass and travel > 0");
                }
            }
            Geometry::PegInsert { radius, depth, .. } => {
                if !(*radius > 0.0 && *depth > 0.0) {
                    return bad("hole radius and depth must be > 0");
                }
            }
            Geometry::FragilePlace { .. } => {}
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: ScenarioSpec = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: ScenarioSpec =
            serde_json::from_str(&text).map_err(|e| Error::Json { path: path.into(), source: e })?;
        s.validate()?;
        Ok(s)
    }
}

const BUILTIN: [&str; 4] = [
    include_str!("../../scenarios/push_box.json"),
    include_str!("../../scenarios/drawer_slide.json"),
    include_str!("../../scenarios/peg_insert.json"),
    include_str!("../../scenarios/fragile_place.json"),
];

/// The four built-in scenarios, in a fixed order.
pub fn catalog() -> Vec<ScenarioSpec> {
    BUILTIN
        .iter()
        .map(|t| ScenarioSpec::from_json(t).expect("built-in scenario is valid"))
        .collect()
}

pub fn find_scenario(id: &str) -> Result<ScenarioSpec> {
    catalog()
        .into_iter()
        .find(|s| s.id == id)
        .ok_or_else(|| Error::UnknownScenario(id.to_owned()))
}
