//! Shared domain types. Everything here is a plain value in SI units.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Three-component vector. The unit depends on where it is used.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn splat(v: f64) -> Self {
        Self { x: v, y: v, z: v }
    }

    pub fn unit(axis: Axis) -> Self {
        let mut v = Self::ZERO;
        v[axis] = 1.0;
        v
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Largest absolute component.
    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn mean(self) -> f64 {
        (self.x + self.y + self.z) / 3.0
    }

    /// Element-wise product.
    pub fn hadamard(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }

    pub fn zip_map(self, o: Vec3, f: impl Fn(f64, f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x, o.x), f(self.y, o.y), f(self.z, o.z))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn all(self, f: impl Fn(f64) -> bool) -> bool {
        f(self.x) && f(self.y) && f(self.z)
    }

    /// Scales the vector down so its norm does not exceed `cap`.
    pub fn cap_norm(self, cap: f64) -> Vec3 {
        let n = self.norm();
        if n > cap && n > 0.0 {
            self * (cap / n)
        } else {
            self
        }
    }

    pub fn lerp(self, o: Vec3, t: f64) -> Vec3 {
        self + (o - self) * t
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Index<Axis> for Vec3 {
    type Output = f64;
    fn index(&self, a: Axis) -> &f64 {
        match a {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }
}

impl std::ops::IndexMut<Axis> for Vec3 {
    fn index_mut(&mut self, a: Axis) -> &mut f64 {
        match a {
            Axis::X => &mut self.x,
            Axis::Y => &mut self.y,
            Axis::Z => &mut self.z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Unit quaternion, scalar first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quat {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Builds a quaternion and renormalizes it. A zero quaternion maps to identity.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Self::IDENTITY;
        }
        Self { w: w / n, x: x / n, y: y / n, z: z / n }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn conjugate(self) -> Quat {
        Quat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn mul(self, o: Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    /// Rotation vector (axis times angle) to quaternion.
    pub fn from_rotation_vector(r: Vec3) -> Quat {
        let angle = r.norm();
        if angle < 1e-12 {
            return Quat::new(1.0, 0.5 * r.x, 0.5 * r.y, 0.5 * r.z);
        }
        let axis = r * (1.0 / angle);
        let (s, c) = (0.5 * angle).sin_cos();
        Quat::new(c, axis.x * s, axis.y * s, axis.z * s)
    }

    /// Minimal rotation vector, angle in [0, pi].
    pub fn to_rotation_vector(self) -> Vec3 {
        let q = if self.w < 0.0 {
            Quat { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
        } else {
            self
        };
        let v = Vec3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < 1e-12 {
            return v * 2.0;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }

    pub fn slerp(self, o: Quat, t: f64) -> Quat {
        let mut d = self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z;
        let mut o = o;
        if d < 0.0 {
            d = -d;
            o = Quat { w: -o.w, x: -o.x, y: -o.y, z: -o.z };
        }
        if d > 0.9995 {
            return Quat::new(
                self.w + t * (o.w - self.w),
                self.x + t * (o.x - self.x),
                self.y + t * (o.y - self.y),
                self.z + t * (o.z - self.z),
            );
        }
        let theta = d.acos();
        let s = theta.sin();
        let a = ((1.0 - t) * theta).sin() / s;
        let b = (t * theta).sin() / s;
        Quat::new(
            a * self.w + b * o.w,
            a * self.x + b * o.x,
            a * self.y + b * o.y,
            a * self.z + b * o.z,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Quat) -> Self {
        let q = orientation;
        Self { position, orientation: Quat::new(q.w, q.x, q.y, q.z) }
    }

    pub fn from_position(position: Vec3) -> Self {
        Self { position, orientation: Quat::IDENTITY }
    }

    /// `[x, y, z, qw, qx, qy, qz]`.
    pub fn to_array(self) -> [f64; 7] {
        let p = self.position;
        let q = self.orientation;
        [p.x, p.y, p.z, q.w, q.x, q.y, q.z]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Self::new(Vec3::new(a[0], a[1], a[2]), Quat::new(a[3], a[4], a[5], a[6]))
    }

    /// Translational and rotational error `target - self`, rotation as a rotation vector.
    pub fn error_to(&self, target: &Pose) -> (Vec3, Vec3) {
        let dq = target.orientation.mul(self.orientation.conjugate());
        (target.position - self.position, dq.to_rotation_vector())
    }

    /// Applies a small displacement: translation added, rotation pre-multiplied.
    pub fn displaced(&self, delta_position: Vec3, delta_orientation: Vec3) -> Pose {
        let q = Quat::from_rotation_vector(delta_orientation).mul(self.orientation);
        Pose::new(self.position + delta_position, q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub linear: Vec3,
    pub angular: Vec3,
}

impl Twist {
    pub fn to_array(self) -> [f64; 6] {
        let (l, a) = (self.linear, self.angular);
        [l.x, l.y, l.z, a.x, a.y, a.z]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self { linear: Vec3::new(a[0], a[1], a[2]), angular: Vec3::new(a[3], a[4], a[5]) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub const ZERO: Wrench = Wrench { force: Vec3::ZERO, torque: Vec3::ZERO };

    pub fn from_force(force: Vec3) -> Self {
        Self { force, torque: Vec3::ZERO }
    }

    pub fn to_array(self) -> [f64; 6] {
        let (f, t) = (self.force, self.torque);
        [f.x, f.y, f.z, t.x, t.y, t.z]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self { force: Vec3::new(a[0], a[1], a[2]), torque: Vec3::new(a[3], a[4], a[5]) }
    }

    pub fn is_finite(&self) -> bool {
        self.force.is_finite() && self.torque.is_finite()
    }
}

impl Add for Wrench {
    type Output = Wrench;
    fn add(self, o: Wrench) -> Wrench {
        Wrench { force: self.force + o.force, torque: self.torque + o.torque }
    }
}

impl Neg for Wrench {
    type Output = Wrench;
    fn neg(self) -> Wrench {
        Wrench { force: -self.force, torque: -self.torque }
    }
}

/// Euclidean norm of the force part.
pub fn wrench_force_magnitude(w: &Wrench) -> f64 {
    w.force.norm()
}

/// Diagonal Cartesian impedance: translational `k`, `d` plus orientation gains.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImpedanceParams {
    pub k: Vec3,
    pub d: Vec3,
    pub k_o: Vec3,
    pub d_o: Vec3,
}

/// Allowed stiffness band per axis and the damping-to-stiffness fraction band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceRange {
    pub k_min: Vec3,
    pub k_max: Vec3,
    pub damping_fraction_min: f64,
    pub damping_fraction_max: f64,
}

impl Default for ImpedanceRange {
    fn default() -> Self {
        Self::uniform(50.0, 1000.0)
    }
}

impl ImpedanceRange {
    pub const DAMPING_FRACTION_MIN: f64 = 0.10;
    pub const DAMPING_FRACTION_MAX: f64 = 0.20;

    /// Same stiffness band on every axis, default damping fractions.
    pub fn uniform(k_min: f64, k_max: f64) -> Self {
        Self {
            k_min: Vec3::splat(k_min),
            k_max: Vec3::splat(k_max),
            damping_fraction_min: Self::DAMPING_FRACTION_MIN,
            damping_fraction_max: Self::DAMPING_FRACTION_MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_k = self.k_min.all(|v| v > 0.0)
            && self.k_max.is_finite()
            && Axis::ALL.iter().all(|&a| self.k_min[a] <= self.k_max[a]);
        let f = (self.damping_fraction_min, self.damping_fraction_max);
        let ok_f = f.0 > 0.0 && f.1 < 1.0 && f.0 <= f.1;
        if ok_k && ok_f {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid impedance range: {self:?}")))
        }
    }
}

/// True iff every stiffness component lies in `[k_min, k_max]` and every damping
/// component lies in the damping-fraction band of its stiffness. Bounds are inclusive.
pub fn validate_impedance(p: &ImpedanceParams, range: &ImpedanceRange) -> bool {
    Axis::ALL.iter().all(|&a| {
        let (k, d) = (p.k[a], p.d[a]);
        k >= range.k_min[a]
            && k <= range.k_max[a]
            && d >= range.damping_fraction_min * k
            && d <= range.damping_fraction_max * k
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContactPhase {
    FreeMotion,
    Approaching,
    Contact,
    Retreat,
}

impl ContactPhase {
    pub const ALL: [ContactPhase; 4] = [
        ContactPhase::FreeMotion,
        ContactPhase::Approaching,
        ContactPhase::Contact,
        ContactPhase::Retreat,
    ];

    /// Label used in prompts and model replies.
    pub fn label(self) -> &'static str {
        match self {
            ContactPhase::FreeMotion => "Free_motion",
            ContactPhase::Approaching => "Approaching",
            ContactPhase::Contact => "Contact",
            ContactPhase::Retreat => "Retreat",
        }
    }
}

impl fmt::Display for ContactPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub instruction: String,
    pub primary_motion_axis: Axis,
    #[serde(default = "default_force_threshold")]
    pub force_threshold: f64,
    pub time_limit: f64,
}

fn default_force_threshold() -> f64 {
    30.0
}

impl TaskSpec {
    pub fn new(
        id: impl Into<String>,
        instruction: impl Into<String>,
        primary_motion_axis: Axis,
        time_limit: f64,
    ) -> Result<Self> {
        let t = Self {
            id: id.into(),
            instruction: instruction.into(),
            primary_motion_axis,
            force_threshold: default_force_threshold(),
            time_limit,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.force_threshold > 0.0) {
            return Err(Error::Config(format!(
                "task {}: force_threshold must be > 0",
                self.id
            )));
        }
        if !(self.time_limit > 0.0) {
            return Err(Error::Config(format!("task {}: time_limit must be > 0", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservationFrame {
    pub timestamp: f64,
    pub pose: Pose,
    pub twist: Twist,
    pub wrench: Wrench,
    pub gripper: f64,
    /// Opaque camera payloads by name. The simulator never fills these.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<BTreeMap<String, Vec<u8>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionCommand {
    pub delta_position: Vec3,
    /// Small rotation as a rotation vector (rad).
    pub delta_orientation: Vec3,
    pub gripper: f64,
}

impl ActionCommand {
    pub fn translation(delta: Vec3, gripper: f64) -> Self {
        Self { delta_position: delta, delta_orientation: Vec3::ZERO, gripper }
    }

    /// `[dx, dy, dz, droll, dpitch, dyaw, gripper]`.
    pub fn to_array(self) -> [f64; 7] {
        let (p, o) = (self.delta_position, self.delta_orientation);
        [p.x, p.y, p.z, o.x, o.y, o.z, self.gripper]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Self {
            delta_position: Vec3::new(a[0], a[1], a[2]),
            delta_orientation: Vec3::new(a[3], a[4], a[5]),
            gripper: a[6],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.delta_position.is_finite() && self.delta_orientation.is_finite() && self.gripper.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionChunk {
    pub seq: u64,
    pub actions: Vec<ActionCommand>,
}

impl ActionChunk {
    pub fn new(seq: u64, actions: Vec<ActionCommand>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::Contract("action chunk must not be empty".into()));
        }
        if let Some(i) = actions.iter().position(|a| !a.is_finite()) {
            return Err(Error::Contract(format!("action {i} has non-finite components")));
        }
        Ok(Self { seq, actions })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}
