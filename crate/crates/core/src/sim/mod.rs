//! Point-mass end effector in a world of penalty contacts.
//!
//! The end effector is a point with mass and rotational inertia. Gravity is
//! compensated. Contacts are linear spring-dampers on penetration depth:
//! static geometry (table, plate, bore) is resolved implicitly each step, so
//! the unforced system never gains energy; moving objects (box, drawer) are
//! coupled explicitly and integrated as 1-D sliders with Coulomb friction.

mod expm;
pub mod scenario;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Axis, ImpedanceParams, Pose, Quat, Twist, Vec3, Wrench};

pub use scenario::{catalog, find_scenario, Geometry, ScenarioKind, ScenarioSpec, TargetRegion, Waypoint};

pub const GRAVITY: f64 = 9.81;
/// Largest accepted integration step (s).
pub const MAX_DT: f64 = 0.002;
/// Grasp succeeds when the gripper closes this close to the grasp point (m).
pub const GRASP_RADIUS: f64 = 0.01;
/// Clearance the end effector must open up before a task counts as finished (m).
pub const WITHDRAW_CLEARANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectState {
    /// Box or drawer displacement along its travel direction (m).
    pub travel: f64,
    pub travel_rate: f64,
    /// Reference point of a carried object: the peg tip or the object's base.
    pub position: Vec3,
    pub attached: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldState {
    pub time: f64,
    pub pose: Pose,
    pub twist: Twist,
    /// Commanded gripper opening, 0 open to 1 closed.
    pub gripper: f64,
    pub object: ObjectState,
}

impl WorldState {
    pub fn initial(spec: &ScenarioSpec) -> Self {
        let grasped = spec.start_grasped;
        WorldState {
            time: 0.0,
            pose: Pose::from_position(spec.ee_start),
            twist: Twist::default(),
            gripper: if grasped { 1.0 } else { 0.0 },
            object: ObjectState { position: spec.ee_start, attached: grasped, ..Default::default() },
        }
    }

    pub fn gripper_closed(&self) -> bool {
        self.gripper >= 0.5
    }
}

/// What drives the end effector over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Actuation {
    /// A wrench held constant over the step.
    Wrench(Wrench),
    /// Cartesian impedance toward `setpoint`, with gains and setpoint held over
    /// the step. Translation is integrated exactly per axis; rotation uses the
    /// torque at the start of the step.
    Impedance { params: ImpedanceParams, setpoint: Pose },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    /// Standard deviation of force noise per axis (N).
    pub force_noise: f64,
    /// Standard deviation of torque noise per axis (N m).
    pub torque_noise: f64,
    pub bias: Wrench,
    pub seed: u64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self { force_noise: 0.05, torque_noise: 0.005, bias: Wrench::ZERO, seed: 0 }
    }
}

impl SensorModel {
    pub fn noiseless() -> Self {
        Self { force_noise: 0.0, torque_noise: 0.0, ..Self::default() }
    }

    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

fn penalty(k: f64, d: f64, depth: f64, rate: f64) -> f64 {
    (k * depth + d * rate.max(0.0)).max(0.0)
}

/// Regularised Coulomb friction: viscous at low slip speed, capped at `mu * normal`.
fn friction(v_t: Vec3, normal: f64, mu: f64, b: f64) -> Vec3 {
    let s = v_t.norm();
    if s == 0.0 {
        return Vec3::ZERO;
    }
    v_t * (-(b * s).min(mu * normal) / s)
}

/// Deepest penetration of `p` into static geometry: outward normal and depth.
/// Negative depth means "outside, this far from the nearest face".
fn static_contact(p: Vec3, spec: &ScenarioSpec) -> Option<(Vec3, f64)> {
    match spec.geometry {
        Geometry::FragilePlace { surface_z } => Some((Vec3::new(0.0, 0.0, 1.0), surface_z - p.z)),
        Geometry::PegInsert { hole, radius, depth } => {
            let top = hole.z;
            let bottom = top - depth;
            let radial = Vec3::new(p.x - hole.x, p.y - hole.y, 0.0);
            let r = radial.norm();
            let up = Vec3::new(0.0, 0.0, 1.0);
            if r <= radius {
                // In line with the bore: above the plate only the bottom matters,
                // inside it the nearer of bottom and wall.
                let to_bottom = bottom - p.z;
                let to_wall = r - radius;
                if p.z >= top || to_bottom >= to_wall {
                    Some((up, to_bottom))
                } else {
                    let inward = if r > 0.0 { radial * (-1.0 / r) } else { Vec3::new(-1.0, 0.0, 0.0) };
                    Some((inward, to_wall))
                }
            } else {
                // Over the plate: the top face, or the bore wall if that is nearer.
                let to_top = top - p.z;
                let into_wall = r - radius;
                if p.z >= top || to_top <= into_wall {
                    Some((up, to_top))
                } else {
                    Some((radial * (-1.0 / r), into_wall))
                }
            }
        }
        Geometry::PushBox { .. } | Geometry::DrawerSlide { .. } => None,
    }
}

/// Forces between the end effector and a moving object: on the end effector,
/// and on the object along its travel direction.
fn object_forces(s: &WorldState, spec: &ScenarioSpec) -> (Vec3, f64) {
    let (k, d, mu) = (spec.env_stiffness, spec.env_damping, spec.friction_coefficient);
    let p = s.pose.position;
    let v = s.twist.linear;
    match spec.geometry {
        Geometry::PushBox { face_x, center_y, half_width, height, depth, stop_distance, .. } => {
            let face = face_x + s.object.travel;
            let mut on_ee = Vec3::ZERO;
            let mut on_box = 0.0;
            let pen = p.x - face;
            if pen > 0.0 && pen < depth && (p.y - center_y).abs() <= half_width && (0.0..=height).contains(&p.z) {
                let n = penalty(k, d, pen, v.x - s.object.travel_rate);
                on_ee = Vec3::new(-n, 0.0, 0.0) + friction(Vec3::new(0.0, v.y, v.z), n, mu, d);
                on_box = n;
            }
            let over = s.object.travel - stop_distance;
            if over > 0.0 {
                on_box -= penalty(k, d, over, s.object.travel_rate);
            }
            (on_ee, on_box)
        }
        Geometry::DrawerSlide { handle, axis, max_travel, .. } => {
            let mut on_ee = Vec3::ZERO;
            let mut on_drawer = 0.0;
            if s.object.attached {
                let h = handle + axis * s.object.travel;
                let f = (h - p) * k + (axis * s.object.travel_rate - v) * d;
                on_ee = f;
                on_drawer = -f.dot(axis);
            }
            if s.object.travel < 0.0 {
                on_drawer += penalty(k, d, -s.object.travel, -s.object.travel_rate);
            } else if s.object.travel > max_travel {
                on_drawer -= penalty(k, d, s.object.travel - max_travel, s.object.travel_rate);
            }
            (on_ee, on_drawer)
        }
        _ => (Vec3::ZERO, 0.0),
    }
}

/// Wrench the environment exerts on the end effector in state `s`.
pub fn contact_wrench(s: &WorldState, spec: &ScenarioSpec) -> Wrench {
    let v = s.twist.linear;
    let mut f = object_forces(s, spec).0;
    if let Some((n, depth)) = static_contact(s.pose.position, spec) {
        if depth > 0.0 {
            let normal = penalty(spec.env_stiffness, spec.env_damping, depth, -v.dot(n));
            let v_t = v - n * v.dot(n);
            f = f + n * normal + friction(v_t, normal, spec.friction_coefficient, spec.env_damping);
        }
    }
    Wrench::from_force(f)
}

/// Sensed wrench: the contact wrench plus bias and Gaussian noise. The noise
/// depends only on the model seed and `call_index`.
pub fn sense(s: &WorldState, spec: &ScenarioSpec, model: &SensorModel, call_index: u64) -> Wrench {
    let mut w = contact_wrench(s, spec) + model.bias;
    if model.force_noise > 0.0 || model.torque_noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        rng.set_stream(call_index);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        for a in Axis::ALL {
            w.force[a] += model.force_noise * unit.sample(&mut rng);
        }
        for a in Axis::ALL {
            w.torque[a] += model.torque_noise * unit.sample(&mut rng);
        }
    }
    w
}

/// Where the end effector is heading to make contact: box face, handle, hole
/// mouth or placement point.
pub fn approach_target(s: &WorldState, spec: &ScenarioSpec) -> Vec3 {
    match spec.geometry {
        Geometry::PushBox { face_x, center_y, height, .. } => {
            Vec3::new(face_x + s.object.travel, center_y, 0.5 * height)
        }
        Geometry::DrawerSlide { handle, axis, .. } => handle + axis * s.object.travel,
        Geometry::PegInsert { hole, .. } => hole,
        Geometry::FragilePlace { .. } => spec.target_region.center,
    }
}

/// Advances the world by `dt` seconds.
pub fn step(state: &WorldState, act: &Actuation, spec: &ScenarioSpec, dt: f64) -> Result<WorldState> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::Domain(format!("dt must be in (0, {MAX_DT}], got {dt}")));
    }
    let m = spec.ee_mass;
    let mut s = *state;
    let (f_obj_ee, f_obj) = object_forces(state, spec);
    let p = state.pose.position;
    let v = state.twist.linear;

    // Normal force the static geometry exerts at the start of the step. It is
    // held through the prediction and the implicit solve corrects the increment.
    let (k_env, d_env) = (spec.env_stiffness, spec.env_damping);
    let held = match static_contact(p, spec) {
        Some((n, depth)) if depth > 0.0 => n * penalty(k_env, d_env, depth, -v.dot(n)),
        _ => Vec3::ZERO,
    };

    let predict = |extra: Vec3| -> (Vec3, Vec3) {
        let f = f_obj_ee + extra;
        match act {
            Actuation::Wrench(w) => {
                let v1 = v + (w.force + f) * (dt / m);
                (p + v1 * dt, v1)
            }
            Actuation::Impedance { params, setpoint } => {
                let (mut x1, mut v1) = (p, v);
                for a in Axis::ALL {
                    let k = params.k[a];
                    let d = params.d[a];
                    (x1[a], v1[a]) = expm::spring_damper_step(p[a], v[a], setpoint.position[a], k, d, m, f[a], dt);
                }
                (x1, v1)
            }
        }
    };
    let torque = match act {
        Actuation::Wrench(w) => w.torque,
        Actuation::Impedance { params, setpoint } => {
            let (_, rot_err) = state.pose.error_to(setpoint);
            params.k_o.hadamard(rot_err) - params.d_o.hadamard(state.twist.angular)
        }
    };

    // Try with the held force first; if that leaves no contact, redo the step
    // as if the contact had just begun.
    let attempts: &[Vec3] = if held == Vec3::ZERO { &[Vec3::ZERO] } else { &[held, Vec3::ZERO] };
    let mut resolved = None;
    for &h in attempts {
        let (x1, v1) = predict(h);
        let Some((n, depth_pred)) = static_contact(x1, spec) else { break };
        if depth_pred <= 0.0 {
            continue;
        }
        let u_pred = -v1.dot(n);
        let depth0 = depth_pred - dt * u_pred;
        let rhs = m * u_pred - dt * k_env * depth0 + dt * h.dot(n);
        let mut u = rhs / (m + dt * d_env + dt * dt * k_env);
        if u < 0.0 {
            u = rhs / (m + dt * dt * k_env);
        }
        // The solve may stop the point just short of the face; that is fine as
        // long as the face only ever pushes.
        let normal = k_env * (depth0 + dt * u) + d_env * u.max(0.0);
        if normal <= 0.0 {
            continue;
        }
        let mut vc = v1 + n * (u_pred - u);
        let vn = n * vc.dot(n);
        let v_t = vc - vn;
        let slip = v_t.norm();
        if slip > 0.0 {
            let drop = ((d_env * slip).min(spec.friction_coefficient * normal) * dt / m).min(slip);
            vc = vn + v_t * (1.0 - drop / slip);
        }
        resolved = Some((x1 + (vc - v1) * dt, vc));
        break;
    }
    let (x1, v1) = resolved.unwrap_or_else(|| predict(Vec3::ZERO));
    s.pose.position = x1;
    s.twist.linear = v1;

    let w1 = state.twist.angular + torque * (dt / spec.ee_inertia);
    s.twist.angular = w1;
    s.pose.orientation = Quat::from_rotation_vector(w1 * dt).mul(state.pose.orientation);

    step_object(&mut s, state, f_obj, spec, dt);

    s.time = state.time + dt;
    let finite = s.pose.position.is_finite()
        && s.twist.linear.is_finite()
        && s.twist.angular.is_finite()
        && s.object.position.is_finite()
        && s.object.travel.is_finite();
    if !finite {
        return Err(Error::Integration { time: s.time, detail: "non-finite state".into() });
    }
    Ok(s)
}

fn step_object(s: &mut WorldState, prev: &WorldState, force: f64, spec: &ScenarioSpec, dt: f64) {
    let slider_mass = match spec.geometry {
        Geometry::PushBox { mass, .. } | Geometry::DrawerSlide { mass, .. } => Some(mass),
        _ => None,
    };
    if let Some(mass) = slider_mass {
        // Exact Coulomb stick/slip for the held force.
        let rate = prev.object.travel_rate + dt * force / mass;
        let cap = dt * spec.friction_coefficient * GRAVITY;
        s.object.travel_rate = if rate.abs() <= cap { 0.0 } else { rate - cap * rate.signum() };
        s.object.travel = prev.object.travel + dt * s.object.travel_rate;
    }

    let p = s.pose.position;
    match spec.geometry {
        Geometry::DrawerSlide { handle, axis, .. } => {
            let h = handle + axis * s.object.travel;
            s.object.position = h;
            if !s.gripper_closed() {
                s.object.attached = false;
            } else if !s.object.attached && (h - p).norm() <= GRASP_RADIUS {
                s.object.attached = true;
            }
        }
        Geometry::PegInsert { .. } | Geometry::FragilePlace { .. } => {
            if !s.gripper_closed() {
                s.object.attached = false;
            } else if !s.object.attached && (s.object.position - p).norm() <= GRASP_RADIUS {
                s.object.attached = true;
            }
            if s.object.attached {
                s.object.position = p;
            } else {
                // A released object settles onto whatever is beneath it.
                let floor = match spec.geometry {
                    Geometry::PegInsert { hole, depth, .. } => hole.z - depth,
                    Geometry::FragilePlace { surface_z } => surface_z,
                    _ => unreachable!(),
                };
                s.object.position.z = s.object.position.z.max(floor);
            }
        }
        Geometry::PushBox { .. } => {}
    }
}

/// Whether the task's goal holds in `s`, including the end effector having
/// backed away where the task calls for it.
pub fn check_success(s: &WorldState, spec: &ScenarioSpec) -> bool {
    let goal = spec.target_region;
    let p = s.pose.position;
    match spec.geometry {
        Geometry::PushBox { face_x, .. } => {
            let face = face_x + s.object.travel;
            face >= goal.center.x - goal.tolerance && p.x <= face - WITHDRAW_CLEARANCE
        }
        Geometry::DrawerSlide { handle, axis, .. } => {
            s.object.travel >= (goal.center - handle).dot(axis) - goal.tolerance
        }
        Geometry::PegInsert { .. } | Geometry::FragilePlace { .. } => {
            !s.object.attached
                && (s.object.position - goal.center).norm() <= goal.tolerance
                && p.z >= s.object.position.z + WITHDRAW_CLEARANCE
        }
    }
}

/// Mechanical energy of the end effector and the static contact springs.
pub fn mechanical_energy(s: &WorldState, spec: &ScenarioSpec) -> f64 {
    let v = s.twist.linear;
    let mut e = 0.5 * spec.ee_mass * v.dot(v) + 0.5 * spec.ee_inertia * s.twist.angular.dot(s.twist.angular);
    if let Some((_, depth)) = static_contact(s.pose.position, spec) {
        if depth > 0.0 {
            e += 0.5 * spec.env_stiffness * depth * depth;
        }
    }
    e
}
