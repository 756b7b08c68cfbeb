//! Gain formulas and the Cartesian spring-damper control law.
//!
//! Orientation gains follow `k_o = eps * k`, `d_o = 2 * zeta_o * sqrt(k_o)`.
//! The force-regulated translational gains are `k_final = k_advised * alpha` and
//! `d_final = 2 * zeta * sqrt(k_final * m_eff)`, evaluated per axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ImpedanceParams, Vec3, Wrench};

/// Lower end of the admissible force-scaling factor.
pub const ALPHA_FLOOR: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainConstants {
    /// Orientation-to-translation stiffness ratio.
    pub epsilon: f64,
    pub zeta_orientation: f64,
    pub zeta_damping: f64,
    /// Effective translational mass per axis (kg).
    pub m_eff: Vec3,
}

impl Default for GainConstants {
    fn default() -> Self {
        Self { epsilon: 0.15, zeta_orientation: 0.707, zeta_damping: 0.7, m_eff: Vec3::splat(1.0) }
    }
}

impl GainConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon > 0.0
            && self.zeta_orientation > 0.0
            && self.zeta_damping > 0.0
            && self.m_eff.all(|m| m > 0.0 && m.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("gain constants must be positive: {self:?}")))
        }
    }
}

fn check_stiffness(k: Vec3, what: &str) -> Result<()> {
    if k.all(|v| v >= 0.0 && v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be finite and non-negative, got {:?}", k.to_array())))
    }
}

/// Orientation stiffness and damping derived from translational stiffness.
pub fn orientation_gains(k: Vec3, c: &GainConstants) -> Result<(Vec3, Vec3)> {
    check_stiffness(k, "stiffness")?;
    let k_o = k * c.epsilon;
    let d_o = k_o.map(|v| 2.0 * c.zeta_orientation * v.sqrt());
    Ok((k_o, d_o))
}

/// Scales advised stiffness by the force factor; `alpha` must lie in `[0.2, 1]`.
pub fn apply_force_scaling(k_advised: Vec3, alpha: f64) -> Result<Vec3> {
    apply_force_scaling_with_floor(k_advised, alpha, ALPHA_FLOOR)
}

/// Same as [`apply_force_scaling`] with a configurable lower bound.
pub fn apply_force_scaling_with_floor(k_advised: Vec3, alpha: f64, floor: f64) -> Result<Vec3> {
    if !(alpha >= floor && alpha <= 1.0) {
        return Err(Error::Contract(format!("alpha {alpha} outside [{floor}, 1]")));
    }
    check_stiffness(k_advised, "advised stiffness")?;
    Ok(k_advised * alpha)
}

pub fn critical_damping(k_final: Vec3, c: &GainConstants) -> Result<Vec3> {
    check_stiffness(k_final, "stiffness")?;
    if !c.m_eff.all(|m| m > 0.0) {
        return Err(Error::Domain("effective mass must be positive".into()));
    }
    Ok(k_final.zip_map(c.m_eff, |k, m| 2.0 * (k * m).sqrt() * c.zeta_damping))
}

/// Full parameter set from translational stiffness: critical damping plus orientation gains.
pub fn derive_params(k: Vec3, c: &GainConstants) -> Result<ImpedanceParams> {
    let d = critical_damping(k, c)?;
    let (k_o, d_o) = orientation_gains(k, c)?;
    Ok(ImpedanceParams { k, d, k_o, d_o })
}

/// Spring-damper wrench for the given pose error `(translation, rotation vector)` and
/// twist error `(linear, angular)`.
pub fn control_wrench(p: &ImpedanceParams, pose_err: (Vec3, Vec3), twist_err: (Vec3, Vec3)) -> Wrench {
    Wrench {
        force: p.k.hadamard(pose_err.0) + p.d.hadamard(twist_err.0),
        torque: p.k_o.hadamard(pose_err.1) + p.d_o.hadamard(twist_err.1),
    }
}
