use crate::types::{Axis, ContactPhase};

use super::parse::clamp_to_range;
use super::{Advice, AdviceSource, AdvisorContext};

/// Stiffness factor on the primary motion axis outside free motion.
pub const PRIMARY_AXIS_FACTOR: f64 = 0.7;
/// Stiffness factor on the perpendicular axes outside free motion.
pub const CONSTRAINT_AXIS_FACTOR: f64 = 1.2;
pub const DAMPING_FRACTION: f64 = 0.15;

/// Deterministic stand-in for a model: phase hierarchy plus motion-direction anisotropy.
pub fn heuristic_advise(ctx: &AdvisorContext) -> Advice {
    let r = &ctx.range;
    let base = match ctx.phase {
        ContactPhase::FreeMotion => r.k_max,
        ContactPhase::Approaching | ContactPhase::Retreat => (r.k_min + r.k_max) * 0.5,
        ContactPhase::Contact => r.k_min + (r.k_max - r.k_min) * 0.1,
    };
    let mut k = base;
    // Retreat shares the approach anisotropy so the two medium phases have equal mean stiffness.
    if ctx.phase != ContactPhase::FreeMotion {
        for a in Axis::ALL {
            k[a] *= if a == ctx.task.primary_motion_axis {
                PRIMARY_AXIS_FACTOR
            } else {
                CONSTRAINT_AXIS_FACTOR
            };
        }
    }
    let (k, d) = clamp_to_range(k, k * DAMPING_FRACTION, r);
    Advice {
        k,
        d,
        phase_claim: None,
        source: AdviceSource::Heuristic,
        latency: 0.0,
        raw_text: None,
        fallback: false,
    }
}
