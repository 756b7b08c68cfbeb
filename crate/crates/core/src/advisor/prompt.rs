//! Prompt rendering. Templates live in `prompts/` and are compiled in.

use crate::types::{ImpedanceRange, Vec3};

use super::AdvisorContext;

pub const PHASE_TEMPLATE: &str = include_str!("../../prompts/phase_v1.txt");
pub const IMPEDANCE_TEMPLATE: &str = include_str!("../../prompts/impedance_v1.txt");

/// System message sent ahead of either prompt.
pub const SYSTEM_MESSAGE: &str =
    "You assist a torque-controlled robot arm. Answer with the requested output line and nothing else.";

/// `[a, b, c]` with two decimals.
pub fn format_vec(v: Vec3) -> String {
    format!("[{:.2}, {:.2}, {:.2}]", v.x, v.y, v.z)
}

fn format_range(r: &ImpedanceRange) -> String {
    if r.k_min.x == r.k_min.y && r.k_min.y == r.k_min.z && r.k_max.x == r.k_max.y && r.k_max.y == r.k_max.z {
        format!("K_i in [{}, {}] N/m on every axis", r.k_min.x, r.k_max.x)
    } else {
        format!(
            "K_x in [{}, {}], K_y in [{}, {}], K_z in [{}, {}] N/m",
            r.k_min.x, r.k_max.x, r.k_min.y, r.k_max.y, r.k_min.z, r.k_max.z
        )
    }
}

fn render(template: &str, pairs: &[(&str, String)]) -> String {
    let mut out = template.to_owned();
    for (key, value) in pairs {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

pub fn build_phase_prompt(ctx: &AdvisorContext) -> String {
    render(
        PHASE_TEMPLATE,
        &[
            ("task", ctx.task.instruction.clone()),
            ("force", format_vec(ctx.wrench.force)),
            ("torque", format_vec(ctx.wrench.torque)),
        ],
    )
}

pub fn build_impedance_prompt(ctx: &AdvisorContext) -> String {
    let pct = |f: f64| format!("{}", (f * 100.0).round());
    render(
        IMPEDANCE_TEMPLATE,
        &[
            ("task", ctx.task.instruction.clone()),
            ("phase", ctx.phase.label().to_owned()),
            ("axis", ctx.task.primary_motion_axis.to_string()),
            ("velocity", format_vec(ctx.velocity.linear)),
            ("force", format_vec(ctx.wrench.force)),
            ("range", format_range(&ctx.range)),
            ("damping_min", pct(ctx.range.damping_fraction_min)),
            ("damping_max", pct(ctx.range.damping_fraction_max)),
        ],
    )
}
