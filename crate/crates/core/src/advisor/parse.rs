//! Extraction of impedance triples and phase labels from free-form model replies.
//!
//! Contract for impedance replies:
//! - The first `K = [a, b, c]` whose three entries all parse as numbers is used.
//!   Bracket groups holding placeholders (e.g. an echoed `K = [K_x, K_y, K_z]`) are skipped.
//! - A numeric triple containing `nan` or `inf` is rejected outright.
//! - `D = [...]` is read the same way. When absent, damping defaults to the middle
//!   of the allowed fraction band.
//! - Values are then clamped with [`clamp_to_range`]; nothing leaves unclamped.

use std::sync::LazyLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::types::{Axis, ContactPhase, ImpedanceRange, Vec3};

use super::{Advice, AdviceSource};

static K_TRIPLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bK(?:_p)?\s*[:=]\s*\[([^\]\[]*)\]").unwrap());
static D_TRIPLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bD(?:_p)?\s*[:=]\s*\[([^\]\[]*)\]").unwrap());
static PHASE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)free[\s_\-]?motion|approaching|contact|retreat").unwrap()
});

enum Triple {
    Finite(Vec3),
    NonFinite,
    NotNumeric,
}

fn read_triple(body: &str) -> Triple {
    let parts: Vec<&str> = body.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Triple::NotNumeric;
    }
    let mut out = [0.0; 3];
    for (slot, p) in out.iter_mut().zip(&parts) {
        let p = p.trim_matches(|c| c == '*' || c == '`');
        match p.parse::<f64>() {
            Ok(v) => *slot = v,
            Err(_) => return Triple::NotNumeric,
        }
    }
    if out.iter().all(|v| v.is_finite()) {
        Triple::Finite(Vec3::from(out))
    } else {
        Triple::NonFinite
    }
}

fn first_triple(re: &Regex, text: &str, name: &str) -> Result<Option<Vec3>> {
    for cap in re.captures_iter(text) {
        match read_triple(&cap[1]) {
            Triple::Finite(v) => return Ok(Some(v)),
            Triple::NonFinite => {
                return Err(Error::Parse(format!("{name} triple has non-finite values: [{}]", &cap[1])))
            }
            Triple::NotNumeric => continue,
        }
    }
    Ok(None)
}

/// Clamps stiffness into the range, then damping into the fraction band of the
/// clamped stiffness. When a stiffness component had to move, its damping keeps
/// the original damping-to-stiffness ratio before the band is applied.
pub fn clamp_to_range(k: Vec3, d: Vec3, range: &ImpedanceRange) -> (Vec3, Vec3) {
    let (fmin, fmax) = (range.damping_fraction_min, range.damping_fraction_max);
    let mut kc = k;
    let mut dc = d;
    for a in Axis::ALL {
        let clamped = k[a].clamp(range.k_min[a], range.k_max[a]);
        kc[a] = clamped;
        let dv = if clamped == k[a] {
            d[a]
        } else if k[a] > 0.0 {
            d[a] / k[a] * clamped
        } else {
            d[a]
        };
        dc[a] = dv.clamp(fmin * clamped, fmax * clamped);
    }
    (kc, dc)
}

pub fn parse_impedance_response(text: &str, range: &ImpedanceRange) -> Result<Advice> {
    let k = first_triple(&K_TRIPLE, text, "K")?
        .ok_or_else(|| Error::Parse("no K = [kx, ky, kz] triple in response".into()))?;
    let mid = 0.5 * (range.damping_fraction_min + range.damping_fraction_max);
    let d = first_triple(&D_TRIPLE, text, "D")?.unwrap_or(k * mid);
    let (k, d) = clamp_to_range(k, d, range);
    Ok(Advice {
        k,
        d,
        phase_claim: None,
        source: AdviceSource::Remote,
        latency: 0.0,
        raw_text: Some(text.to_owned()),
        fallback: false,
    })
}

/// First phase name in the text, case-insensitive; `free_motion`, `free-motion`,
/// `free motion` and `freemotion` all name the same phase.
pub fn parse_phase_response(text: &str) -> Result<ContactPhase> {
    let m = PHASE
        .find(text)
        .ok_or_else(|| Error::Parse(format!("no contact phase named in `{}`", text.trim())))?;
    let s = m.as_str().to_ascii_lowercase();
    Ok(if s.starts_with("free") {
        ContactPhase::FreeMotion
    } else if s == "approaching" {
        ContactPhase::Approaching
    } else if s == "contact" {
        ContactPhase::Contact
    } else {
        ContactPhase::Retreat
    })
}

/// Renders parameters in the reply syntax, exactly round-trippable by the parser.
pub fn format_impedance(k: Vec3, d: Vec3) -> String {
    format!("K = [{}, {}, {}], D = [{}, {}, {}]", k.x, k.y, k.z, d.x, d.y, d.z)
}
