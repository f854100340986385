//! Classical GREM/CREM pressures.
//!
//! Step envelopes go through the partial pressures
//! `φ_l(β) = β²ā_l/2 + L_l ln 2` below the freezing temperature
//! `β_l = sqrt(2 ln 2 / γ_l)` and `φ_l(β) = β sqrt(2 ln 2 ā_l L_l)` above it.
//! General envelopes go through the truncated pressure `Φ(β, z)`, which is
//! integrated piece by piece in closed form.

use crate::error::{Error, Result};
use crate::model::{ConcaveHull, Envelope};
use crate::LN2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialPressure {
    /// `φ_l(β)`.
    pub phi: f64,
    /// `β_l`; infinite for a flat segment.
    pub freezing_beta: f64,
    /// `β > β_l`.
    pub frozen: bool,
    /// `L_l`.
    pub length: f64,
}

impl PartialPressure {
    /// `φ_l / L_l`, the pressure per spin of block `l`.
    pub fn density(&self) -> f64 {
        self.phi / self.length
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialPressureTable {
    pub beta: f64,
    pub entries: Vec<PartialPressure>,
}

impl PartialPressureTable {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.phi).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Freezing inverse temperature `sqrt(2 ln 2 / γ)`.
pub fn freezing_beta(slope: f64) -> f64 {
    if slope > 0.0 {
        (2.0 * LN2 / slope).sqrt()
    } else {
        f64::INFINITY
    }
}

/// Partial pressures of every hull segment. Valid for unnormalized hulls.
pub fn partial_pressures(hull: &ConcaveHull, beta: f64) -> PartialPressureTable {
    debug_assert!(beta >= 0.0);
    let entries = hull
        .increments()
        .iter()
        .zip(hull.lengths())
        .map(|(&inc, len)| {
            let freezing_beta = freezing_beta(inc / len);
            let frozen = beta > freezing_beta;
            let phi = if frozen {
                beta * (2.0 * LN2 * inc * len).sqrt()
            } else {
                0.5 * beta * beta * inc + len * LN2
            };
            PartialPressure {
                phi,
                freezing_beta,
                frozen,
                length: len,
            }
        })
        .collect();
    PartialPressureTable { beta, entries }
}

/// Limiting classical GREM pressure `Σ_l φ_l(β)`.
pub fn classical_pressure(hull: &ConcaveHull, beta: f64) -> f64 {
    partial_pressures(hull, beta).total()
}

/// `x(β) = sup{x | ā(x) > 2 ln 2 / β²}`; `0` when nothing is frozen and by
/// convention at `β = 0`. Equality `ā = 2 ln 2/β²` counts as unfrozen.
pub fn freezing_boundary<E: Envelope + ?Sized>(env: &E, beta: f64) -> f64 {
    if !(beta > 0.0) {
        return 0.0;
    }
    let threshold = 2.0 * LN2 / (beta * beta);
    let mut boundary = 0.0;
    for p in env.pieces() {
        if p.slope_start <= threshold {
            return p.start;
        }
        if p.slope_end > threshold {
            boundary = p.end;
            continue;
        }
        return p.position_of_slope(threshold);
    }
    boundary
}

/// The truncated CREM pressure
/// `Φ(β, z) = sqrt(2 ln 2) β ∫_0^{min(x(β), z)} sqrt(ā) + 1_{z > x(β)} (β²/2 (Ā(z) - Ā(x(β))) + ln 2 (z - x(β)))`.
pub fn crem_truncated_pressure<E: Envelope + ?Sized>(env: &E, beta: f64, z: f64) -> Result<f64> {
    if !(0.0..=env.end()).contains(&z) {
        return Err(Error::Domain(format!("truncation z = {z} outside [0, {}]", env.end())));
    }
    Ok(truncated_pressure_unchecked(env, beta, freezing_boundary(env, beta), z))
}

pub(crate) fn truncated_pressure_unchecked<E: Envelope + ?Sized>(
    env: &E,
    beta: f64,
    boundary: f64,
    z: f64,
) -> f64 {
    let frozen_coeff = (2.0 * LN2).sqrt() * beta;
    let mut total = 0.0;
    for p in env.pieces() {
        if p.start >= z {
            break;
        }
        let hi = p.end.min(z);
        if p.start < boundary {
            total += frozen_coeff * p.sqrt_integral_to(hi.min(boundary));
        }
        if hi > boundary {
            let lo = p.start.max(boundary);
            total += 0.5 * beta * beta * (p.increment_to(hi) - p.increment_to(lo)) + LN2 * (hi - lo);
        }
    }
    total
}

/// `∂Φ(β, z)/∂z`: the right derivative for `z < end`, the left limit at
/// `z = end`.
pub fn truncated_pressure_slope<E: Envelope + ?Sized>(env: &E, beta: f64, z: f64) -> f64 {
    let boundary = freezing_boundary(env, beta);
    let pieces = env.pieces();
    let (slope, frozen) = if z >= env.end() {
        let last = pieces.last().expect("envelope has pieces");
        (last.slope_end, boundary >= env.end() && beta > 0.0)
    } else {
        (env.piece_at(z).slope_at(z), z < boundary)
    };
    density(beta, slope, frozen)
}

/// Integrand of `Φ(β, ·)` at a point with right derivative `slope`.
pub(crate) fn density(beta: f64, slope: f64, frozen: bool) -> f64 {
    if frozen {
        beta * (2.0 * LN2 * slope).sqrt()
    } else {
        LN2 + 0.5 * beta * beta * slope
    }
}
