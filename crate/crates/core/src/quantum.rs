//! Quantum GREM and CREM pressures in a transversal field.
//!
//! The quantum GREM pressure is the best split of the hull into a classical
//! prefix `[0, y_K]` and a paramagnetic remainder,
//! `max_K Σ_{l≤K} φ_l(β) + (1 - y_K) p(β, 𝔟)`. The CREM version replaces the
//! prefix sum by the truncated pressure `Φ(β, z)` and maximizes over
//! `z ∈ [0, 1]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{
    density, freezing_boundary, partial_pressures, truncated_pressure_slope,
    truncated_pressure_unchecked,
};
use crate::error::{Error, Result};
use crate::model::{ln_2cosh, paramagnetic_pressure, ConcaveHull, Envelope, FieldSpec, Piece};
use crate::LN2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockPhase {
    Classical,
    Paramagnetic,
}

impl BlockPhase {
    pub fn symbol(self) -> char {
        match self {
            BlockPhase::Classical => 'C',
            BlockPhase::Paramagnetic => 'P',
        }
    }
}

/// Where the variational formula is maximized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Maximizer {
    /// Number `K` of classical hull segments (quantum GREM).
    Level(usize),
    /// Truncation point `z*` (quantum CREM).
    Fraction(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumPressureResult {
    pub value: f64,
    pub argmax: Maximizer,
    pub block_phases: Vec<BlockPhase>,
}

impl QuantumPressureResult {
    pub fn phase_string(&self) -> String {
        self.block_phases.iter().map(|p| p.symbol()).collect()
    }
}

/// Quantum GREM pressure for a field law.
pub fn qgrem_pressure(hull: &ConcaveHull, beta: f64, field: &FieldSpec) -> QuantumPressureResult {
    qgrem_pressure_with_paramagnet(hull, beta, paramagnetic_pressure(field, beta))
}

/// Quantum GREM pressure given the paramagnetic pressure `p`.
///
/// Maximizes over `K ∈ {0, ..., m}` hull support points; `K = 0` is the
/// pure paramagnet. Ties go to the smallest `K`.
pub fn qgrem_pressure_with_paramagnet(hull: &ConcaveHull, beta: f64, p: f64) -> QuantumPressureResult {
    let table = partial_pressures(hull, beta);
    let mut best = (p, 0usize);
    let mut prefix = 0.0;
    for (k, (entry, &y)) in table.entries.iter().zip(hull.support()).enumerate() {
        prefix += entry.phi;
        let value = prefix + (1.0 - y) * p;
        if value > best.0 {
            best = (value, k + 1);
        }
    }
    let block_phases = (0..table.len())
        .map(|l| {
            if l < best.1 {
                BlockPhase::Classical
            } else {
                BlockPhase::Paramagnetic
            }
        })
        .collect();
    QuantumPressureResult {
        value: best.0,
        argmax: Maximizer::Level(best.1),
        block_phases,
    }
}

/// Inverse of `Γ ↦ ln 2cosh(βΓ)` on `[0, ∞)`: the field at which the
/// paramagnetic pressure reaches `level` (clamped to `0` below `ln 2`).
pub fn critical_field(level: f64, beta: f64) -> f64 {
    // arcosh(e^d / 2) = d - ln 2 + ln(1 + sqrt(1 - 4 e^{-2d})), overflow-free
    let disc = (1.0 - 4.0 * (-2.0 * level).exp()).max(0.0);
    ((level - LN2 + disc.sqrt().ln_1p()) / beta).max(0.0)
}

/// Critical fields `Γ_c^(l) = β⁻¹ arcosh(½ exp(φ_l/L_l))`, one per hull
/// segment, strictly decreasing in `l`.
pub fn qgrem_critical_fields(hull: &ConcaveHull, beta: f64) -> Result<Vec<f64>> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!(
            "critical fields need beta > 0, got {beta}"
        )));
    }
    Ok(partial_pressures(hull, beta)
        .entries
        .iter()
        .map(|e| critical_field(e.density(), beta))
        .collect())
}

/// Quantum GREM pressure in the per-block indicator form
/// `Σ_l φ_l 1{Γ < Γ_c^(l)} + L_l ln 2cosh(βΓ) 1{Γ ≥ Γ_c^(l)}`.
///
/// Only defined for a constant field.
pub fn qgrem_indicator_pressure(hull: &ConcaveHull, beta: f64, field: &FieldSpec) -> Result<(f64, Vec<BlockPhase>)> {
    let gamma = field.constant_strength().ok_or_else(|| {
        Error::Invalid("critical fields are only defined for a constant field".into())
    })?;
    let critical = qgrem_critical_fields(hull, beta)?;
    let p = ln_2cosh(beta * gamma);
    let table = partial_pressures(hull, beta);
    let mut value = 0.0;
    let mut phases = Vec::with_capacity(critical.len());
    for (entry, gc) in table.entries.iter().zip(critical) {
        if gamma < gc {
            value += entry.phi;
            phases.push(BlockPhase::Classical);
        } else {
            value += entry.length * p;
            phases.push(BlockPhase::Paramagnetic);
        }
    }
    Ok((value, phases))
}

/// A piece of `[0, end]` on which `∂Φ/∂z` is continuous: a hull piece cut at
/// the freezing boundary `x(β)`.
#[derive(Debug, Clone, Copy)]
struct DensityStretch<'a> {
    piece: &'a Piece,
    lo: f64,
    hi: f64,
    frozen: bool,
}

fn density_stretches<E: Envelope + ?Sized>(env: &E, boundary: f64) -> Vec<DensityStretch<'_>> {
    let mut out = Vec::new();
    for piece in env.pieces() {
        if piece.start < boundary {
            out.push(DensityStretch {
                piece,
                lo: piece.start,
                hi: piece.end.min(boundary),
                frozen: true,
            });
        }
        if piece.end > boundary {
            out.push(DensityStretch {
                piece,
                lo: piece.start.max(boundary),
                hi: piece.end,
                frozen: false,
            });
        }
    }
    out
}

/// Slope `ā` at which the density equals `level` on a frozen/unfrozen stretch.
fn slope_for_density(beta: f64, level: f64, frozen: bool) -> f64 {
    if frozen {
        level * level / (2.0 * LN2 * beta * beta)
    } else {
        2.0 * (level - LN2) / (beta * beta)
    }
}

impl DensityStretch<'_> {
    fn density_lo(&self, beta: f64) -> f64 {
        density(beta, self.piece.slope_at(self.lo), self.frozen)
    }

    fn density_hi(&self, beta: f64) -> f64 {
        density(beta, self.piece.slope_at(self.hi), self.frozen)
    }

    /// Point inside the stretch where the density equals `level`, assuming
    /// `density_hi < level < density_lo`.
    fn crossing(&self, beta: f64, level: f64) -> f64 {
        let target = slope_for_density(beta, level, self.frozen);
        self.piece.position_of_slope(target).clamp(self.lo, self.hi)
    }
}

/// Quantum CREM pressure `sup_z Φ(β, z) + (1 - z) p(β, 𝔟)`.
///
/// The objective is concave in `z` with a piecewise-continuous derivative,
/// so the supremum sits at a piece boundary, at `x(β)`, or where the
/// derivative crosses `p` inside a piece. All such candidates are evaluated;
/// ties go to the smallest `z`.
pub fn qcrem_pressure<E: Envelope + ?Sized>(env: &E, beta: f64, field: &FieldSpec) -> QuantumPressureResult {
    qcrem_pressure_with_paramagnet(env, beta, paramagnetic_pressure(field, beta))
}

pub fn qcrem_pressure_with_paramagnet<E: Envelope + ?Sized>(env: &E, beta: f64, p: f64) -> QuantumPressureResult {
    let boundary = freezing_boundary(env, beta);
    let mut candidates = vec![0.0, boundary];
    for stretch in density_stretches(env, boundary) {
        candidates.push(stretch.hi);
        let (d_lo, d_hi) = (stretch.density_lo(beta), stretch.density_hi(beta));
        if d_hi < p && p < d_lo {
            candidates.push(stretch.crossing(beta, p));
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let mut best = (f64::NEG_INFINITY, 0.0);
    for z in candidates {
        let value = truncated_pressure_unchecked(env, beta, boundary, z) + (1.0 - z) * p;
        if value > best.0 {
            best = (value, z);
        }
    }
    let block_phases = env
        .pieces()
        .iter()
        .map(|piece| {
            if piece.end <= best.1 {
                BlockPhase::Classical
            } else {
                BlockPhase::Paramagnetic
            }
        })
        .collect();
    QuantumPressureResult {
        value: best.0,
        argmax: Maximizer::Fraction(best.1),
        block_phases,
    }
}

/// Boundary values `s(β) = ∂Φ/∂z|_{z=1}` and `t(β) = ∂Φ/∂z|_{z=0}`.
pub fn density_bounds<E: Envelope + ?Sized>(env: &E, beta: f64) -> (f64, f64) {
    (
        truncated_pressure_slope(env, beta, env.end()),
        truncated_pressure_slope(env, beta, 0.0),
    )
}

/// Generalized inverse `g_β(level)` of `z ↦ ∂Φ(β, z)/∂z`: the leftmost `z`
/// with `∂Φ/∂z ≤ level`.
pub fn density_inverse<E: Envelope + ?Sized>(env: &E, beta: f64, level: f64) -> f64 {
    let boundary = freezing_boundary(env, beta);
    for stretch in density_stretches(env, boundary) {
        if stretch.density_lo(beta) <= level {
            return stretch.lo;
        }
        if stretch.density_hi(beta) < level {
            return stretch.crossing(beta, level);
        }
    }
    env.end()
}

/// Three-branch closed form for a constant field `Γ`:
/// `Φ(β, 1)` if `p ≤ s(β)`, `p` if `p ≥ t(β)`, and
/// `Φ(β, g) + (1 - g) p` with `g = g_β(p)` in between.
pub fn qcrem_closed_form<E: Envelope + ?Sized>(env: &E, beta: f64, gamma: f64) -> f64 {
    let p = ln_2cosh(beta * gamma);
    let (s, t) = density_bounds(env, beta);
    let boundary = freezing_boundary(env, beta);
    if p <= s {
        truncated_pressure_unchecked(env, beta, boundary, env.end()) + (1.0 - env.end()) * p
    } else if p >= t {
        p
    } else {
        let g = density_inverse(env, beta, p);
        truncated_pressure_unchecked(env, beta, boundary, g) + (1.0 - g) * p
    }
}

/// Transversal magnetization `m_z = β⁻¹ ∂Φ(β, Γ)/∂Γ`:
/// `0`, `(1 - g_β(p)) tanh(βΓ)` or `tanh(βΓ)` by the same three branches.
pub fn magnetization<E: Envelope + ?Sized>(env: &E, beta: f64, gamma: f64) -> f64 {
    let p = ln_2cosh(beta * gamma);
    let (s, t) = density_bounds(env, beta);
    let th = (beta * gamma).tanh();
    if p <= s {
        0.0
    } else if p >= t {
        th
    } else {
        (1.0 - density_inverse(env, beta, p)) * th
    }
}

/// The two CREM magnetic critical fields `(Γ_c^(l), Γ_c^(r))` at which
/// `p(βΓ)` reaches `s(β)` and `t(β)`. `Γ_c^(l) = 0` when `ā(1) = 0`.
pub fn crem_critical_fields<E: Envelope + ?Sized>(env: &E, beta: f64) -> Result<(f64, f64)> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("critical fields need beta > 0, got {beta}")));
    }
    let (s, t) = density_bounds(env, beta);
    Ok((critical_field(s, beta), critical_field(t, beta)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionOrder {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub gamma: f64,
    pub order: TransitionOrder,
    /// `|m_z(Γ + h) - m_z(Γ - h)|` across the detection window.
    pub jump: f64,
    /// Jump of the one-sided difference quotients of `m_z`.
    pub slope_jump: f64,
}

/// Thresholds for [`transition_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    /// Width of the Γ-window straddling a candidate point.
    pub window: f64,
    /// A larger jump of `m_z` across the window is first order.
    pub jump_threshold: f64,
    /// A larger jump of `∂m_z/∂Γ` is second order.
    pub slope_threshold: f64,
    /// Step of the one-sided difference quotients.
    pub slope_step: f64,
    /// Points of the coarse Γ-grid used to catch jumps between candidates.
    pub grid_points: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            window: 1e-6,
            jump_threshold: 1e-3,
            slope_threshold: 1e-2,
            slope_step: 1e-4,
            grid_points: 512,
        }
    }
}

/// Locates and classifies the magnetic transitions at inverse temperature
/// `beta`, in increasing Γ.
///
/// Candidate fields are those where `p(βΓ)` meets a value of `∂Φ/∂z` at a
/// piece boundary (the only places where the branch structure of `m_z` can
/// change), refined by a coarse grid scan that bisects any remaining jump.
/// Each candidate is then classified by differencing `m_z` across
/// `config.window`.
pub fn transition_scan<E: Envelope + Sync + ?Sized>(env: &E, beta: f64, config: &ScanConfig) -> Result<Vec<Transition>> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("transition scan needs beta > 0, got {beta}")));
    }
    let boundary = freezing_boundary(env, beta);
    let mut levels: Vec<f64> = density_stretches(env, boundary)
        .iter()
        .flat_map(|s| [s.density_lo(beta), s.density_hi(beta)])
        .collect();
    let (s, t) = density_bounds(env, beta);
    levels.extend([s, t]);
    let mut candidates: Vec<f64> = levels
        .into_iter()
        .map(|d| critical_field(d, beta))
        .filter(|g| *g > config.window)
        .collect();

    let mz = |g: f64| magnetization(env, beta, g);
    let top = critical_field(t, beta);
    let gamma_max = 1.25 * top + 0.1;
    let n = config.grid_points.max(2);
    let grid: Vec<f64> = (0..n).map(|i| gamma_max * (i + 1) as f64 / n as f64).collect();
    let values: Vec<f64> = grid.par_iter().map(|&g| mz(g)).collect();
    for i in 1..n {
        if (values[i] - values[i - 1]).abs() <= config.jump_threshold {
            continue;
        }
        let (mut lo, mut hi) = (grid[i - 1], grid[i]);
        if candidates.iter().any(|c| lo <= *c && *c <= hi) {
            continue;
        }
        let (m_lo, m_hi) = (values[i - 1], values[i]);
        while hi - lo > 0.25 * config.window {
            let mid = 0.5 * (lo + hi);
            let m_mid = mz(mid);
            if (m_mid - m_lo).abs() > (m_hi - m_mid).abs() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        candidates.push(0.5 * (lo + hi));
    }

    candidates.sort_by(f64::total_cmp);
    candidates.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));

    let h = 0.5 * config.window;
    let d = config.slope_step;
    let mut out: Vec<Transition> = candidates
        .par_iter()
        .filter_map(|&g| {
            let (left, right) = (mz(g - h), mz(g + h));
            let jump = (right - left).abs();
            let slope_left = (left - mz(g - h - d)) / d;
            let slope_right = (mz(g + h + d) - right) / d;
            let slope_jump = (slope_right - slope_left).abs();
            let order = if jump > config.jump_threshold {
                TransitionOrder::First
            } else if slope_jump > config.slope_threshold {
                TransitionOrder::Second
            } else {
                return None;
            };
            Some(Transition {
                gamma: g,
                order,
                jump,
                slope_jump,
            })
        })
        .collect();
    out.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    Ok(out)
}
