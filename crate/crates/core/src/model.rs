//! Distribution functions, concave envelopes and transversal field laws.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance on the normalization `A(1) = 1` and on discrete probabilities.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    /// GREM: `A` jumps by `a_k` at `x_k` and is constant in between.
    Step,
    /// CREM profile sampled at breakpoints, linear in between.
    PiecewiseLinear,
}

/// A nondecreasing distribution function `A` on `[0, 1]` given by its values
/// at the breakpoints `0 < x_1 < ... < x_n`.
///
/// `A(0) = 0` is implicit. Normalized specs end at `x_n = 1` with `A(1) = 1`.
/// Unnormalized specs (reduced models) may have total weight below one and
/// may end before `1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    kind: DistributionKind,
    points: Vec<(f64, f64)>,
    normalized: bool,
}

impl DistributionSpec {
    /// GREM step function with jumps `jumps[k]` at `x[k]`.
    pub fn step(x: &[f64], jumps: &[f64]) -> Result<Self> {
        Self::from_jumps(x, jumps, true)
    }

    /// Step function whose jumps may sum to less than one and whose last
    /// breakpoint may lie below one.
    pub fn step_unnormalized(x: &[f64], jumps: &[f64]) -> Result<Self> {
        Self::from_jumps(x, jumps, false)
    }

    /// Piecewise-linear profile through `(x[k], values[k])` and `(0, 0)`.
    pub fn piecewise_linear(x: &[f64], values: &[f64]) -> Result<Self> {
        if x.len() != values.len() {
            return Err(invalid("breakpoints and values differ in length"));
        }
        let spec = Self {
            kind: DistributionKind::PiecewiseLinear,
            points: x.iter().copied().zip(values.iter().copied()).collect(),
            normalized: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The random energy model: a single jump of height one at `x = 1`.
    pub fn rem() -> Self {
        Self {
            kind: DistributionKind::Step,
            points: vec![(1.0, 1.0)],
            normalized: true,
        }
    }

    fn from_jumps(x: &[f64], jumps: &[f64], normalized: bool) -> Result<Self> {
        if x.len() != jumps.len() {
            return Err(invalid("breakpoints and jumps differ in length"));
        }
        if let Some(a) = jumps.iter().find(|a| !(**a >= 0.0) || !a.is_finite()) {
            return Err(invalid(format!("negative or non-finite jump height {a}")));
        }
        let mut acc = 0.0;
        let points = x
            .iter()
            .zip(jumps)
            .map(|(&xk, &ak)| {
                acc += ak;
                (xk, acc)
            })
            .collect();
        let spec = Self {
            kind: DistributionKind::Step,
            points,
            normalized,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(invalid("distribution function needs at least one breakpoint"));
        }
        let mut prev = (0.0, 0.0);
        for &(x, v) in &self.points {
            if !x.is_finite() || !v.is_finite() {
                return Err(invalid("non-finite breakpoint"));
            }
            if x <= prev.0 {
                return Err(invalid(format!(
                    "breakpoints must be strictly increasing in (0, 1], got {x} after {}",
                    prev.0
                )));
            }
            if v < prev.1 {
                return Err(invalid(format!(
                    "distribution function decreases at x = {x} ({v} < {})",
                    prev.1
                )));
            }
            prev = (x, v);
        }
        let (x_end, total) = prev;
        if x_end > 1.0 + NORMALIZATION_TOL {
            return Err(invalid(format!("last breakpoint {x_end} exceeds 1")));
        }
        if self.normalized {
            if (x_end - 1.0).abs() > NORMALIZATION_TOL {
                return Err(invalid(format!("last breakpoint is {x_end}, expected 1")));
            }
            if (total - 1.0).abs() > NORMALIZATION_TOL {
                return Err(invalid(format!("A(1) = {total}, expected 1")));
            }
        } else if total > 1.0 + NORMALIZATION_TOL {
            return Err(invalid(format!("total weight {total} exceeds 1")));
        }
        Ok(())
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    /// Jump heights `a_k = A(x_k) - A(x_{k-1})`.
    pub fn jumps(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.points
            .iter()
            .map(|&(_, v)| {
                let a = v - prev;
                prev = v;
                a
            })
            .collect()
    }

    /// Right end of the domain (`1` for normalized specs).
    pub fn end(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.0)
    }

    /// `A(end)`.
    pub fn total(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.1)
    }

    /// Evaluates `A(x)`; right-continuous for step functions.
    pub fn value_at(&self, x: f64) -> f64 {
        match self.kind {
            DistributionKind::Step => self
                .points
                .iter()
                .take_while(|p| p.0 <= x)
                .last()
                .map_or(0.0, |p| p.1),
            DistributionKind::PiecewiseLinear => {
                let mut prev = (0.0, 0.0);
                for &(xk, vk) in &self.points {
                    if x <= xk {
                        let t = (x - prev.0) / (xk - prev.0);
                        return prev.1 + t.max(0.0) * (vk - prev.1);
                    }
                    prev = (xk, vk);
                }
                prev.1
            }
        }
    }

    /// The step representation at resolution `n`: jumps at `i/n` of height
    /// `A(i/n) - A((i-1)/n)`. Step specs are returned unchanged.
    pub fn step_representation(&self, n: usize) -> Result<Self> {
        match self.kind {
            DistributionKind::Step => Ok(self.clone()),
            DistributionKind::PiecewiseLinear => {
                if n == 0 {
                    return Err(invalid("resolution must be positive"));
                }
                let x: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
                let mut prev = 0.0;
                let jumps: Vec<f64> = x
                    .iter()
                    .map(|&xi| {
                        let v = self.value_at(xi);
                        let a = (v - prev).max(0.0);
                        prev = v;
                        a
                    })
                    .collect();
                let mut spec = Self::from_jumps(&x, &jumps, false)?;
                spec.normalized = self.normalized;
                spec.validate()?;
                Ok(spec)
            }
        }
    }
}

/// One linear stretch of a right derivative `ā`, from `start` to `end`,
/// with value `slope_start` at the left end and `slope_end` as left limit at
/// the right end. Step envelopes have `slope_start == slope_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub slope_start: f64,
    pub slope_end: f64,
}

impl Piece {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_flat(&self) -> bool {
        self.slope_start == self.slope_end
    }

    /// `ā` at `x` inside the piece.
    pub fn slope_at(&self, x: f64) -> f64 {
        if self.is_flat() {
            return self.slope_start;
        }
        let t = ((x - self.start) / self.len()).clamp(0.0, 1.0);
        self.slope_start + t * (self.slope_end - self.slope_start)
    }

    /// `∫_start^x ā`.
    pub fn increment_to(&self, x: f64) -> f64 {
        let w = (x - self.start).clamp(0.0, self.len());
        0.5 * w * (self.slope_start + self.slope_at(self.start + w))
    }

    /// `∫_start^x sqrt(ā)`, closed form for a linear `ā`.
    pub fn sqrt_integral_to(&self, x: f64) -> f64 {
        let w = (x - self.start).clamp(0.0, self.len());
        let a0 = self.slope_start.max(0.0);
        let a1 = self.slope_at(self.start + w).max(0.0);
        let (r0, r1) = (a0.sqrt(), a1.sqrt());
        if r0 + r1 == 0.0 {
            return 0.0;
        }
        // (2/3) w (a1^{3/2} - a0^{3/2}) / (a1 - a0), rewritten without cancellation.
        2.0 / 3.0 * w * (a0 + r0 * r1 + a1) / (r0 + r1)
    }

    /// Leftmost `x` in the piece with `ā(x) = target`, for
    /// `slope_end <= target <= slope_start`.
    pub fn position_of_slope(&self, target: f64) -> f64 {
        if self.is_flat() || target >= self.slope_start {
            return self.start;
        }
        let t = (self.slope_start - target) / (self.slope_start - self.slope_end);
        self.start + t.clamp(0.0, 1.0) * self.len()
    }
}

/// A concave envelope described through its right derivative.
pub trait Envelope {
    /// Pieces covering `[0, end]` in order.
    fn pieces(&self) -> &[Piece];

    fn end(&self) -> f64 {
        self.pieces().last().map_or(0.0, |p| p.end)
    }

    /// `Ā(end)`.
    fn total(&self) -> f64 {
        self.pieces().iter().map(|p| p.increment_to(p.end)).sum()
    }

    /// `Ā(y)` for `y` in `[0, end]`.
    fn envelope_at(&self, y: f64) -> f64 {
        self.pieces()
            .iter()
            .take_while(|p| p.start < y)
            .map(|p| p.increment_to(y.min(p.end)))
            .sum()
    }

    /// The piece holding `x` under right-derivative semantics; the last
    /// piece for `x = end`.
    fn piece_at(&self, x: f64) -> &Piece {
        let pieces = self.pieces();
        let idx = pieces.partition_point(|p| p.end <= x);
        &pieces[idx.min(pieces.len() - 1)]
    }
}

/// Upper concave envelope `Ā` of a step or piecewise-linear `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveHull {
    support: Vec<f64>,
    increments: Vec<f64>,
    pieces: Vec<Piece>,
}

/// Computes the concave hull of `spec`: the upper envelope of `(0, 0)` and
/// the breakpoints `(x_k, A(x_k))`. Collinear breakpoints are dropped, so
/// hull slopes are strictly decreasing.
pub fn concave_hull(spec: &DistributionSpec) -> Result<ConcaveHull> {
    spec.validate()?;
    ConcaveHull::from_points(spec.points())
}

impl ConcaveHull {
    /// Upper hull of `(0, 0)` and `points` (strictly increasing abscissae in
    /// `(0, 1]`, nondecreasing ordinates), via a monotone chain.
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("hull needs at least one point"));
        }
        let mut stack: Vec<(f64, f64)> = vec![(0.0, 0.0)];
        let mut prev = (0.0, 0.0);
        for &p in points {
            if p.0 <= prev.0 || p.1 < prev.1 || !p.0.is_finite() || !p.1.is_finite() {
                return Err(invalid("hull points must be increasing in x and nondecreasing in A"));
            }
            prev = p;
            while stack.len() >= 2 {
                let a = stack[stack.len() - 2];
                let b = stack[stack.len() - 1];
                let lhs = (b.0 - a.0) * (p.1 - a.1);
                let rhs = (p.0 - a.0) * (b.1 - a.1);
                // pop b unless it lies strictly above the chord a -> p
                if lhs - rhs >= -1e-13 * (lhs.abs() + rhs.abs()) {
                    stack.pop();
                } else {
                    break;
                }
            }
            stack.push(p);
        }
        let support: Vec<f64> = stack[1..].iter().map(|p| p.0).collect();
        let increments: Vec<f64> = stack.windows(2).map(|w| w[1].1 - w[0].1).collect();
        let pieces = stack
            .windows(2)
            .map(|w| {
                let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                Piece {
                    start: w[0].0,
                    end: w[1].0,
                    slope_start: slope,
                    slope_end: slope,
                }
            })
            .collect();
        Ok(Self {
            support,
            increments,
            pieces,
        })
    }

    /// Support points `y_1 < ... < y_m` (`y_0 = 0` implicit).
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    /// Increments `ā_l = Ā(y_l) - Ā(y_{l-1})`.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Segment lengths `L_l = y_l - y_{l-1}`.
    pub fn lengths(&self) -> Vec<f64> {
        self.pieces.iter().map(Piece::len).collect()
    }

    /// Segment slopes `γ_l = ā_l / L_l`, strictly decreasing.
    pub fn slopes(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.slope_start).collect()
    }

    pub fn num_segments(&self) -> usize {
        self.support.len()
    }

    /// `Ā(y)`.
    pub fn value_at(&self, y: f64) -> f64 {
        self.envelope_at(y)
    }
}

impl Envelope for ConcaveHull {
    fn pieces(&self) -> &[Piece] {
        &self.pieces
    }
}

/// Right derivative `ā(x)` of a concave envelope, for `0 <= x < end`.
pub fn right_derivative<E: Envelope + ?Sized>(hull: &E, x: f64) -> Result<f64> {
    if !(0.0..hull.end()).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0, {})", hull.end())));
    }
    Ok(hull.piece_at(x).slope_at(x))
}

/// A continuously differentiable concave envelope whose right derivative is
/// interpolated linearly between knots.
///
/// This is how smooth CREM profiles enter the CREM formulas; with a linear
/// `ā` (such as `Ā(x) = 2x - x²`) the representation is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothEnvelope {
    pieces: Vec<Piece>,
}

impl SmoothEnvelope {
    /// `knots` run from `0` to the domain end; `slopes[k] = ā(knots[k])`
    /// must be nonnegative and nonincreasing.
    pub fn from_derivative(knots: &[f64], slopes: &[f64]) -> Result<Self> {
        if knots.len() != slopes.len() || knots.len() < 2 {
            return Err(invalid("need at least two knots with one slope each"));
        }
        if knots[0] != 0.0 || *knots.last().unwrap() > 1.0 + NORMALIZATION_TOL {
            return Err(invalid("knots must start at 0 and end at most at 1"));
        }
        for w in knots.windows(2) {
            if !(w[1] > w[0]) {
                return Err(invalid("knots must be strictly increasing"));
            }
        }
        for w in slopes.windows(2) {
            if !(w[1] <= w[0]) {
                return Err(invalid("derivative samples must be nonincreasing"));
            }
        }
        if slopes.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(invalid("derivative samples must be finite and nonnegative"));
        }
        let pieces = knots
            .windows(2)
            .zip(slopes.windows(2))
            .map(|(k, s)| Piece {
                start: k[0],
                end: k[1],
                slope_start: s[0],
                slope_end: s[1],
            })
            .collect();
        Ok(Self { pieces })
    }

    /// Samples `ā` on a uniform grid of `segments` pieces over `[0, 1]`.
    pub fn sample<F: Fn(f64) -> f64>(derivative: F, segments: usize) -> Result<Self> {
        if segments == 0 {
            return Err(invalid("need at least one segment"));
        }
        let knots: Vec<f64> = (0..=segments).map(|i| i as f64 / segments as f64).collect();
        let slopes: Vec<f64> = knots.iter().map(|&x| derivative(x)).collect();
        Self::from_derivative(&knots, &slopes)
    }

    pub fn knots(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.pieces.iter().map(|p| p.end)).collect()
    }
}

impl Envelope for SmoothEnvelope {
    fn pieces(&self) -> &[Piece] {
        &self.pieces
    }
}

/// Law of the transversal field weights `b_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldLaw {
    Constant(f64),
    /// `(value, probability)` atoms.
    Discrete(Vec<(f64, f64)>),
    Gaussian { mean: f64, std_dev: f64 },
    /// Uniform law on a finite sample.
    Empirical(Vec<f64>),
}

/// A validated transversal field law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldLaw", into = "FieldLaw")]
pub struct FieldSpec {
    law: FieldLaw,
}

impl TryFrom<FieldLaw> for FieldSpec {
    type Error = Error;

    fn try_from(law: FieldLaw) -> Result<Self> {
        match &law {
            FieldLaw::Constant(g) => {
                if !(g.is_finite() && *g >= 0.0) {
                    return Err(invalid(format!("field strength {g} must be finite and >= 0")));
                }
            }
            FieldLaw::Discrete(atoms) => {
                if atoms.is_empty() {
                    return Err(invalid("discrete field law has no atoms"));
                }
                if atoms
                    .iter()
                    .any(|(v, p)| !v.is_finite() || !p.is_finite() || *p < 0.0)
                {
                    return Err(invalid("discrete atoms need finite values and probabilities >= 0"));
                }
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                if (total - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(invalid(format!("discrete probabilities sum to {total}")));
                }
            }
            FieldLaw::Gaussian { mean, std_dev } => {
                if !mean.is_finite() || !std_dev.is_finite() || *std_dev < 0.0 {
                    return Err(invalid("gaussian field law needs finite mean and std_dev >= 0"));
                }
            }
            FieldLaw::Empirical(sample) => {
                if sample.is_empty() || sample.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("empirical field law needs a nonempty finite sample"));
                }
            }
        }
        Ok(Self { law })
    }
}

impl From<FieldSpec> for FieldLaw {
    fn from(spec: FieldSpec) -> Self {
        spec.law
    }
}

impl FieldSpec {
    pub fn new(law: FieldLaw) -> Result<Self> {
        Self::try_from(law)
    }

    pub fn constant(gamma: f64) -> Result<Self> {
        Self::new(FieldLaw::Constant(gamma))
    }

    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(FieldLaw::Discrete(atoms))
    }

    pub fn gaussian(mean: f64, std_dev: f64) -> Result<Self> {
        Self::new(FieldLaw::Gaussian { mean, std_dev })
    }

    pub fn empirical(sample: Vec<f64>) -> Result<Self> {
        Self::new(FieldLaw::Empirical(sample))
    }

    pub fn law(&self) -> &FieldLaw {
        &self.law
    }

    /// `Some(Γ)` for a constant law.
    pub fn constant_strength(&self) -> Option<f64> {
        match self.law {
            FieldLaw::Constant(g) => Some(g),
            _ => None,
        }
    }

    /// Short label used in CSV output.
    pub fn label(&self) -> String {
        match &self.law {
            FieldLaw::Constant(g) => format!("{g}"),
            FieldLaw::Discrete(atoms) => format!("discrete[{}]", atoms.len()),
            FieldLaw::Gaussian { mean, std_dev } => format!("gaussian({mean};{std_dev})"),
            FieldLaw::Empirical(s) => format!("empirical[{}]", s.len()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.law {
            FieldLaw::Constant(g) => *g,
            FieldLaw::Discrete(atoms) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(v, p) in atoms {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                atoms.last().unwrap().0
            }
            FieldLaw::Gaussian { mean, std_dev } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std_dev * z
            }
            FieldLaw::Empirical(s) => s[rng.random_range(0..s.len())],
        }
    }
}

/// `ln(2 cosh y)`, stable for large `|y|`.
pub fn ln_2cosh(y: f64) -> f64 {
    let a = y.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Pressure of the random quantum paramagnet, `p(β, 𝔟) = E[ln 2cosh(β𝔟)]`.
pub fn paramagnetic_pressure(field: &FieldSpec, beta: f64) -> f64 {
    match &field.law {
        FieldLaw::Constant(g) => ln_2cosh(beta * g),
        FieldLaw::Discrete(atoms) => atoms.iter().map(|&(v, p)| p * ln_2cosh(beta * v)).sum(),
        FieldLaw::Gaussian { mean, std_dev } => {
            let rule = gauss_hermite();
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * ln_2cosh(beta * (mean + std_dev * x)))
                .sum()
        }
        FieldLaw::Empirical(s) => s.iter().map(|&v| ln_2cosh(beta * v)).sum::<f64>() / s.len() as f64,
    }
}

/// Number of Gauss–Hermite nodes used for Gaussian field laws.
pub const GAUSS_HERMITE_NODES: usize = 160;

struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Gauss–Hermite rule for the standard normal weight (Golub–Welsch).
fn gauss_hermite() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GAUSS_HERMITE_NODES;
        let jacobi = faer::Mat::<f64>::from_fn(n, n, |i, j| {
            if i.abs_diff(j) == 1 {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let evd = jacobi
            .self_adjoint_eigen(faer::Side::Lower)
            .expect("eigendecomposition of the Jacobi matrix");
        let nodes: Vec<f64> = (0..n).map(|i| evd.S().column_vector()[i]).collect();
        let mut weights: Vec<f64> = (0..n).map(|i| evd.U()[(0, i)].powi(2)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        QuadratureRule { nodes, weights }
    })
}
