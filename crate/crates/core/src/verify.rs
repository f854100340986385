//! Finite-N ground truth.
//!
//! A finite instance is the `2^N`-dimensional Hamiltonian `H_N = U - B`:
//! `U` is diagonal in the spin basis and `B = Σ_j b_j σ^x_j` flips single
//! spins. Configurations are bit strings with spin `j` (0-based, left to
//! right) stored in bit `N - 1 - j`, so a prefix of `n` spins is
//! `σ >> (N - n)`.
//!
//! `Φ_N = N⁻¹ ln Tr e^{-βH_N}` is computed either by a dense eigensolve or by
//! a Hutchinson trace estimate of a Chebyshev expansion of the exponential.

use faer::{Mat, Side};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{concave_hull, ln_2cosh, paramagnetic_pressure, DistributionKind, DistributionSpec, FieldSpec};
use crate::nonhier::{greedy_quantum_pressure, quantum_nonhier_pressure, NonHierModel, ENUMERATION_LIMIT};
use crate::quantum::qgrem_pressure;
use crate::LN2;

/// Largest `N` accepted by the dense eigensolve.
pub const EXACT_LIMIT: usize = 14;
/// Largest `N` accepted by the stochastic path.
pub const STOCHASTIC_LIMIT: usize = 20;

const POTENTIAL_STREAM: u64 = 0;
const FIELD_STREAM: u64 = 1;
const PROBE_STREAM: u64 = 2;
const PROBE_BATCH: usize = 16;

/// Source of the random potential `U`.
#[derive(Debug, Clone, PartialEq)]
pub enum Disorder {
    /// Hierarchical cascade for a step (or step-represented) distribution.
    Hierarchical(DistributionSpec),
    /// `U(σ) = sqrt(N) Σ_J sqrt(a_J) X^J_{σ|J}`.
    NonHierarchical(NonHierModel),
    /// `U ≡ 0`.
    Paramagnet,
}

impl Disorder {
    /// The limiting pressure. Non-hierarchical models above the enumeration
    /// limit go through the greedy chain.
    pub fn limit(&self, beta: f64, field: &FieldSpec) -> Result<f64> {
        match self {
            Disorder::Hierarchical(spec) => Ok(qgrem_pressure(&concave_hull(spec)?, beta, field).value),
            Disorder::NonHierarchical(model) if model.n() <= ENUMERATION_LIMIT => {
                Ok(quantum_nonhier_pressure(model, beta, field)?.value)
            }
            Disorder::NonHierarchical(model) => Ok(greedy_quantum_pressure(model, beta, field).value),
            Disorder::Paramagnet => Ok(paramagnetic_pressure(field, beta)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteInstance {
    n: usize,
    potential: Vec<f64>,
    field_weights: Vec<f64>,
    seed: u64,
}

impl FiniteInstance {
    pub fn new(potential: Vec<f64>, field_weights: Vec<f64>, seed: u64) -> Result<Self> {
        let n = field_weights.len();
        if n == 0 || n > STOCHASTIC_LIMIT {
            return Err(Error::Capacity(format!("N = {n} outside 1..={STOCHASTIC_LIMIT}")));
        }
        if potential.len() != 1 << n {
            return Err(invalid(format!("potential has {} entries, expected 2^{n}", potential.len())));
        }
        if potential.iter().chain(&field_weights).any(|v| !v.is_finite()) {
            return Err(invalid("non-finite potential or field weight"));
        }
        Ok(Self {
            n,
            potential,
            field_weights,
            seed,
        })
    }

    /// Number of spins `N`.
    pub fn spins(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn field_weights(&self) -> &[f64] {
        &self.field_weights
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Bit of spin `j`.
    fn spin_bit(&self, j: usize) -> usize {
        1 << (self.n - 1 - j)
    }

    /// Copy with the signs of `b_j` flipped where `flips[j]` is set.
    pub fn with_flipped_fields(&self, flips: &[bool]) -> Result<Self> {
        if flips.len() != self.n {
            return Err(invalid(format!("{} flip flags for {} spins", flips.len(), self.n)));
        }
        let mut out = self.clone();
        for (b, &f) in out.field_weights.iter_mut().zip(flips) {
            if f {
                *b = -*b;
            }
        }
        Ok(out)
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let bits: Vec<(usize, f64)> = (0..self.n).map(|j| (self.spin_bit(j), self.field_weights[j])).collect();
        y.par_iter_mut().enumerate().for_each(|(s, out)| {
            let mut acc = self.potential[s] * x[s];
            for &(bit, b) in &bits {
                acc -= b * x[s ^ bit];
            }
            *out = acc;
        });
    }

    /// Dense `H` in row-major order.
    pub fn dense_hamiltonian(&self) -> Result<Vec<f64>> {
        let m = self.dense_matrix()?;
        let d = self.dim();
        Ok((0..d * d).map(|k| m[(k / d, k % d)]).collect())
    }

    fn dense_matrix(&self) -> Result<Mat<f64>> {
        if self.n > EXACT_LIMIT {
            return Err(Error::Capacity(format!(
                "dense eigensolve limited to N <= {EXACT_LIMIT}, got N = {}",
                self.n
            )));
        }
        let d = self.dim();
        let mut m = Mat::<f64>::zeros(d, d);
        for s in 0..d {
            m[(s, s)] = self.potential[s];
            for j in 0..self.n {
                m[(s, s ^ self.spin_bit(j))] = -self.field_weights[j];
            }
        }
        Ok(m)
    }
}

/// Normalized lexicographic overlap: the length of the common spin prefix
/// of `a` and `b` divided by `N`.
pub fn overlap(a: usize, b: usize, n: usize) -> f64 {
    let diff = (a ^ b) as u64;
    let common = if diff == 0 { n } else { n - (64 - diff.leading_zeros() as usize) };
    common as f64 / n as f64
}

/// Block end positions `⌈x_k N⌉`; every block must be nonempty.
pub fn block_boundaries(breakpoints: &[f64], n: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(breakpoints.len());
    let mut prev = 0usize;
    for (k, &x) in breakpoints.iter().enumerate() {
        let end = ((x * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n);
        if end <= prev {
            return Err(invalid(format!(
                "block {} is empty at N = {n}; use N >= number of blocks with resolvable breakpoints",
                k + 1
            )));
        }
        out.push(end);
        prev = end;
    }
    Ok(out)
}

/// Seed of replica `index` derived from `seed`.
pub fn replica_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Samples `U` for `n` spins.
pub fn sample_potential(disorder: &Disorder, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 || n > STOCHASTIC_LIMIT {
        return Err(Error::Capacity(format!("N = {n} outside 1..={STOCHASTIC_LIMIT}")));
    }
    let dim = 1usize << n;
    let mut rng = stream(seed, POTENTIAL_STREAM);
    let mut potential = vec![0.0; dim];
    match disorder {
        Disorder::Paramagnet => {}
        Disorder::Hierarchical(spec) => {
            let spec = match spec.kind() {
                DistributionKind::Step => spec.clone(),
                DistributionKind::PiecewiseLinear => spec.step_representation(n)?,
            };
            let ends = block_boundaries(&spec.breakpoints(), n)?;
            for (&end, a) in ends.iter().zip(spec.jumps()) {
                let scale = (n as f64 * a).sqrt();
                let gaussians: Vec<f64> = (0..1usize << end).map(|_| rng.sample(StandardNormal)).collect();
                if scale == 0.0 {
                    continue;
                }
                for (s, u) in potential.iter_mut().enumerate() {
                    *u += scale * gaussians[s >> (n - end)];
                }
            }
        }
        Disorder::NonHierarchical(model) => {
            let cumulative: Vec<f64> = model
                .lengths()
                .iter()
                .scan(0.0, |acc, l| {
                    *acc += l;
                    Some(*acc)
                })
                .collect();
            let ends = block_boundaries(&cumulative, n)?;
            let block_bits: Vec<usize> = ends
                .iter()
                .scan(0usize, |start, &end| {
                    let bits = (*start..end).fold(0usize, |m, j| m | 1 << (n - 1 - j));
                    *start = end;
                    Some(bits)
                })
                .collect();
            for mask in 1..1u32 << model.n() {
                let set = crate::nonhier::Subset(mask);
                let a = model.weight(set);
                if a == 0.0 {
                    continue;
                }
                let bits = set.blocks().fold(0usize, |m, k| m | block_bits[k]);
                let gaussians: Vec<f64> = (0..1usize << bits.count_ones()).map(|_| rng.sample(StandardNormal)).collect();
                let scale = (n as f64 * a).sqrt();
                for (s, u) in potential.iter_mut().enumerate() {
                    *u += scale * gaussians[extract_bits(s, bits)];
                }
            }
        }
    }
    Ok(potential)
}

/// Packs the bits of `value` selected by `mask` into the low bits, keeping
/// their order.
fn extract_bits(value: usize, mask: usize) -> usize {
    let mut out = 0;
    let mut k = 0;
    let mut m = mask;
    while m != 0 {
        let low = m & m.wrapping_neg();
        if value & low != 0 {
            out |= 1 << k;
        }
        k += 1;
        m &= m - 1;
    }
    out
}

/// Samples `b_1, ..., b_N` i.i.d. from the field law.
pub fn sample_field_weights(field: &FieldSpec, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, FIELD_STREAM);
    (0..n).map(|_| field.sample(&mut rng)).collect()
}

/// Samples a finite instance; deterministic in `seed`.
pub fn sample_instance(disorder: &Disorder, field: &FieldSpec, n: usize, seed: u64) -> Result<FiniteInstance> {
    let potential = sample_potential(disorder, n, seed)?;
    FiniteInstance::new(potential, sample_field_weights(field, n, seed), seed)
}

fn log_sum_exp_anchored(values: impl Iterator<Item = f64>, anchor: f64) -> f64 {
    values.map(|v| (v - anchor).exp()).sum::<f64>().ln() + anchor
}

/// Spectrum of `H`, ascending.
pub fn spectrum(inst: &FiniteInstance) -> Result<Vec<f64>> {
    inst.dense_matrix()?
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Domain(format!("eigensolve failed: {e:?}")))
}

/// `Φ_N = N⁻¹ ln Σ_i e^{-βλ_i}` from the dense spectrum, anchored at `λ_min`.
pub fn exact_pressure(inst: &FiniteInstance, beta: f64) -> Result<f64> {
    let eigenvalues = spectrum(inst)?;
    Ok(pressure_from_spectrum(&eigenvalues, beta, inst.n))
}

fn pressure_from_spectrum(eigenvalues: &[f64], beta: f64, n: usize) -> f64 {
    let anchor = -beta * eigenvalues[0];
    log_sum_exp_anchored(eigenvalues.iter().map(|l| -beta * l), anchor) / n as f64
}

/// `ln ⟨σ|e^{-βH}|σ⟩` for every configuration.
pub fn log_diagonal_of_exponential(inst: &FiniteInstance, beta: f64) -> Result<Vec<f64>> {
    let evd = inst
        .dense_matrix()?
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Domain(format!("eigensolve failed: {e:?}")))?;
    let d = inst.dim();
    let lambda: Vec<f64> = (0..d).map(|k| evd.S().column_vector()[k]).collect();
    let anchor = -beta * lambda[0];
    let weights: Vec<f64> = lambda.iter().map(|l| (-beta * l - anchor).exp()).collect();
    let u = evd.U();
    Ok((0..d)
        .map(|s| {
            let diag: f64 = (0..d).map(|k| u[(s, k)] * u[(s, k)] * weights[k]).sum();
            diag.ln() + anchor
        })
        .collect())
}

/// Largest relative deviation of the diagonal of `e^{-βH}` when the field
/// signs selected by `flips` are reversed.
pub fn sign_invariance_check(inst: &FiniteInstance, beta: f64, flips: &[bool]) -> Result<f64> {
    let flipped = inst.with_flipped_fields(flips)?;
    let a = log_diagonal_of_exponential(inst, beta)?;
    let b = log_diagonal_of_exponential(&flipped, beta)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (y - x).exp_m1().abs()).fold(0.0, f64::max))
}

/// A uniformly random flip pattern.
pub fn random_flip_pattern(n: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

/// The two Gibbs-variational lower bounds on `Φ_N`: the diagonal bound
/// `N⁻¹ ln Σ_σ e^{-βU(σ)}` (trial state diagonal in σ) and the field bound
/// `N⁻¹ (Σ_j ln 2cosh(β b_j) - β 2^{-N} Σ_σ U(σ))` (trial state
/// `e^{βB}/Tr e^{βB}`, whose energy expectation is the mean of `U`).
pub fn gibbs_lower_bounds(inst: &FiniteInstance, beta: f64) -> (f64, f64) {
    let n = inst.n as f64;
    let anchor = inst.potential.iter().map(|u| -beta * u).fold(f64::NEG_INFINITY, f64::max);
    let diagonal = log_sum_exp_anchored(inst.potential.iter().map(|u| -beta * u), anchor) / n;
    let mean_potential = inst.potential.iter().sum::<f64>() / inst.dim() as f64;
    let field = (inst.field_weights.iter().map(|b| ln_2cosh(beta * b)).sum::<f64>() - beta * mean_potential) / n;
    (diagonal, field)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticConfig {
    /// Rademacher probe vectors.
    pub probes: usize,
    /// Largest Chebyshev degree.
    pub max_degree: usize,
    /// Target bound on the polynomial truncation error of `Φ_N`.
    pub tolerance: f64,
}

impl Default for StochasticConfig {
    fn default() -> Self {
        Self {
            probes: 48,
            max_degree: 2000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticEstimate {
    pub pressure: f64,
    /// Probe standard error of `Φ_N`.
    pub std_error: f64,
    /// Rigorous bound on the truncation error of `Φ_N`.
    pub truncation_bound: f64,
    pub degree: usize,
    /// `false` when `max_degree` could not reach `tolerance`.
    pub converged: bool,
}

/// `e^{-z} I_k(z)` for `k = 0..=kmax`, by normalized backward recurrence.
pub fn scaled_bessel_i(z: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if z == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let top = kmax.max(z.ceil() as usize);
    let start = top + 32 + (40.0 * top as f64).sqrt() as usize;
    let (mut next, mut current) = (0.0f64, 1e-300f64);
    let mut sum = 0.0;
    for k in (1..=start).rev() {
        let prev = next + 2.0 * k as f64 / z * current;
        next = current;
        current = prev;
        // current is now I_{k-1}, next is I_k
        if k <= kmax {
            out[k] = next;
        }
        sum += 2.0 * next;
        if current > 1e250 {
            let scale = 1e-250;
            current *= scale;
            next *= scale;
            sum *= scale;
            out.iter_mut().for_each(|v| *v *= scale);
        }
    }
    out[0] = current;
    sum += current;
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// Hutchinson estimate of `Φ_N` with Rademacher probes and a Chebyshev
/// expansion of `e^{-β(x - min U)}` on the Gershgorin interval
/// `[min U - Σ|b|, max U + Σ|b|]`.
///
/// The degree is the smallest one whose coefficient tail, times the
/// dimension, is below `tolerance · N` times the lower bound
/// `Σ_σ e^{-β(U(σ) - min U)} ≤ Tr e^{-β(H - min U)}`.
pub fn stochastic_pressure(inst: &FiniteInstance, beta: f64, config: &StochasticConfig) -> Result<StochasticEstimate> {
    if config.probes == 0 {
        return Err(invalid("stochastic trace estimate needs at least one probe"));
    }
    if config.max_degree == 0 {
        return Err(invalid("Chebyshev degree budget must be positive"));
    }
    let n = inst.n;
    let dim = inst.dim();
    let spread: f64 = inst.field_weights.iter().map(|b| b.abs()).sum();
    let u_min = inst.potential.iter().copied().fold(f64::INFINITY, f64::min);
    let u_max = inst.potential.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = (u_min - spread, u_max + spread);
    let center = 0.5 * (lo + hi);
    let radius = 0.5 * (hi - lo);
    if beta * spread > 600.0 {
        return Err(Error::Capacity(format!(
            "β Σ|b_j| = {} too large for the Chebyshev expansion",
            beta * spread
        )));
    }

    let z = beta * radius;
    let tail_len = config.max_degree + 64 + z.ceil() as usize;
    let bessel = scaled_bessel_i(z, tail_len);
    // f(x) = e^{-β(x - u_min)} = e^{β spread} e^{-βr t}, t = (x - center)/r
    let prefactor = (beta * spread).exp();
    let coeffs: Vec<f64> = bessel
        .iter()
        .enumerate()
        .map(|(k, &ik)| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let mult = if k == 0 { 1.0 } else { 2.0 };
            prefactor * mult * sign * ik
        })
        .collect();
    let mut tails = vec![0.0; coeffs.len() + 1];
    for k in (0..coeffs.len()).rev() {
        tails[k] = tails[k + 1] + coeffs[k].abs();
    }
    let log_lower = log_sum_exp_anchored(inst.potential.iter().map(|u| -beta * (u - u_min)), 0.0);
    let allowed = (config.tolerance * n as f64).ln() + log_lower;
    let fits = |d: usize| (dim as f64 * tails[d + 1]).ln() <= allowed;
    let (degree, converged) = match (0..=config.max_degree).find(|&d| fits(d)) {
        Some(d) => (d, true),
        None => (config.max_degree, false),
    };
    let truncation_bound = dim as f64 * tails[degree + 1] / log_lower.exp() / n as f64;

    let samples = chebyshev_quadratic_forms(inst, center, radius, &coeffs[..=degree], config.probes);
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64
    } else {
        0.0
    };
    if !(mean > 0.0) {
        return Ok(StochasticEstimate {
            pressure: f64::NAN,
            std_error: f64::INFINITY,
            truncation_bound,
            degree,
            converged: false,
        });
    }
    let se = (var / samples.len() as f64).sqrt();
    Ok(StochasticEstimate {
        pressure: (-beta * u_min + mean.ln()) / n as f64,
        std_error: se / mean / n as f64,
        truncation_bound,
        degree,
        converged,
    })
}

/// `z_p^T (Σ_k c_k T_k((H - center)/radius)) z_p` for Rademacher probes.
fn chebyshev_quadratic_forms(inst: &FiniteInstance, center: f64, radius: f64, coeffs: &[f64], probes: usize) -> Vec<f64> {
    let dim = inst.dim();
    let mut rng = stream(inst.seed, PROBE_STREAM);
    let bits: Vec<(usize, f64)> = (0..inst.n)
        .map(|j| (inst.spin_bit(j), if radius > 0.0 { inst.field_weights[j] / radius } else { 0.0 }))
        .collect();
    let diag: Vec<f64> = inst
        .potential
        .iter()
        .map(|u| if radius > 0.0 { (u - center) / radius } else { 0.0 })
        .collect();
    let mut out = Vec::with_capacity(probes);
    let mut done = 0;
    while done < probes {
        let p = PROBE_BATCH.min(probes - done);
        // layout: [state][probe]
        let probe: Vec<f64> = (0..dim * p).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            y.par_chunks_mut(p).enumerate().for_each(|(s, row)| {
                let d = diag[s];
                for (q, v) in row.iter_mut().enumerate() {
                    *v = d * x[s * p + q];
                }
                for &(bit, b) in &bits {
                    let o = s ^ bit;
                    let other = &x[o * p..(o + 1) * p];
                    for (v, o) in row.iter_mut().zip(other) {
                        *v -= b * o;
                    }
                }
            });
        };
        let dot = |v: &[f64], acc: &mut [f64], c: f64| {
            for (s, row) in v.chunks(p).enumerate() {
                for q in 0..p {
                    acc[q] += c * probe[s * p + q] * row[q];
                }
            }
        };
        let mut acc = vec![0.0; p];
        dot(&probe, &mut acc, coeffs[0]);
        if coeffs.len() > 1 {
            let mut prev = probe.clone();
            let mut cur = vec![0.0; dim * p];
            apply(&prev, &mut cur);
            dot(&cur, &mut acc, coeffs[1]);
            let mut next = vec![0.0; dim * p];
            for &c in &coeffs[2..] {
                apply(&cur, &mut next);
                for (nv, pv) in next.iter_mut().zip(&prev) {
                    *nv = 2.0 * *nv - pv;
                }
                dot(&next, &mut acc, c);
                std::mem::swap(&mut prev, &mut cur);
                std::mem::swap(&mut cur, &mut next);
            }
        }
        out.extend(acc);
        done += p;
    }
    out
}

/// How `Φ_N` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Exact,
    Stochastic(StochasticConfig),
    /// Exact up to `exact_max_spins`, stochastic above.
    Auto {
        exact_max_spins: usize,
        stochastic: StochasticConfig,
    },
}

impl Default for Method {
    fn default() -> Self {
        Method::Auto {
            exact_max_spins: 10,
            stochastic: StochasticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureEstimate {
    pub value: f64,
    /// Zero for the exact path.
    pub std_error: f64,
    pub exact: bool,
    pub converged: bool,
}

pub fn finite_pressure(inst: &FiniteInstance, beta: f64, method: &Method) -> Result<PressureEstimate> {
    let stochastic = |cfg: &StochasticConfig| {
        stochastic_pressure(inst, beta, cfg).map(|e| PressureEstimate {
            value: e.pressure,
            std_error: e.std_error + e.truncation_bound,
            exact: false,
            converged: e.converged,
        })
    };
    let exact = || {
        exact_pressure(inst, beta).map(|value| PressureEstimate {
            value,
            std_error: 0.0,
            exact: true,
            converged: true,
        })
    };
    match method {
        Method::Exact => exact(),
        Method::Stochastic(cfg) => stochastic(cfg),
        Method::Auto {
            exact_max_spins,
            stochastic: cfg,
        } => {
            if inst.n <= *exact_max_spins {
                exact()
            } else {
                stochastic(cfg)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaSample {
    pub replica: usize,
    pub spins: usize,
    pub phi: f64,
    pub std_error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub spins: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub limit: f64,
    /// `|mean - limit|`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub samples: Vec<ReplicaSample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    pub method: Method,
    /// Keep one field draw per `N` across replicas.
    pub freeze_field: bool,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            method: Method::default(),
            freeze_field: false,
        }
    }
}

/// Samples `Φ_N` over `replicas` disorder draws for every `N` and compares
/// the means with the limiting pressure.
pub fn convergence_study(
    disorder: &Disorder,
    field: &FieldSpec,
    beta: f64,
    sizes: &[usize],
    replicas: usize,
    seed: u64,
    options: &StudyOptions,
) -> Result<ConvergenceStudy> {
    if replicas == 0 {
        return Err(invalid("convergence study needs at least one replica"));
    }
    let limit = disorder.limit(beta, field)?;
    let mut rows = Vec::with_capacity(sizes.len());
    let mut samples = Vec::with_capacity(sizes.len() * replicas);
    for &n in sizes {
        let frozen = options.freeze_field.then(|| sample_field_weights(field, n, seed));
        let batch = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let rs = replica_seed(seed, r as u64);
                let fields = frozen.clone().unwrap_or_else(|| sample_field_weights(field, n, rs));
                let inst = FiniteInstance::new(sample_potential(disorder, n, rs)?, fields, rs)?;
                let est = finite_pressure(&inst, beta, &options.method)?;
                Ok(ReplicaSample {
                    replica: r,
                    spins: n,
                    phi: est.value,
                    std_error: est.std_error,
                    converged: est.converged,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (mean, std_dev) = mean_and_std(batch.iter().map(|s| s.phi));
        rows.push(ConvergenceRow {
            spins: n,
            mean,
            std_dev,
            std_error: std_dev / (replicas as f64).sqrt(),
            limit,
            gap: (mean - limit).abs(),
        });
        samples.extend(batch);
    }
    Ok(ConvergenceStudy { rows, samples })
}

fn mean_and_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let count = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / count;
    let var = if count > 1.0 {
        values.map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub t: f64,
    /// Fraction of replicas with `|Φ_N - mean| > tβ/√N`.
    pub fraction: f64,
    /// `2 e^{-t²/4}`.
    pub bound: f64,
    /// Three binomial standard deviations at the bound.
    pub slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    pub spins: usize,
    pub beta: f64,
    pub replicas: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub tails: Vec<TailRow>,
    pub phis: Vec<f64>,
}

impl ConcentrationReport {
    pub fn passed(&self) -> bool {
        self.tails.iter().all(|t| t.passed)
    }
}

/// Minimum replica count for [`concentration_check`].
pub const CONCENTRATION_MIN_REPLICAS: usize = 200;

/// Gaussian concentration of `Φ_N` over the potential with the field
/// weights held fixed: empirical tail fractions at `t ∈ {1, 2, 3}` against
/// `2 e^{-t²/4}` plus `3 sqrt(b(1 - b)/R)`.
pub fn concentration_check(
    disorder: &Disorder,
    field: &FieldSpec,
    n: usize,
    beta: f64,
    replicas: usize,
    seed: u64,
    method: &Method,
) -> Result<ConcentrationReport> {
    if replicas < CONCENTRATION_MIN_REPLICAS {
        return Err(invalid(format!(
            "concentration check needs at least {CONCENTRATION_MIN_REPLICAS} replicas, got {replicas}"
        )));
    }
    let fields = sample_field_weights(field, n, seed);
    let phis = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let rs = replica_seed(seed, r as u64);
            let inst = FiniteInstance::new(sample_potential(disorder, n, rs)?, fields.clone(), rs)?;
            Ok(finite_pressure(&inst, beta, method)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, std_dev) = mean_and_std(phis.iter().copied());
    let tails = [1.0, 2.0, 3.0]
        .into_iter()
        .map(|t: f64| {
            let radius = t * beta / (n as f64).sqrt();
            let count = phis.iter().filter(|p| (*p - mean).abs() > radius).count();
            let fraction = count as f64 / replicas as f64;
            let bound = (2.0 * (-t * t / 4.0).exp()).min(1.0);
            let slack = 3.0 * (bound * (1.0 - bound) / replicas as f64).sqrt();
            TailRow {
                t,
                fraction,
                bound,
                slack,
                passed: fraction <= bound + slack,
            }
        })
        .collect();
    Ok(ConcentrationReport {
        spins: n,
        beta,
        replicas,
        mean,
        std_dev,
        tails,
        phis,
    })
}

/// `ln 2`, the `β = 0` value of every `Φ_N`.
pub const INFINITE_TEMPERATURE_PRESSURE: f64 = LN2;
