//! Non-hierarchical GREM.
//!
//! Blocks `1..n` carry lengths `L_k` and every nonempty subset `J` of blocks
//! carries a weight `a_J`. A chain (an ordering of some blocks) induces a
//! hierarchical GREM with weights `a_k^S = ã(A_k) - ã(A_{k-1})`, where
//! `ã(J) = Σ_{I ⊆ J} a_I`. The classical pressure is the minimum over full
//! chains; the quantum pressure is a max over terminal sets `D` of the
//! minimum over chains ending at `D`, plus the paramagnetic remainder.
//!
//! Subsets are bitmasks: bit `k` is block `k + 1`.

use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::classical_pressure;
use crate::error::{invalid, Error, Result};
use crate::model::{paramagnetic_pressure, ConcaveHull, DistributionSpec, Envelope, FieldSpec};
use crate::quantum::{qgrem_pressure_with_paramagnet, QuantumPressureResult};

/// Largest `n` accepted by the exhaustive chain enumerations (`10!` chains).
pub const ENUMERATION_LIMIT: usize = 10;
/// Largest `n` for which subset weights are stored densely.
pub const STORAGE_LIMIT: usize = 20;

const NORMALIZATION_TOL: f64 = 1e-12;
const SLOPE_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Subset(pub u32);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn full(n: usize) -> Self {
        Subset(((1u64 << n) - 1) as u32)
    }

    pub fn singleton(block: usize) -> Self {
        Subset(1 << block)
    }

    pub fn contains(self, block: usize) -> bool {
        self.0 >> block & 1 == 1
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    pub fn with(self, block: usize) -> Subset {
        Subset(self.0 | 1 << block)
    }

    /// 0-based block indices in ascending order.
    pub fn blocks(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&k| self.contains(k))
    }

    /// Parses the sorted comma-joined 1-based key format (`"1,3"`).
    pub fn parse_key(key: &str, n: usize) -> Result<Self> {
        let mut mask = Subset::EMPTY;
        let mut prev = 0usize;
        for part in key.split(',') {
            let k: usize = part
                .trim()
                .parse()
                .map_err(|_| invalid(format!("subset key {key:?}: {part:?} is not a block index")))?;
            if k == 0 || k > n {
                return Err(invalid(format!("subset key {key:?}: block {k} outside 1..{n}")));
            }
            if k <= prev {
                return Err(invalid(format!("subset key {key:?} is not strictly increasing")));
            }
            prev = k;
            mask = mask.with(k - 1);
        }
        Ok(mask)
    }

    /// Inverse of [`Subset::parse_key`]; the empty set is `""`.
    pub fn key(self) -> String {
        self.blocks().map(|k| (k + 1).to_string()).join(",")
    }

    /// Lexicographic order of the sorted index lists.
    fn lex_cmp(self, other: Subset) -> std::cmp::Ordering {
        self.blocks().cmp(other.blocks())
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.key())
    }
}

/// A chain `∅ = A_0 ⊂ A_1 ⊂ ... ⊂ A_m`, stored as the ordered sequence of
/// added blocks (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chain {
    order: Vec<usize>,
}

impl Chain {
    pub fn new(order: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = Subset::EMPTY;
        for &k in &order {
            if k >= n {
                return Err(invalid(format!("chain references block {} outside 1..{n}", k + 1)));
            }
            if seen.contains(k) {
                return Err(invalid(format!("chain repeats block {}", k + 1)));
            }
            seen = seen.with(k);
        }
        Ok(Self { order })
    }

    /// The identity chain `(1, 2, ..., n)`.
    pub fn identity(n: usize) -> Self {
        Self { order: (0..n).collect() }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `A_1, ..., A_m`.
    pub fn sets(&self) -> Vec<Subset> {
        self.order
            .iter()
            .scan(Subset::EMPTY, |acc, &k| {
                *acc = acc.with(k);
                Some(*acc)
            })
            .collect()
    }

    /// Terminal set `D = A_m`.
    pub fn terminal(&self) -> Subset {
        self.order.iter().fold(Subset::EMPTY, |acc, &k| acc.with(k))
    }
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.order.iter().map(|k| k + 1).join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonHierModel {
    n: usize,
    lengths: Vec<f64>,
    /// `a_J`, indexed by mask.
    weights: Vec<f64>,
    /// `ã(J) = Σ_{I ⊆ J} a_I`, indexed by mask.
    cumulative: Vec<f64>,
    /// `Σ_{k ∈ J} L_k`, indexed by mask.
    subset_lengths: Vec<f64>,
}

impl NonHierModel {
    /// Builds a model from block lengths and a dense weight vector indexed
    /// by mask (`weights[0]` must be zero).
    pub fn new(lengths: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = lengths.len();
        if n == 0 {
            return Err(invalid("model needs at least one block"));
        }
        if n > STORAGE_LIMIT {
            return Err(Error::Capacity(format!(
                "{n} blocks exceed the dense storage limit of {STORAGE_LIMIT}"
            )));
        }
        if weights.len() != 1 << n {
            return Err(invalid(format!("expected {} subset weights, got {}", 1 << n, weights.len())));
        }
        if let Some(l) = lengths.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(invalid(format!("block length {l} is not positive")));
        }
        let total_length: f64 = lengths.iter().sum();
        if (total_length - 1.0).abs() > NORMALIZATION_TOL {
            return Err(invalid(format!("block lengths sum to {total_length}, expected 1")));
        }
        if weights[0] != 0.0 {
            return Err(invalid("the empty set must carry weight 0"));
        }
        if let Some(a) = weights.iter().find(|a| !(**a >= 0.0) || !a.is_finite()) {
            return Err(invalid(format!("negative or non-finite subset weight {a}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(invalid(format!("subset weights sum to {total}, expected 1")));
        }

        let mut cumulative = weights.clone();
        for k in 0..n {
            for mask in 0..cumulative.len() {
                if mask >> k & 1 == 1 {
                    cumulative[mask] += cumulative[mask ^ 1 << k];
                }
            }
        }
        let subset_lengths = (0..1usize << n)
            .map(|mask| Subset(mask as u32).blocks().map(|k| lengths[k]).sum())
            .collect();
        Ok(Self {
            n,
            lengths,
            weights,
            cumulative,
            subset_lengths,
        })
    }

    /// Builds a model from `(subset, weight)` pairs; unlisted subsets get 0.
    pub fn from_weights(lengths: Vec<f64>, entries: &[(Subset, f64)]) -> Result<Self> {
        let n = lengths.len();
        if n > STORAGE_LIMIT {
            return Err(Error::Capacity(format!(
                "{n} blocks exceed the dense storage limit of {STORAGE_LIMIT}"
            )));
        }
        let mut weights = vec![0.0; 1 << n];
        for &(set, a) in entries {
            if set.0 as usize >= weights.len() {
                return Err(invalid(format!("subset {set} outside 1..{n}")));
            }
            weights[set.0 as usize] += a;
        }
        Self::new(lengths, weights)
    }

    /// A hierarchical GREM written as a non-hierarchical model: weight
    /// `a_k` on the prefix `{1..k}`.
    pub fn hierarchical(lengths: Vec<f64>, prefix_weights: &[f64]) -> Result<Self> {
        let entries: Vec<(Subset, f64)> = prefix_weights
            .iter()
            .enumerate()
            .map(|(k, &a)| (Subset::full(k + 1), a))
            .collect();
        Self::from_weights(lengths, &entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn weight(&self, set: Subset) -> f64 {
        self.weights[set.0 as usize]
    }

    /// `ã(J)`.
    pub fn cumulative_weight(&self, set: Subset) -> f64 {
        self.cumulative[set.0 as usize]
    }

    /// `Σ_{k ∈ J} L_k`.
    pub fn subset_length(&self, set: Subset) -> f64 {
        self.subset_lengths[set.0 as usize]
    }

    pub fn full_set(&self) -> Subset {
        Subset::full(self.n)
    }

    fn check_chain(&self, chain: &Chain) -> Result<()> {
        match chain.order.iter().find(|&&k| k >= self.n) {
            Some(k) => Err(invalid(format!("chain references block {} outside 1..{}", k + 1, self.n))),
            None => Ok(()),
        }
    }

    fn check_enumerable(&self) -> Result<()> {
        if self.n > ENUMERATION_LIMIT {
            return Err(Error::Capacity(format!(
                "{} blocks exceed the exhaustive enumeration limit of {ENUMERATION_LIMIT}; use the greedy chain",
                self.n
            )));
        }
        Ok(())
    }

    /// Hull points `(y_k^S, ã(A_k))` of a chain, with `ã` made monotone
    /// against summation-order rounding.
    fn chain_points(&self, order: &[usize]) -> Vec<(f64, f64)> {
        let mut set = Subset::EMPTY;
        let mut y = 0.0;
        let mut top = 0.0f64;
        order
            .iter()
            .map(|&k| {
                set = set.with(k);
                y += self.lengths[k];
                top = top.max(self.cumulative_weight(set));
                (y, top)
            })
            .collect()
    }

    fn chain_pressure(&self, order: &[usize], beta: f64) -> f64 {
        if order.is_empty() {
            return 0.0;
        }
        let hull = ConcaveHull::from_points(&self.chain_points(order)).expect("chain points are monotone");
        classical_pressure(&hull, beta)
    }
}

/// JSON form `{"n": 2, "L": [..], "weights": {"1": .., "1,2": ..}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonHierModelFile {
    pub n: usize,
    #[serde(rename = "L")]
    pub lengths: Vec<f64>,
    pub weights: BTreeMap<String, f64>,
}

impl TryFrom<NonHierModelFile> for NonHierModel {
    type Error = Error;

    fn try_from(file: NonHierModelFile) -> Result<Self> {
        if file.lengths.len() != file.n {
            return Err(invalid(format!("n = {} but {} block lengths given", file.n, file.lengths.len())));
        }
        if file.n > STORAGE_LIMIT {
            return Err(Error::Capacity(format!(
                "{} blocks exceed the dense storage limit of {STORAGE_LIMIT}",
                file.n
            )));
        }
        let entries = file
            .weights
            .iter()
            .map(|(key, &a)| Ok((Subset::parse_key(key, file.n)?, a)))
            .collect::<Result<Vec<_>>>()?;
        NonHierModel::from_weights(file.lengths, &entries)
    }
}

impl From<&NonHierModel> for NonHierModelFile {
    fn from(model: &NonHierModel) -> Self {
        let weights = (1..1u32 << model.n)
            .map(Subset)
            .filter(|s| model.weight(*s) != 0.0)
            .map(|s| (s.key(), model.weight(s)))
            .collect();
        Self {
            n: model.n,
            lengths: model.lengths.clone(),
            weights,
        }
    }
}

/// The hierarchical GREM induced by a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainGrem {
    /// Unnormalized step function with jumps `a_k^S` at `y_k^S`.
    pub spec: DistributionSpec,
    /// `a_k^S = Σ_{D ⊆ A_k, D ⊄ A_{k-1}} a_D`.
    pub weights: Vec<f64>,
    /// `y_k^S = Σ_{j ∈ A_k} L_j`.
    pub endpoints: Vec<f64>,
}

impl ChainGrem {
    pub fn hull(&self) -> ConcaveHull {
        ConcaveHull::from_points(self.spec.points()).expect("chain GREM spec is valid")
    }
}

pub fn chain_grem(model: &NonHierModel, chain: &Chain) -> Result<ChainGrem> {
    model.check_chain(chain)?;
    if chain.is_empty() {
        return Err(invalid("the empty chain induces no GREM"));
    }
    let points = model.chain_points(chain.order());
    let endpoints: Vec<f64> = points.iter().map(|p| p.0).collect();
    let weights: Vec<f64> = points
        .iter()
        .scan(0.0, |prev, p| {
            let a = p.1 - *prev;
            *prev = p.1;
            Some(a)
        })
        .collect();
    let spec = DistributionSpec::step_unnormalized(&endpoints, &weights)?;
    Ok(ChainGrem {
        spec,
        weights,
        endpoints,
    })
}

/// Concave hull of the GREM induced by `chain`.
pub fn chain_hull(model: &NonHierModel, chain: &Chain) -> Result<ConcaveHull> {
    model.check_chain(chain)?;
    if chain.is_empty() {
        return Err(invalid("the empty chain has no hull"));
    }
    ConcaveHull::from_points(&model.chain_points(chain.order()))
}

/// Minimum of the classical chain pressure over all orderings of `set`,
/// with the lexicographically first minimizer.
fn min_over_orderings(model: &NonHierModel, set: Subset, beta: f64) -> (f64, Vec<usize>) {
    let blocks: Vec<usize> = set.blocks().collect();
    let k = blocks.len();
    if k == 0 {
        return (0.0, Vec::new());
    }
    let mut best = (f64::INFINITY, Vec::new());
    for order in blocks.iter().copied().permutations(k) {
        let value = model.chain_pressure(&order, beta);
        if value < best.0 {
            best = (value, order);
        }
    }
    best
}

/// Classical pressure `min_S Φ(β, S)` over all `n!` full chains, with the
/// lexicographically first minimizing chain.
pub fn classical_nonhier_pressure(model: &NonHierModel, beta: f64) -> Result<(f64, Chain)> {
    model.check_enumerable()?;
    let n = model.n;
    // partition the permutations by their first block; each part is
    // enumerated in lexicographic order and parts are reduced in order
    let parts: Vec<(f64, Vec<usize>)> = (0..n)
        .into_par_iter()
        .map(|first| {
            let rest: Vec<usize> = (0..n).filter(|&k| k != first).collect();
            let mut best = (f64::INFINITY, Vec::new());
            for tail in rest.iter().copied().permutations(n - 1) {
                let mut order = Vec::with_capacity(n);
                order.push(first);
                order.extend(tail);
                let value = model.chain_pressure(&order, beta);
                if value < best.0 {
                    best = (value, order);
                }
            }
            best
        })
        .collect();
    let (value, order) = parts
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("n >= 1");
    Ok((value, Chain { order }))
}

/// Greedy chain `S_0`.
///
/// From the current set `P` (initially `∅`) the next set is the strict
/// superset `U` maximizing the incremental slope
/// `(ã(U) - ã(P)) / (L(U) - L(P))`; ties (relative `1e-12`) prefer the larger
/// set, then the lexicographically smaller one. The blocks of `U \ P` are
/// appended in ascending order.
pub fn greedy_chain(model: &NonHierModel) -> Chain {
    let full = model.full_set();
    let mut current = Subset::EMPTY;
    let mut order = Vec::with_capacity(model.n);
    while current != full {
        let base_weight = model.cumulative_weight(current);
        let base_length = model.subset_length(current);
        let mut best: Option<(f64, Subset)> = None;
        for mask in 1..=full.0 {
            let candidate = Subset(mask);
            if candidate == current || !current.is_subset_of(candidate) {
                continue;
            }
            let slope = (model.cumulative_weight(candidate) - base_weight)
                / (model.subset_length(candidate) - base_length);
            let better = match best {
                None => true,
                Some((s, b)) => {
                    let tol = SLOPE_TIE_TOL * s.abs().max(slope.abs()).max(f64::MIN_POSITIVE);
                    if (slope - s).abs() <= tol {
                        candidate.len() > b.len()
                            || (candidate.len() == b.len() && candidate.lex_cmp(b).is_lt())
                    } else {
                        slope > s
                    }
                }
            };
            if better {
                best = Some((slope, candidate));
            }
        }
        let (_, next) = best.expect("a strict superset exists");
        order.extend(Subset(next.0 & !current.0).blocks());
        current = next;
    }
    Chain { order }
}

/// Result of the quantum max–min formula.
#[derive(Debug, Clone, PartialEq)]
pub struct NonHierQuantumResult {
    pub value: f64,
    /// Maximizing terminal set `D` (smallest mask among ties).
    pub terminal: Subset,
    /// Minimizing chain ending at `terminal`.
    pub chain: Chain,
}

/// Quantum pressure
/// `max_D [min_{S ends at D} Φ_D(β, S)] + Σ_{k ∉ D} L_k p(β, 𝔟)`.
///
/// `Φ_D(β, S)` is the classical pressure of the unnormalized chain GREM on
/// `[0, L(D)]`; `D = ∅` contributes `p(β, 𝔟)`.
pub fn quantum_nonhier_pressure(model: &NonHierModel, beta: f64, field: &FieldSpec) -> Result<NonHierQuantumResult> {
    quantum_nonhier_pressure_with_paramagnet(model, beta, paramagnetic_pressure(field, beta))
}

pub fn quantum_nonhier_pressure_with_paramagnet(
    model: &NonHierModel,
    beta: f64,
    p: f64,
) -> Result<NonHierQuantumResult> {
    model.check_enumerable()?;
    let per_set: Vec<(f64, Vec<usize>)> = (0..=model.full_set().0)
        .into_par_iter()
        .map(|mask| {
            let set = Subset(mask);
            let (phi, order) = min_over_orderings(model, set, beta);
            (phi + (1.0 - model.subset_length(set)) * p, order)
        })
        .collect();
    let mut best = 0usize;
    for (mask, entry) in per_set.iter().enumerate() {
        if entry.0 > per_set[best].0 {
            best = mask;
        }
    }
    let (value, order) = per_set[best].clone();
    Ok(NonHierQuantumResult {
        value,
        terminal: Subset(best as u32),
        chain: Chain { order },
    })
}

/// Quantum pressure through the single greedy chain: the quantum GREM
/// formula on the hull of `greedy_chain(model)`.
pub fn greedy_quantum_pressure(model: &NonHierModel, beta: f64, field: &FieldSpec) -> QuantumPressureResult {
    let hull = chain_hull(model, &greedy_chain(model)).expect("greedy chain is full");
    qgrem_pressure_with_paramagnet(&hull, beta, paramagnetic_pressure(field, beta))
}

/// `true` when `upper` lies above `lower` (within `tol`) at every support
/// point of both hulls.
pub fn hull_dominates(upper: &ConcaveHull, lower: &ConcaveHull, tol: f64) -> bool {
    upper
        .support()
        .iter()
        .chain(lower.support())
        .all(|&y| upper.envelope_at(y) >= lower.envelope_at(y) - tol)
}
