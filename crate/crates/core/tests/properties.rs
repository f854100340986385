use proptest::prelude::*;
use qgrem::classical::{classical_pressure, crem_truncated_pressure, partial_pressures};
use qgrem::model::{concave_hull, ln_2cosh, ConcaveHull, DistributionSpec, Envelope, FieldSpec, SmoothEnvelope};
use qgrem::nonhier::{chain_grem, Chain, NonHierModel, NonHierModelFile, Subset};
use qgrem::quantum::{
    magnetization, qcrem_closed_form, qcrem_pressure, qgrem_indicator_pressure, qgrem_pressure, Maximizer,
};

fn step_spec() -> impl Strategy<Value = DistributionSpec> {
    (1usize..7)
        .prop_flat_map(|m| {
            (
                proptest::collection::vec(0.01f64..0.99, m - 1),
                proptest::collection::vec(0.0f64..1.0, m),
            )
        })
        .prop_filter_map("degenerate", |(mut x, mut a)| {
            x.sort_by(f64::total_cmp);
            x.dedup_by(|p, q| (*p - *q).abs() < 1e-3);
            x.push(1.0);
            a.truncate(x.len());
            while a.len() < x.len() {
                a.push(0.5);
            }
            let total: f64 = a.iter().sum();
            if total < 1e-6 {
                return None;
            }
            a.iter_mut().for_each(|v| *v /= total);
            DistributionSpec::step(&x, &a).ok()
        })
}

fn smooth_envelope() -> impl Strategy<Value = SmoothEnvelope> {
    (2usize..25)
        .prop_flat_map(|m| (proptest::collection::vec(0.0f64..1.0, m), proptest::collection::vec(0.0f64..4.0, m)))
        .prop_filter_map("degenerate", |(mut inner, mut slopes)| {
            inner.push(0.0);
            inner.push(1.0);
            inner.sort_by(f64::total_cmp);
            inner.dedup_by(|p, q| (*p - *q).abs() < 1e-6);
            slopes.resize(inner.len(), 0.0);
            slopes.sort_by(|a, b| b.total_cmp(a));
            SmoothEnvelope::from_derivative(&inner, &slopes).ok()
        })
}

/// Brute-force concave majorant value at `y`: the best chord between two
/// points of `(0, 0) ∪ points` straddling `y`.
fn brute_majorant(points: &[(f64, f64)], y: f64) -> f64 {
    let mut all = vec![(0.0, 0.0)];
    all.extend_from_slice(points);
    let mut best = f64::NEG_INFINITY;
    for &(x0, a0) in &all {
        for &(x1, a1) in &all {
            if x0 <= y && y <= x1 {
                let v = if x1 > x0 { a0 + (a1 - a0) * (y - x0) / (x1 - x0) } else { a0 };
                best = best.max(v);
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn hull_is_least_concave_majorant(spec in step_spec()) {
        let hull = concave_hull(&spec).unwrap();
        let slopes = hull.slopes();
        prop_assert!(slopes.windows(2).all(|w| w[1] < w[0]));
        prop_assert!((hull.value_at(1.0) - 1.0).abs() < 1e-12);
        for &(x, _) in spec.points() {
            prop_assert!((hull.value_at(x) - brute_majorant(spec.points(), x)).abs() < 1e-12);
        }
    }

    #[test]
    fn densities_strictly_decrease(spec in step_spec(), beta in 0.0f64..4.0) {
        let table = partial_pressures(&concave_hull(&spec).unwrap(), beta);
        prop_assert!(table.entries.windows(2).all(|w| w[1].density() < w[0].density()));
    }

    #[test]
    fn quantum_pressure_bounds(spec in step_spec(), beta in 0.0f64..3.0, gamma in 0.0f64..3.0) {
        let hull = concave_hull(&spec).unwrap();
        let field = FieldSpec::constant(gamma).unwrap();
        let q = qgrem_pressure(&hull, beta, &field).value;
        prop_assert!(q >= classical_pressure(&hull, beta) - 1e-14);
        prop_assert!(q >= ln_2cosh(beta * gamma) - 1e-14);
        let larger = qgrem_pressure(&hull, beta, &FieldSpec::constant(gamma + 0.1).unwrap()).value;
        prop_assert!(larger >= q - 1e-14);
    }

    #[test]
    fn indicator_form_agrees(spec in step_spec(), beta in 0.01f64..3.0, gamma in 0.0f64..3.0) {
        let hull = concave_hull(&spec).unwrap();
        let field = FieldSpec::constant(gamma).unwrap();
        let a = qgrem_pressure(&hull, beta, &field);
        let (b, phases) = qgrem_indicator_pressure(&hull, beta, &field).unwrap();
        prop_assert!((a.value - b).abs() < 1e-12);
        // classical blocks form a prefix
        let k = phases.iter().take_while(|p| **p == qgrem::quantum::BlockPhase::Classical).count();
        prop_assert!(phases[k..].iter().all(|p| *p == qgrem::quantum::BlockPhase::Paramagnetic));
    }

    #[test]
    fn qcrem_sup_dominates_every_truncation(env in smooth_envelope(), beta in 0.05f64..3.0, gamma in 0.0f64..3.0, z in 0.0f64..1.0) {
        let p = ln_2cosh(beta * gamma);
        let sup = qcrem_pressure(&env, beta, &FieldSpec::constant(gamma).unwrap());
        let at_z = crem_truncated_pressure(&env, beta, z).unwrap() + (1.0 - z) * p;
        prop_assert!(at_z <= sup.value + 1e-12);
        let Maximizer::Fraction(zs) = sup.argmax else { panic!("CREM maximizer is a fraction") };
        let at_star = crem_truncated_pressure(&env, beta, zs).unwrap() + (1.0 - zs) * p;
        prop_assert!((at_star - sup.value).abs() < 1e-12);
    }

    #[test]
    fn magnetization_is_monotone_and_bounded(env in smooth_envelope(), beta in 0.05f64..3.0, gamma in 0.0f64..3.0) {
        let m = magnetization(&env, beta, gamma);
        prop_assert!(m >= 0.0 && m <= (beta * gamma).tanh() + 1e-15);
        prop_assert!(magnetization(&env, beta, gamma + 0.05) >= m - 1e-12);
    }

    #[test]
    fn subset_key_round_trip(mask in 1u32..1024) {
        let s = Subset(mask);
        prop_assert_eq!(Subset::parse_key(&s.key(), 10).unwrap(), s);
    }

    #[test]
    fn chain_weights_partition_total(weights in proptest::collection::vec(0.0f64..1.0, 15), order in Just(()).prop_perturb(|_, mut rng| {
        let mut v: Vec<usize> = (0..4).collect();
        for i in (1..4).rev() { v.swap(i, rng.random_range(0..=i)); }
        v
    })) {
        let mut dense = vec![0.0];
        dense.extend(weights);
        let total: f64 = dense.iter().sum();
        prop_assume!(total > 1e-6);
        dense.iter_mut().for_each(|w| *w /= total);
        let model = NonHierModel::new(vec![0.25; 4], dense).unwrap();
        let g = chain_grem(&model, &Chain::new(order, 4).unwrap()).unwrap();
        prop_assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(g.weights.iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn nonhier_file_round_trip(weights in proptest::collection::vec(0.0f64..1.0, 7)) {
        let mut dense = vec![0.0];
        dense.extend(weights);
        let total: f64 = dense.iter().sum();
        prop_assume!(total > 1e-6);
        dense.iter_mut().for_each(|w| *w /= total);
        let model = NonHierModel::new(vec![0.2, 0.3, 0.5], dense).unwrap();
        let json = serde_json::to_string(&NonHierModelFile::from(&model)).unwrap();
        let back = NonHierModel::try_from(serde_json::from_str::<NonHierModelFile>(&json).unwrap()).unwrap();
        prop_assert_eq!(back, model);
    }
}

#[test]
fn closed_form_matches_grid_maximization() {
    // independent oracle: maximize the objective over a fine z-grid
    let envs: Vec<Box<dyn Fn() -> Box<dyn EnvelopeDyn>>> = vec![
        Box::new(|| Box::new(SmoothEnvelope::sample(|x| 2.0 - 2.0 * x, 40).unwrap())),
        Box::new(|| Box::new(SmoothEnvelope::sample(|x| 1.5 - x, 40).unwrap())),
        Box::new(|| Box::new(concave_hull(&DistributionSpec::step(&[0.3, 0.6, 1.0], &[0.5, 0.3, 0.2]).unwrap()).unwrap())),
    ];
    for make in &envs {
        let env = make();
        for beta in [0.4, 0.9, 1.3, 2.2] {
            for gamma in [0.0, 0.3, 0.7, 1.1, 1.6, 2.5] {
                let p = ln_2cosh(beta * gamma);
                let steps = 20_000;
                let grid_max = (0..=steps)
                    .map(|i| {
                        let z = i as f64 / steps as f64;
                        env.truncated(beta, z) + (1.0 - z) * p
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                let closed = env.closed_form(beta, gamma);
                assert!(grid_max <= closed + 1e-12, "{beta} {gamma}");
                assert!(closed - grid_max < 1e-6, "{beta} {gamma}: {closed} vs {grid_max}");
            }
        }
    }
}

/// Object-safe view used to loop over envelope types.
trait EnvelopeDyn {
    fn truncated(&self, beta: f64, z: f64) -> f64;
    fn closed_form(&self, beta: f64, gamma: f64) -> f64;
}

impl<E: Envelope> EnvelopeDyn for E {
    fn truncated(&self, beta: f64, z: f64) -> f64 {
        crem_truncated_pressure(self, beta, z).unwrap()
    }
    fn closed_form(&self, beta: f64, gamma: f64) -> f64 {
        qcrem_closed_form(self, beta, gamma)
    }
}

#[test]
fn rem_quantum_value_is_max_of_branches() {
    let rem: ConcaveHull = concave_hull(&DistributionSpec::rem()).unwrap();
    for (beta, gamma) in [(1.2, 1.0), (0.5, 0.2), (2.0, 3.0)] {
        let expected = classical_pressure(&rem, beta).max(ln_2cosh(beta * gamma));
        let got = qgrem_pressure(&rem, beta, &FieldSpec::constant(gamma).unwrap()).value;
        assert_eq!(got, expected);
    }
}
