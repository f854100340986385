use qgrem::model::{ln_2cosh, DistributionSpec, FieldSpec};
use qgrem::nonhier::{NonHierModel, Subset};
use qgrem::verify::{
    convergence_study, exact_pressure, overlap, sample_instance, stochastic_pressure, Disorder, Method,
    StochasticConfig, StudyOptions,
};

fn grem() -> DistributionSpec {
    DistributionSpec::step(&[0.5, 1.0], &[0.7, 0.3]).unwrap()
}

#[test]
fn covariance_matches_overlap_profile() {
    // E[U(σ)U(σ')] = N A(q(σ, σ')) with A the step function
    let n = 4;
    let spec = DistributionSpec::step(&[0.25, 0.75, 1.0], &[0.2, 0.5, 0.3]).unwrap();
    let disorder = Disorder::Hierarchical(spec.clone());
    let field = FieldSpec::constant(0.0).unwrap();
    let reps = 20_000;
    let dim = 1 << n;
    let mut acc = vec![0.0; dim * dim];
    let mut acc2 = vec![0.0; dim * dim];
    for r in 0..reps {
        let inst = sample_instance(&disorder, &field, n, r).unwrap();
        let u = inst.potential();
        for a in 0..dim {
            for b in 0..dim {
                let v = u[a] * u[b];
                acc[a * dim + b] += v;
                acc2[a * dim + b] += v * v;
            }
        }
    }
    for a in 0..dim {
        for b in 0..dim {
            let mean = acc[a * dim + b] / reps as f64;
            let var = acc2[a * dim + b] / reps as f64 - mean * mean;
            let se = (var / reps as f64).sqrt();
            let expected = n as f64 * spec.value_at(overlap(a, b, n));
            assert!((mean - expected).abs() <= 3.5 * se + 1e-12, "({a},{b}): {mean} vs {expected} ± {se}");
        }
    }
}

#[test]
fn rem_variance_is_n() {
    let disorder = Disorder::Hierarchical(DistributionSpec::rem());
    let field = FieldSpec::constant(0.0).unwrap();
    let reps = 20_000;
    let mut sum2 = 0.0;
    for r in 0..reps {
        let u = sample_instance(&disorder, &field, 2, r).unwrap().potential().to_vec();
        sum2 += u.iter().map(|v| v * v).sum::<f64>() / 4.0;
    }
    let var = sum2 / reps as f64;
    assert!((var - 2.0).abs() < 0.06, "{var}");
}

#[test]
fn nonhier_potential_has_subset_covariance() {
    // two blocks of one spin each; U = sqrt(2)(sqrt(a1) X^1_{σ1} + sqrt(a2) X^2_{σ2} + sqrt(a12) X^{12}_{σ})
    let model = NonHierModel::from_weights(
        vec![0.5, 0.5],
        &[(Subset(0b01), 0.2), (Subset(0b10), 0.3), (Subset(0b11), 0.5)],
    )
    .unwrap();
    let disorder = Disorder::NonHierarchical(model);
    let field = FieldSpec::constant(0.0).unwrap();
    let reps = 40_000;
    let (mut share_first, mut share_second) = (0.0, 0.0);
    for r in 0..reps {
        let u = sample_instance(&disorder, &field, 2, r).unwrap().potential().to_vec();
        share_first += u[0b00] * u[0b01];
        share_second += u[0b00] * u[0b10];
    }
    let (f, s) = (share_first / reps as f64, share_second / reps as f64);
    let se = (5.0 / reps as f64).sqrt();
    assert!((f - 0.4).abs() < 4.0 * se, "{f}");
    assert!((s - 0.6).abs() < 4.0 * se, "{s}");
}

#[test]
fn exact_pressure_is_convex_in_beta() {
    let inst = sample_instance(&Disorder::Hierarchical(grem()), &FieldSpec::gaussian(0.3, 1.0).unwrap(), 6, 5).unwrap();
    let h = 0.05;
    let values: Vec<f64> = (0..60).map(|k| exact_pressure(&inst, k as f64 * h).unwrap()).collect();
    for w in values.windows(3) {
        assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-9);
    }
}

#[test]
fn global_field_sign_flip_keeps_pressure() {
    let inst = sample_instance(&Disorder::Hierarchical(grem()), &FieldSpec::gaussian(0.5, 1.0).unwrap(), 7, 8).unwrap();
    let flipped = inst.with_flipped_fields(&[true; 7]).unwrap();
    for beta in [0.5, 1.2, 2.5] {
        let a = exact_pressure(&inst, beta).unwrap();
        let b = exact_pressure(&flipped, beta).unwrap();
        assert!(((a - b) / a).abs() < 1e-10);
    }
}

#[test]
fn paramagnet_is_exact_for_every_n() {
    for n in 1..=8 {
        let inst = sample_instance(&Disorder::Paramagnet, &FieldSpec::constant(0.9).unwrap(), n, 0).unwrap();
        assert!((exact_pressure(&inst, 1.3).unwrap() - ln_2cosh(1.3 * 0.9)).abs() < 1e-12);
    }
}

#[test]
fn stochastic_agrees_with_exact_at_n10() {
    let cfg = StochasticConfig::default();
    for (k, disorder) in [Disorder::Hierarchical(DistributionSpec::rem()), Disorder::Hierarchical(grem())]
        .iter()
        .enumerate()
    {
        let inst = sample_instance(disorder, &FieldSpec::constant(1.0).unwrap(), 10, 40 + k as u64).unwrap();
        let exact = exact_pressure(&inst, 1.2).unwrap();
        let est = stochastic_pressure(&inst, 1.2, &cfg).unwrap();
        assert!(est.converged);
        let bar = est.std_error + est.truncation_bound;
        assert!((est.pressure - exact).abs() <= 3.0 * bar, "{} vs {exact} ± {bar}", est.pressure);
    }
}

#[test]
fn study_is_reproducible_and_reports_rows() {
    let field = FieldSpec::gaussian(1.0, 0.2).unwrap();
    let options = StudyOptions {
        method: Method::Exact,
        freeze_field: true,
    };
    let a = convergence_study(&Disorder::Hierarchical(grem()), &field, 1.0, &[4, 6], 8, 3, &options).unwrap();
    let b = convergence_study(&Disorder::Hierarchical(grem()), &field, 1.0, &[4, 6], 8, 3, &options).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 2);
    assert_eq!(a.samples.len(), 16);
    assert!(a.rows.iter().all(|r| r.std_dev > 0.0));
}
