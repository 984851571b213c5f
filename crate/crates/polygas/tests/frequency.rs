use nalgebra::{Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polygas::cross_section::{CrossSectionModel, GasSpec};
use polygas::frequency::{
    coercivity_fit, eval_nu, monotony_check, nu_profile, GridSpec, Trend,
};
use polygas::kinematics::ParticleState;
use polygas::quad::QuadratureSpec;
use polygas::Vec3;

fn state(v: [f64; 3], i: f64) -> ParticleState {
    ParticleState::new(Vec3::new(v[0], v[1], v[2]), i)
}

/// Closed form of the constant frequency of a gamma = 0 total-energy model:
/// `3 c 2 pi Beta(alpha + 1, alpha + 1) Beta(3/2, 2 alpha + 2)`.
fn flat_nu(alpha: f64, c: f64) -> f64 {
    use statrs::function::beta::beta;
    3.0 * c * 2.0 * std::f64::consts::PI * beta(alpha + 1.0, alpha + 1.0)
        * beta(1.5, 2.0 * alpha + 2.0)
}

#[test]
fn maxwell_frequency_is_the_constant_8_pi_over_5() {
    let gas = GasSpec::new(0.0, 0.0).unwrap();
    let model = CrossSectionModel::total_energy(1.0);
    let quad = QuadratureSpec::default().with_samples(1 << 18).with_seed(11);
    let expected = 8.0 * std::f64::consts::PI / 5.0;
    assert!((flat_nu(0.0, 1.0) - expected).abs() < 1e-12 * expected);

    for s in [
        state([0.0, 0.0, 0.0], 0.0),
        state([2.0, -1.0, 0.5], 3.0),
        state([0.0, 0.0, 4.0], 0.2),
    ] {
        let est = eval_nu(&s, &gas, &model, &quad).unwrap();
        let z = (est.value - expected).abs() / est.std_err;
        assert!(
            z < 4.0,
            "nu at {s:?} drifted from 8 pi / 5: {} +/- {} (z = {z:.2})",
            est.value,
            est.std_err
        );
        assert!(
            (est.value - expected).abs() < 0.01 * expected,
            "nu at {s:?} missed the 1% band: {}",
            est.value
        );
    }
}

#[test]
fn half_integer_alpha_matches_the_beta_function_oracle() {
    // alpha = 1/2, gamma = 0: the fraction integrals reduce to
    // Beta(3/2, 3/2) Beta(3/2, 3), giving nu = 4 pi^2 / 35 everywhere.
    let gas = GasSpec::new(0.5, 0.0).unwrap();
    let model = CrossSectionModel::total_energy(1.0);
    let quad = QuadratureSpec::default().with_samples(1 << 18).with_seed(12);
    let expected = 4.0 * std::f64::consts::PI.powi(2) / 35.0;
    assert!((flat_nu(0.5, 1.0) - expected).abs() < 1e-12 * expected);

    for s in [state([0.0, 0.0, 0.0], 0.0), state([1.2, 0.0, -0.7], 0.9)] {
        let est = eval_nu(&s, &gas, &model, &quad).unwrap();
        let z = (est.value - expected).abs() / est.std_err;
        assert!(z < 4.0, "z = {z:.2} against the Beta oracle");
        assert!((est.value - expected).abs() < 0.01 * expected);
    }
}

#[test]
fn collision_frequency_is_rotation_invariant() {
    let gas = GasSpec::new(0.5, 1.0).unwrap();
    let model = CrossSectionModel::total_energy(1.0);
    let quad = QuadratureSpec::default().with_samples(1 << 18).with_seed(13);
    let s = state([1.3, -0.4, 0.8], 0.9);
    let base = eval_nu(&s, &gas, &model, &quad).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let axis = Unit::new_normalize(Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ));
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let rotated = ParticleState::new(Rotation3::from_axis_angle(&axis, angle) * s.v, s.i);
        let est = eval_nu(&rotated, &gas, &model, &quad).unwrap();
        let z = (est.value - base.value).abs() / est.std_err.hypot(base.std_err);
        assert!(
            z < 4.0,
            "nu changed under rotation: {} vs {} (z = {z:.2})",
            est.value,
            base.value
        );
    }
}

#[test]
fn coercivity_holds_on_the_reference_window() {
    // Hard potential on the window [0, 6] x [0, 10]: the frequency dominates
    // |v|^gamma + I^{gamma/2} + 1 with a uniformly positive constant.
    let gas = GasSpec::new(0.5, 1.0).unwrap();
    let model = CrossSectionModel::total_energy(1.0);
    let quad = QuadratureSpec::default().with_samples(1 << 17).with_seed(14);
    let report = coercivity_fit(&gas, &model, &GridSpec::default(), &quad).unwrap();

    assert!(report.passed, "lower margin {}", report.lower_margin);
    assert!(report.lower_margin > 0.0);
    assert!(report.c_hat >= report.lower_margin);
    assert_eq!(report.points.len(), 100);
    for p in &report.points {
        assert!(p.ratio > 0.0, "ratio at ({}, {}) = {}", p.speed, p.energy, p.ratio);
    }
}

#[test]
fn flat_kernels_pin_the_coercivity_constant() {
    // gamma = 0 makes both nu and the comparison weight constant, so the
    // fitted constant must land on nu / 3 exactly (up to sampling error).
    let gas = GasSpec::new(0.0, 0.0).unwrap();
    let model = CrossSectionModel::total_energy(1.0);
    let quad = QuadratureSpec::default().with_samples(1 << 16).with_seed(15);
    let report = coercivity_fit(&gas, &model, &GridSpec::default(), &quad).unwrap();
    let expected = 8.0 * std::f64::consts::PI / 5.0 / 3.0;

    assert!(report.passed);
    assert!((report.c_hat - expected).abs() < 0.01 * expected);
}

#[test]
fn coercivity_needs_a_dense_grid() {
    let gas = GasSpec::new(0.5, 1.0).unwrap();
    let model = CrossSectionModel::total_energy(1.0);
    let grid = GridSpec {
        n_v: 5,
        n_i: 5,
        ..GridSpec::default()
    };
    let err = coercivity_fit(&gas, &model, &grid, &QuadratureSpec::default()).unwrap_err();
    assert!(err.to_string().contains("at least 10"));
}

#[test]
fn hard_potentials_grow_along_both_axes() {
    let gas = GasSpec::new(0.5, 1.0).unwrap();
    let model = CrossSectionModel::total_energy(1.0);
    let quad = QuadratureSpec::default().with_samples(1 << 16).with_seed(16);
    let report = monotony_check(&gas, &model, &GridSpec::default(), &quad).unwrap();

    assert_eq!(report.along_speed.trend, Trend::MonotoneIncreasing);
    assert_eq!(report.along_energy.trend, Trend::MonotoneIncreasing);
    assert_eq!(report.along_speed.falls, 0);
    assert_eq!(report.along_energy.falls, 0);

    // The verdict is a statement about the operator, not about one sample
    // budget: doubling the samples must not flip it.
    let doubled = monotony_check(
        &gas,
        &model,
        &GridSpec::default(),
        &quad.with_samples(1 << 17),
    )
    .unwrap();
    assert_eq!(doubled.along_speed.trend, Trend::MonotoneIncreasing);
    assert_eq!(doubled.along_energy.trend, Trend::MonotoneIncreasing);
}

#[test]
fn maxwell_rates_are_flat_along_both_axes() {
    // gamma = 0: the integrand never sees (v, I), so with shared sampler
    // streams every grid difference is exactly zero, not merely within noise.
    let gas = GasSpec::new(0.5, 0.0).unwrap();
    let model = CrossSectionModel::total_energy(1.0);
    let quad = QuadratureSpec::default().with_samples(1 << 16).with_seed(17);
    let report = monotony_check(&gas, &model, &GridSpec::default(), &quad).unwrap();

    assert_eq!(report.along_speed.trend, Trend::Constant);
    assert_eq!(report.along_energy.trend, Trend::Constant);
    assert_eq!(report.along_speed.rises + report.along_speed.falls, 0);
    assert_eq!(report.along_energy.rises + report.along_energy.falls, 0);
}

#[test]
fn frequency_profiles_are_bitwise_reproducible() {
    let gas = GasSpec::new(0.5, 1.0).unwrap();
    let model = CrossSectionModel::total_energy(1.0);
    let grid = GridSpec {
        n_v: 4,
        n_i: 3,
        ..GridSpec::default()
    };
    let quad = QuadratureSpec::default().with_samples(1 << 15).with_seed(18);

    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| nu_profile(&gas, &model, &grid, &quad).unwrap())
    };
    let a = run(1);
    let b = run(4);

    assert_eq!(a.values.len(), 4);
    assert_eq!(a.values[0].len(), 3);
    for (row_a, row_b) in a.values.iter().zip(&b.values) {
        for (ea, eb) in row_a.iter().zip(row_b) {
            assert!(ea.value > 0.0);
            assert_eq!(ea.value.to_bits(), eb.value.to_bits());
            assert_eq!(ea.std_err.to_bits(), eb.std_err.to_bits());
        }
    }
}
