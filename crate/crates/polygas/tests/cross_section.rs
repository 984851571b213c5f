//! Assumption certification across the built-in cross-section models: which
//! structural properties each model satisfies, and where each one honestly
//! fails.

use polygas::cross_section::{
    verify_assumptions, AssumptionReport, CrossSectionModel, CustomModel, GasSpec,
    IntegrabilityVerdict,
};
use polygas::kinematics::{CollisionParams, ParticleState};
use polygas::quad::QuadratureSpec;
use std::sync::Arc;

fn probes() -> QuadratureSpec {
    QuadratureSpec::default().with_samples(1 << 16).with_seed(41)
}

fn report(model: &CrossSectionModel, alpha: f64, gamma: f64) -> AssumptionReport {
    let gas = GasSpec::new(alpha, gamma).unwrap();
    verify_assumptions(model, &gas, &probes()).unwrap()
}

#[test]
fn total_energy_model_passes_everything_at_gamma_zero() {
    let model = CrossSectionModel::total_energy(1.0);
    let rep = report(&model, 0.5, 0.0);
    assert!(rep.sandwich_lower.passed, "lower: {:?}", rep.sandwich_lower);
    assert!(rep.sandwich_upper.passed, "upper: {:?}", rep.sandwich_upper);
    assert!(rep.envelope_symmetry.passed);
    assert!(rep.micro_exchange.passed);
    assert!(rep.micro_post.passed, "post: {:?}", rep.micro_post);
    assert_eq!(rep.k2_integrability.verdict, IntegrabilityVerdict::Finite);
    assert_eq!(rep.k3_integrability.verdict, IntegrabilityVerdict::Finite);
    assert_eq!(
        rep.frequency_integrability.verdict,
        IntegrabilityVerdict::Finite
    );
}

#[test]
fn total_energy_model_keeps_sandwich_but_loses_post_identity_at_positive_gamma() {
    // The comparison sum is the model itself, so the sandwich is an equality;
    // but the sum of separate powers is not a collision invariant.
    let model = CrossSectionModel::total_energy(1.0);
    let rep = report(&model, 0.5, 1.0);
    assert!(rep.sandwich_lower.passed);
    assert!(rep.sandwich_upper.passed);
    assert!(rep.micro_exchange.passed);
    assert!(!rep.micro_post.passed);
    assert!(rep.micro_post.worst > 1e-3);
}

#[test]
fn total_power_variant_trades_sandwich_for_exact_post_identity() {
    let model = CrossSectionModel::TotalEnergy {
        c: 1.0,
        power_of_total: true,
    };

    // Total pair energy is conserved, so the post identity is exact at every
    // growth rate...
    let rep = report(&model, 0.5, 1.0);
    assert!(rep.micro_exchange.passed);
    assert!(rep.micro_post.passed, "post: {:?}", rep.micro_post);
    // ...but a power of the total is not comparable to the sum of powers.
    assert!(!rep.sandwich_lower.passed);
    assert!(!rep.sandwich_upper.passed);

    // At gamma = 0 both sides are constants and everything is exact.
    let rep0 = report(&model, 0.5, 0.0);
    assert!(rep0.sandwich_lower.passed);
    assert!(rep0.sandwich_upper.passed);
    assert!(rep0.micro_post.passed);
}

#[test]
fn partitioned_model_passes_all_probe_checks_at_positive_gamma() {
    // Each partitioned term sees an invariant energy share, so the model is
    // exactly collision invariant, and its envelopes sandwich it termwise.
    let model = CrossSectionModel::Partitioned { c: 1.0 };
    let rep = report(&model, 0.5, 1.0);
    assert!(rep.sandwich_lower.passed, "lower: {:?}", rep.sandwich_lower);
    assert!(rep.sandwich_upper.passed, "upper: {:?}", rep.sandwich_upper);
    assert!(rep.envelope_symmetry.passed);
    assert!(rep.micro_exchange.passed);
    assert!(rep.micro_post.passed, "post: {:?}", rep.micro_post);
    assert_eq!(
        rep.frequency_integrability.verdict,
        IntegrabilityVerdict::Finite
    );
}

#[test]
fn angular_weighted_model_fails_only_the_grazing_upper_bound() {
    // Without the cosine factor the model stays bounded away from zero at
    // grazing angles, where the upper envelope vanishes.
    let model = CrossSectionModel::AngularWeighted { b: 1.0 };
    let rep = report(&model, 0.5, 1.0);
    assert!(rep.sandwich_lower.passed, "lower: {:?}", rep.sandwich_lower);
    assert!(!rep.sandwich_upper.passed);
    assert!(rep.envelope_symmetry.passed);
    assert!(rep.micro_exchange.passed);
    assert!(rep.micro_post.passed);
}

#[test]
fn kernel_integrability_fails_exactly_at_the_flat_internal_exponent() {
    // alpha = 0 makes the fraction weight (r(1-r))^{-1}, which is a genuine
    // logarithmic divergence; any alpha > 0 with gamma = 0 is integrable.
    let model = CrossSectionModel::total_energy(1.0);

    let flat = report(&model, 0.0, 0.0);
    assert_eq!(flat.k2_integrability.verdict, IntegrabilityVerdict::Divergent);
    assert_eq!(flat.k3_integrability.verdict, IntegrabilityVerdict::Divergent);
    assert_eq!(
        flat.frequency_integrability.verdict,
        IntegrabilityVerdict::Finite
    );
    let values = &flat.k2_integrability.values;
    for pair in values.windows(2) {
        assert!(pair[1] > pair[0] * 1.2, "ladder should keep growing: {values:?}");
    }

    let curved = report(&model, 0.5, 0.0);
    assert_eq!(curved.k2_integrability.verdict, IntegrabilityVerdict::Finite);
    assert_eq!(curved.k3_integrability.verdict, IntegrabilityVerdict::Finite);
}

#[test]
fn k2_and_k3_conditions_always_agree_on_the_verdict() {
    // The two kernels see mirror-image fraction weights, so their conditions
    // hold or fail together even though the integral values differ.
    for model in [
        CrossSectionModel::total_energy(1.0),
        CrossSectionModel::Partitioned { c: 1.0 },
        CrossSectionModel::AngularWeighted { b: 1.0 },
    ] {
        for alpha in [0.0, 0.5, 1.0, 2.0] {
            for gamma in [0.0, 0.5, 1.0, 2.0] {
                let gas = GasSpec::new(alpha, gamma).unwrap();
                let k2 = polygas::cross_section::k2_condition_ladder(&model, &gas);
                let k3 = polygas::cross_section::k3_condition_ladder(&model, &gas);
                assert_eq!(
                    k2.verdict, k3.verdict,
                    "{model:?} alpha={alpha} gamma={gamma}: k2 {:?} vs k3 {:?}",
                    k2.values, k3.values
                );
            }
        }
    }
}

#[test]
fn custom_model_reproduces_the_built_in_it_wraps() {
    let inner = CrossSectionModel::total_energy(0.7);
    let inner_phi = inner.clone();
    let inner_psi = inner.clone();
    let inner_eval = inner.clone();
    let custom = CrossSectionModel::Custom(CustomModel {
        eval: Arc::new(
            move |gas: &GasSpec, s: &ParticleState, s_star: &ParticleState, p: &CollisionParams| {
                inner_eval.eval_b(gas, s, s_star, p)
            },
        ),
        phi: Arc::new(move |gas: &GasSpec, r: f64, rk: f64| inner_phi.phi_gamma(gas, r, rk)),
        psi: Arc::new(move |gas: &GasSpec, r: f64, rk: f64| inner_psi.psi_gamma(gas, r, rk)),
        has_cosine_factor: true,
    });

    let direct = report(&inner, 0.5, 1.0);
    let wrapped = report(&custom, 0.5, 1.0);
    assert_eq!(direct.sandwich_lower.passed, wrapped.sandwich_lower.passed);
    assert_eq!(direct.sandwich_upper.passed, wrapped.sandwich_upper.passed);
    assert_eq!(direct.micro_post.passed, wrapped.micro_post.passed);
    assert_eq!(direct.k2_integrability, wrapped.k2_integrability);
    assert!((direct.micro_post.worst - wrapped.micro_post.worst).abs() < 1e-12);
}

#[test]
fn reports_are_bitwise_reproducible() {
    let model = CrossSectionModel::Partitioned { c: 1.0 };
    let gas = GasSpec::new(0.5, 1.0).unwrap();
    let a = verify_assumptions(&model, &gas, &probes()).unwrap();
    let b = verify_assumptions(&model, &gas, &probes()).unwrap();
    assert_eq!(a, b);
}
