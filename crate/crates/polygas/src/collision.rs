//! The bilinear collision operator in both of its parametrizations: the
//! collision-parameter form over `Delta = (0,1)^2 x S^2 x R_+ x R^3`, and the
//! transfer form over `(G, E, v', I')` with the microreversible rate `W`.
//!
//! Both are Monte Carlo quadratures against importance proposals matched to
//! the equilibrium weight (Gaussian velocities, Gamma internal energies), so
//! every importance ratio stays bounded for Maxwellian-type distributions.
//! The two parametrizations share no integrand algebra and serve as
//! independent oracles for each other.

use statrs::function::gamma::gamma;

use crate::cross_section::{CrossSectionModel, GasSpec};
use crate::equilibrium::Distribution;
use crate::kinematics::{post_collision, CollisionParams, ParticleState};
use crate::quad::{self, Estimate, NanWatch, QuadratureSpec};
use crate::{Error, Result, Vec3};

pub(crate) const NON_FINITE_CAUSE: &str =
    "f/I^alpha non-finite (f > 0 with I = 0 on the support)";

/// A point of the collision-parameter domain
/// `Delta = (0,1)^2 x S^2 x R_+ x R^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaPoint {
    pub r: f64,
    pub r_kin: f64,
    pub omega: Vec3,
    pub i_star: f64,
    pub v_star: Vec3,
}

/// A sampled `Delta` point with the inverse density of the proposal that
/// produced it; summing `integrand(point) * weight` over samples estimates
/// the `Delta` integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPoint {
    pub point: DeltaPoint,
    pub weight: f64,
}

fn open_unit(rng: &mut impl rand::Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Draws a `Delta` point from the standard proposal: uniform fractions on
/// the `margin`-inset square, uniform direction, standard normal partner
/// velocity, and Gamma(alpha + 1) partner energy (the weight every integrand
/// of the theory carries after symmetrization).
pub fn sample_delta(rng: &mut rand_chacha::ChaCha8Rng, alpha: f64, margin: f64) -> WeightedPoint {
    let width = 1.0 - 2.0 * margin;
    let r = margin + width * open_unit(rng);
    let r_kin = margin + width * open_unit(rng);
    let omega = quad::sample_unit_sphere(rng);
    let v_star = quad::sample_std_normal3(rng);
    let mut i_star = quad::sample_energy(rng, alpha);
    while i_star <= 0.0 {
        i_star = quad::sample_energy(rng, alpha);
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let weight = width
        * width
        * 2.0
        * two_pi
        * two_pi.powf(1.5)
        * gamma(alpha + 1.0)
        * i_star.powf(-alpha)
        * (0.5 * v_star.norm_squared() + i_star).exp();
    WeightedPoint {
        point: DeltaPoint {
            r,
            r_kin,
            omega,
            i_star,
            v_star,
        },
        weight,
    }
}

/// `f/I^alpha` with the distribution treated as zero outside its declared
/// box. Infinite or NaN results (a positive `f` against `I = 0`) are the
/// caller's error signal.
fn over_internal(f: &Distribution, s: &ParticleState, alpha: f64) -> f64 {
    if f.contains(s) {
        (f.eval)(s) / s.i.powf(alpha)
    } else {
        0.0
    }
}

/// Gain-minus-loss bracket times the collision measure density (without the
/// proposal corrections): the common core of the `Delta`-parametrized
/// operator evaluations.
fn delta_integrand(
    f: &Distribution,
    s: &ParticleState,
    gas: &GasSpec,
    model: &CrossSectionModel,
    w: &WeightedPoint,
) -> f64 {
    let alpha = gas.alpha;
    let p = &w.point;
    let s_star = ParticleState::new(p.v_star, p.i_star);
    let params = CollisionParams {
        r: p.r,
        r_kin: p.r_kin,
        omega: p.omega,
    };
    let (s_post, s_star_post) = match post_collision(s, &s_star, &params) {
        Ok(pair) => pair,
        Err(_) => return 0.0,
    };
    let gain = over_internal(f, &s_post, alpha)
        * over_internal(f, &s_star_post, alpha)
        * (s.i * p.i_star).powf(alpha);
    let loss = if f.contains(s) && f.contains(&s_star) {
        (f.eval)(s) * (f.eval)(&s_star)
    } else {
        0.0
    };
    let b = model.eval_b(gas, s, &s_star, &params);
    (gain - loss)
        * b
        * (p.r * (1.0 - p.r)).powf(alpha)
        * (1.0 - p.r_kin).powf(2.0 * alpha + 1.0)
        * p.r_kin.sqrt()
        * w.weight
}

/// The collision operator `Q(f, f)(v, I)` in the collision-parameter form:
/// the `Delta` integral of
/// `(f'f'*/(I'I'*)^alpha - f f*/(I I*)^alpha) B (r(1-r))^alpha
///  (1-R)^{2 alpha + 1} R^{1/2} I^alpha I*^alpha`.
///
/// For a Maxwellian the gain and loss factors cancel pointwise at every
/// node (total energy conservation), so the estimate is floating-point
/// noise, not merely statistically small.
pub fn eval_q(
    f: &Distribution,
    s: &ParticleState,
    gas: &GasSpec,
    model: &CrossSectionModel,
    quad: &QuadratureSpec,
) -> Result<Estimate> {
    gas.validate()?;
    let watch = NanWatch::new("eval_q", NON_FINITE_CAUSE);
    let s = *s;
    let est = quad::estimate(quad, "eval-q", |rng| {
        let w = sample_delta(rng, gas.alpha, quad.margin);
        watch.guard(delta_integrand(f, &s, gas, model, &w))
    });
    watch.finish(est)
}

/// Weak-form moment `int Q(f, f) phi dI dv`, estimated without any
/// symmetrization so that the conservation identities are genuine
/// statistical tests of the operator rather than per-sample algebra.
///
/// For `phi` in the span of `{1, v, |v|^2/2 + I}` the result is zero up to
/// Monte Carlo error.
pub fn weak_residual(
    f: &Distribution,
    phi: &(dyn Fn(&ParticleState) -> f64 + Sync),
    gas: &GasSpec,
    model: &CrossSectionModel,
    quad: &QuadratureSpec,
) -> Result<Estimate> {
    gas.validate()?;
    let alpha = gas.alpha;
    let watch = NanWatch::new("weak_residual", NON_FINITE_CAUSE);
    let two_pi = 2.0 * std::f64::consts::PI;
    let est = quad::estimate(quad, "weak-residual", |rng| {
        let s = ParticleState::new(quad::sample_std_normal3(rng), {
            let mut i = quad::sample_energy(rng, alpha);
            while i <= 0.0 {
                i = quad::sample_energy(rng, alpha);
            }
            i
        });
        let outer = two_pi.powf(1.5)
            * gamma(alpha + 1.0)
            * s.i.powf(-alpha)
            * (0.5 * s.v.norm_squared() + s.i).exp();
        let w = sample_delta(rng, alpha, quad.margin);
        watch.guard(delta_integrand(f, &s, gas, model, &w) * outer * phi(&s))
    });
    watch.finish(est)
}

/// A point of the transfer parametrization: the states `(v, I)` and
/// `(v', I')` together with the center of mass `G` and total pair energy `E`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransferPoint {
    pub s: ParticleState,
    pub s_prime: ParticleState,
    pub com_velocity: Vec3,
    pub energy: f64,
}

struct Reconstruction {
    s_star: ParticleState,
    i_star_prime: f64,
    r: f64,
    r_kin: f64,
    sigma_dist: f64,
    g_norm: f64,
}

fn reconstruct(point: &TransferPoint) -> Result<Reconstruction> {
    let TransferPoint {
        s,
        s_prime,
        com_velocity: g_com,
        energy: e,
    } = point;
    if !(0.0 < *e && e.is_finite()) {
        return Err(Error::OutsideDomain {
            reason: format!("total pair energy must be positive, got {e}"),
        });
    }
    let v_star = 2.0 * g_com - s.v;
    let kinetic = (s.v - g_com).norm_squared();
    let i_star = e - s.i - kinetic;
    if i_star < 0.0 {
        return Err(Error::OutsideDomain {
            reason: format!("reconstructed partner internal energy is negative: {i_star}"),
        });
    }
    let r_kin = (s_prime.v - g_com).norm_squared() / e;
    if !(0.0 < r_kin && r_kin < 1.0) {
        return Err(Error::OutsideDomain {
            reason: format!("kinetic energy fraction R = {r_kin} outside (0, 1)"),
        });
    }
    let i_star_prime = (1.0 - r_kin) * e - s_prime.i;
    if i_star_prime < 0.0 {
        return Err(Error::OutsideDomain {
            reason: format!("reconstructed post-collision partner energy is negative: {i_star_prime}"),
        });
    }
    let r = s_prime.i / ((1.0 - r_kin) * e);
    let rho = (s_prime.v - g_com).norm();
    let sigma = (s_prime.v - g_com) / rho;
    let g = s.v - v_star;
    let g_norm = g.norm();
    let sigma_dist = if g_norm > 0.0 {
        (sigma - g / g_norm).norm()
    } else {
        // Head-on pair: every direction is equally "grazing"; the value only
        // matters for models without the cosine factor, which keep the
        // explicit 1/|sigma - ghat|.
        std::f64::consts::SQRT_2
    };
    Ok(Reconstruction {
        s_star: ParticleState::new(v_star, i_star),
        i_star_prime,
        r,
        r_kin,
        sigma_dist,
        g_norm,
    })
}

/// The microreversible transfer rate
/// `W = 8 / |sigma - ghat| (I'I'* I I*)^alpha E^{-5/2-2 alpha} B`, with all
/// secondary quantities reconstructed from the transfer point.
///
/// Symmetric under exchanging `(v, I)` with `(v', I')` at fixed `(G, E)`
/// whenever the model satisfies the post-collisional identity.
pub fn eval_w(gas: &GasSpec, model: &CrossSectionModel, point: &TransferPoint) -> Result<f64> {
    gas.validate()?;
    if matches!(model, CrossSectionModel::Custom(_)) {
        return Err(Error::InvalidInput(
            "custom cross sections have no separable radial form; \
             the sigma-chart transfer rate needs one"
                .into(),
        ));
    }
    let rec = reconstruct(point)?;
    let alpha = gas.alpha;
    let e = point.energy;
    // B in sigma variables; the folded chart weight is B/|sigma - ghat|, so
    // 8/|sigma - ghat| B = 8 * that weight.
    let chart = model.sigma_weighted(
        gas,
        rec.g_norm,
        point.s.i,
        rec.s_star.i,
        rec.r,
        rec.r_kin,
        rec.sigma_dist,
    );
    Ok(8.0
        * chart
        * (point.s_prime.i * rec.i_star_prime * point.s.i * rec.s_star.i).powf(alpha)
        * e.powf(-2.5 - 2.0 * alpha))
}

/// The sigma chart covers the sphere of directions twice (`omega` and
/// `-omega` land on the same `sigma`), so the transfer-form operator carries
/// this multiplicity on top of `W`.
pub const SIGMA_CHART_MULTIPLICITY: f64 = 2.0;

/// The collision operator through the transfer parametrization:
/// `Q(f, f)(v, I) = int (f'f'*/(I'I'*)^alpha - f f*/(I I*)^alpha)
///  [multiplicity] W dG dE dv' dI'`.
///
/// An independent oracle for [`eval_q`]: different variables, different
/// integrand algebra, same operator.
pub fn eval_q_equiv(
    f: &Distribution,
    s: &ParticleState,
    gas: &GasSpec,
    model: &CrossSectionModel,
    quad: &QuadratureSpec,
) -> Result<Estimate> {
    gas.validate()?;
    if matches!(model, CrossSectionModel::Custom(_)) {
        return Err(Error::InvalidInput(
            "custom cross sections have no separable radial form; the sigma-chart transfer rate \
             needs one"
                .into(),
        ));
    }
    let alpha = gas.alpha;
    let watch = NanWatch::new("eval_q_equiv", NON_FINITE_CAUSE);
    let s = *s;
    let two_pi = 2.0 * std::f64::consts::PI;
    let est = quad::estimate(quad, "eval-q-equiv", |rng| {
        // Proposals directly in the transfer variables: G via a Gaussian
        // partner velocity, E via a Gamma partner energy, v' uniform in the
        // kinetic fraction and direction, I' uniform in its admissible range.
        let partner = quad::sample_std_normal3(rng);
        let g_com = 0.5 * (s.v + partner);
        let mut i_star = quad::sample_energy(rng, alpha);
        while i_star <= 0.0 {
            i_star = quad::sample_energy(rng, alpha);
        }
        let kinetic = (s.v - g_com).norm_squared();
        let e = kinetic + s.i + i_star;
        let r_kin = open_unit(rng);
        let sigma = quad::sample_unit_sphere(rng);
        let rho = (r_kin * e).sqrt();
        let v_prime = g_com + rho * sigma;
        let i_prime = open_unit(rng) * (1.0 - r_kin) * e;

        // Inverse proposal densities. dG = dv*/8; E at fixed G moves one-to-
        // one with I*; |v'-G| = sqrt(RE) with R uniform gives density
        // 1/(2 pi E sqrt(RE)) for v'; I' is uniform on (0, (1-R)E).
        let weight = two_pi.powf(1.5) * (0.5 * partner.norm_squared()).exp() / 8.0
            * gamma(alpha + 1.0) * i_star.powf(-alpha) * i_star.exp()
            * two_pi * e * rho
            * (1.0 - r_kin) * e;

        let point = TransferPoint {
            s,
            s_prime: ParticleState::new(v_prime, i_prime),
            com_velocity: g_com,
            energy: e,
        };
        let w = match eval_w(gas, model, &point) {
            Ok(w) => w,
            Err(_) => return 0.0,
        };
        let s_star = ParticleState::new(2.0 * g_com - s.v, i_star);
        let s_star_prime = ParticleState::new(2.0 * g_com - v_prime, (1.0 - r_kin) * e - i_prime);
        let gain = over_internal(f, &ParticleState::new(v_prime, i_prime), alpha)
            * over_internal(f, &s_star_prime, alpha);
        let loss = over_internal(f, &s, alpha) * over_internal(f, &s_star, alpha);
        watch.guard((gain - loss) * SIGMA_CHART_MULTIPLICITY * w * weight)
    });
    watch.finish(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn forward_point(
        s: &ParticleState,
        s_star: &ParticleState,
        params: &CollisionParams,
    ) -> TransferPoint {
        let (s_prime, _) = post_collision(s, s_star, params).unwrap();
        let com = crate::kinematics::center_of_mass(s, s_star);
        TransferPoint {
            s: *s,
            s_prime,
            com_velocity: com.velocity,
            energy: com.energy,
        }
    }

    #[test]
    fn transfer_rate_reconstruction_roundtrip() {
        // Forward collision, then W from the transfer point must equal the
        // direct formula with the original collision parameters.
        let gas = GasSpec::new(0.5, 0.0).unwrap();
        let model = CrossSectionModel::total_energy(1.0);
        let s = ParticleState::new(Vec3::new(1.0, 0.0, 0.0), 0.5);
        let s_star = ParticleState::new(Vec3::new(-1.0, 0.5, 0.0), 1.0);
        let params = CollisionParams {
            r: 0.3,
            r_kin: 0.4,
            omega: Vec3::new(0.0, 1.0, 0.0),
        };
        let point = forward_point(&s, &s_star, &params);
        let w = eval_w(&gas, &model, &point).unwrap();

        let com = crate::kinematics::center_of_mass(&s, &s_star);
        let e = com.energy;
        let i_star_prime = (1.0 - params.r) * (1.0 - params.r_kin) * e;
        let i_prime = params.r * (1.0 - params.r_kin) * e;
        let g = s.v - s_star.v;
        let radial = model.radial_factor(&gas, g.norm(), s.i, s_star.i, params.r, params.r_kin);
        let direct = 8.0
            * 0.5
            * radial
            * (i_prime * i_star_prime * s.i * s_star.i).powf(gas.alpha)
            * e.powf(-2.5 - 2.0 * gas.alpha);
        assert_relative_eq!(w, direct, max_relative = 1e-12);
    }

    #[test]
    fn transfer_rate_is_microreversible() {
        let gas = GasSpec::new(0.5, 1.0).unwrap();
        let model = CrossSectionModel::Partitioned { c: 1.0 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut tested = 0;
        while tested < 100 {
            use rand::Rng;
            let s = ParticleState::new(quad::sample_std_normal3(&mut rng), rng.random_range(0.01..3.0));
            let s_star =
                ParticleState::new(quad::sample_std_normal3(&mut rng), rng.random_range(0.01..3.0));
            let params = CollisionParams {
                r: rng.random_range(0.05..0.95),
                r_kin: rng.random_range(0.05..0.95),
                omega: quad::sample_unit_sphere(&mut rng),
            };
            let point = forward_point(&s, &s_star, &params);
            let swapped = TransferPoint {
                s: point.s_prime,
                s_prime: point.s,
                com_velocity: point.com_velocity,
                energy: point.energy,
            };
            let w = eval_w(&gas, &model, &point).unwrap();
            let w_swapped = eval_w(&gas, &model, &swapped).unwrap();
            assert_relative_eq!(w, w_swapped, max_relative = 1e-10);
            tested += 1;
        }
    }

    #[test]
    fn transfer_rate_energy_scaling() {
        // Doubling E at fixed fractions: W scales by 2^(gamma + 2 alpha - 5/2).
        // At alpha = 0 this is the bare power-counting exponent 2^(gamma - 5/2).
        let s = ParticleState::new(Vec3::new(1.2, -0.3, 0.4), 0.7);
        let s_star = ParticleState::new(Vec3::new(-0.8, 0.9, -0.1), 1.1);
        let params = CollisionParams {
            r: 0.35,
            r_kin: 0.55,
            omega: Vec3::new(0.0, 0.0, 1.0),
        };
        for (alpha, gamma) in [(0.0, 1.0), (0.0, 2.0), (0.5, 0.0), (0.5, 1.0)] {
            let gas = GasSpec::new(alpha, gamma).unwrap();
            let model = CrossSectionModel::TotalEnergy {
                c: 1.0,
                power_of_total: true,
            };
            let point = forward_point(&s, &s_star, &params);
            let g_com = point.com_velocity;
            let scaled = TransferPoint {
                s: ParticleState::new(
                    g_com + std::f64::consts::SQRT_2 * (point.s.v - g_com),
                    2.0 * point.s.i,
                ),
                s_prime: ParticleState::new(
                    g_com + std::f64::consts::SQRT_2 * (point.s_prime.v - g_com),
                    2.0 * point.s_prime.i,
                ),
                com_velocity: g_com,
                energy: 2.0 * point.energy,
            };
            let ratio = eval_w(&gas, &model, &scaled).unwrap() / eval_w(&gas, &model, &point).unwrap();
            assert_relative_eq!(
                ratio,
                2f64.powf(gamma + 2.0 * alpha - 2.5),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn inadmissible_transfer_points_name_the_violated_constraint() {
        let gas = GasSpec::new(0.0, 0.0).unwrap();
        let model = CrossSectionModel::total_energy(1.0);
        let s = ParticleState::new(Vec3::new(2.0, 0.0, 0.0), 0.5);

        // E smaller than the kinetic share alone.
        let starved = TransferPoint {
            s,
            s_prime: ParticleState::new(Vec3::new(0.5, 0.0, 0.0), 0.1),
            com_velocity: Vec3::zeros(),
            energy: 3.0,
        };
        match eval_w(&gas, &model, &starved) {
            Err(Error::OutsideDomain { reason }) => {
                assert!(reason.contains("partner internal energy"), "{reason}")
            }
            other => panic!("expected domain error, got {other:?}"),
        }

        // v' further from G than the total energy allows.
        let overshooting = TransferPoint {
            s,
            s_prime: ParticleState::new(Vec3::new(9.0, 0.0, 0.0), 0.1),
            com_velocity: Vec3::zeros(),
            energy: 6.0,
        };
        match eval_w(&gas, &model, &overshooting) {
            Err(Error::OutsideDomain { reason }) => {
                assert!(reason.contains("kinetic energy fraction"), "{reason}")
            }
            other => panic!("expected domain error, got {other:?}"),
        }

        // I' exceeding the internal share (1-R)E = 5.
        let overfull = TransferPoint {
            s,
            s_prime: ParticleState::new(Vec3::new(1.0, 0.0, 0.0), 5.5),
            com_velocity: Vec3::zeros(),
            energy: 6.0,
        };
        match eval_w(&gas, &model, &overfull) {
            Err(Error::OutsideDomain { reason }) => {
                assert!(reason.contains("post-collision partner"), "{reason}")
            }
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn delta_sampler_weights_recover_the_sphere_measure() {
        // E[weight * density-free indicator] over the proposal reproduces the
        // measure of Delta restricted to a simple cell.
        let mut rng = quad::block_rng(99, "delta-sampler-test", 0);
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let w = sample_delta(&mut rng, 0.0, 0.0);
            // Integrand e^{-I* - v*^2/2} (2 pi)^{-3/2}: total mass over Delta
            // is 1 x 1 x 4 pi x 1 x 1.
            let val = (-w.point.i_star - 0.5 * w.point.v_star.norm_squared()).exp()
                * (2.0 * std::f64::consts::PI).powf(-1.5);
            acc += val * w.weight;
        }
        let mean = acc / n as f64;
        assert_relative_eq!(mean, 4.0 * std::f64::consts::PI, max_relative = 1e-10);
    }
}
