//! Maxwellian equilibria, hydrodynamic moments, and the entropy production
//! functional whose zeros characterize the equilibria.
//!
//! Distributions over `(v, I)` are represented as evaluable functions plus a
//! declared truncation radius per coordinate; all quadrature happens inside
//! that box and the moment routine reports when the declared box is too small
//! for the mass it finds near the boundary.

use std::sync::atomic::{AtomicU64, Ordering};

use statrs::function::gamma::gamma;

use crate::cross_section::{CrossSectionModel, GasSpec};
use crate::kinematics::{post_collision, CollisionParams, ParticleState};
use crate::quad::{self, gauss, Estimate, QuadratureSpec};
use crate::{Error, Result, Vec3};

/// Hydrodynamic parameters of a Maxwellian: number density, bulk velocity,
/// and temperature (in units where the Boltzmann constant is 1).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MaxwellianParams {
    pub n: f64,
    pub u: Vec3,
    pub t: f64,
}

impl MaxwellianParams {
    pub fn new(n: f64, u: Vec3, t: f64) -> Result<Self> {
        let params = MaxwellianParams { n, u, t };
        params.validate()?;
        Ok(params)
    }

    /// The normalized equilibrium `n = 1`, `u = 0`, `T = 1`.
    pub fn normalized() -> Self {
        MaxwellianParams {
            n: 1.0,
            u: Vec3::zeros(),
            t: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n > 0.0 && self.n.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "density must be positive, got {}",
                self.n
            )));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "temperature must be positive, got {}",
                self.t
            )));
        }
        Ok(())
    }
}

/// Maxwellian density
/// `n / ((2 pi)^{3/2} Gamma(alpha+1) T^{alpha+5/2}) I^alpha
///  exp(-(|v-u|^2/2 + I) / T)`.
pub fn eval_maxwellian(params: &MaxwellianParams, gas: &GasSpec, s: &ParticleState) -> f64 {
    let norm = params.n
        / ((2.0 * std::f64::consts::PI).powf(1.5)
            * gamma(gas.alpha + 1.0)
            * params.t.powf(gas.alpha + 2.5));
    let arg = (0.5 * (s.v - params.u).norm_squared() + s.i) / params.t;
    norm * s.i.powf(gas.alpha) * (-arg).exp()
}

/// Square root of the normalized Maxwellian,
/// `M^{1/2} = ((2 pi)^{3/2} Gamma(alpha+1))^{-1/2} I^{alpha/2}
///  exp(-|v|^2/4 - I/2)`.
pub fn sqrt_normalized_maxwellian(gas: &GasSpec, s: &ParticleState) -> f64 {
    let norm = ((2.0 * std::f64::consts::PI).powf(1.5) * gamma(gas.alpha + 1.0)).sqrt();
    s.i.powf(0.5 * gas.alpha) * (-0.25 * s.v.norm_squared() - 0.5 * s.i).exp() / norm
}

/// A distribution on velocity-internal-energy space: a pointwise evaluator
/// together with the box `[-v_radius, v_radius]^3 x [0, i_radius]` outside of
/// which its mass is declared negligible.
pub struct Distribution {
    pub eval: Box<dyn Fn(&ParticleState) -> f64 + Send + Sync>,
    pub v_radius: f64,
    pub i_radius: f64,
}

impl Distribution {
    pub fn new(
        v_radius: f64,
        i_radius: f64,
        eval: impl Fn(&ParticleState) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Distribution {
            eval: Box::new(eval),
            v_radius,
            i_radius,
        }
    }

    /// A Maxwellian with a support box wide enough that the excluded tail
    /// mass is far below the truncation warning threshold.
    pub fn maxwellian(params: MaxwellianParams, gas: GasSpec) -> Self {
        let v_radius = params.u.amax() + 8.0 * params.t.sqrt();
        let i_radius = (30.0 + 12.0 * gas.alpha) * params.t;
        Distribution::new(v_radius, i_radius, move |s| {
            eval_maxwellian(&params, &gas, s)
        })
    }

    pub fn contains(&self, s: &ParticleState) -> bool {
        s.v.amax() <= self.v_radius && (0.0..=self.i_radius).contains(&s.i)
    }
}

impl std::fmt::Debug for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Distribution")
            .field("v_radius", &self.v_radius)
            .field("i_radius", &self.i_radius)
            .finish_non_exhaustive()
    }
}

/// Moment integrals of a distribution: mass, bulk velocity, and the thermal
/// plus internal energy in the bulk frame (`(alpha + 5/2) n T` for a
/// Maxwellian).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Moments {
    pub n: f64,
    pub u: Vec3,
    pub energy_moment: f64,
    /// Set when the outer shell of the declared box carries more than
    /// [`TRUNCATION_WARN_FRACTION`] of the total absolute mass, i.e. the
    /// declared radii are too small for this distribution.
    pub truncation_warning: bool,
}

impl Moments {
    /// Temperature implied by the energy moment, `E / ((alpha + 5/2) n)`.
    pub fn temperature(&self, gas: &GasSpec) -> f64 {
        self.energy_moment / ((gas.alpha + 2.5) * self.n)
    }
}

/// Fraction of the absolute mass in the outer shell of the declared box
/// above which [`moments`] raises its truncation warning.
pub const TRUNCATION_WARN_FRACTION: f64 = 1e-6;

/// Fraction of each radius treated as the outer shell for the tail estimate.
const TAIL_SHELL: f64 = 0.1;

#[derive(Clone, Copy)]
struct MomentAcc {
    n: f64,
    momentum: Vec3,
    kinetic: f64,
    internal: f64,
    abs_total: f64,
    abs_outer: f64,
}

impl MomentAcc {
    fn zero() -> Self {
        MomentAcc {
            n: 0.0,
            momentum: Vec3::zeros(),
            kinetic: 0.0,
            internal: 0.0,
            abs_total: 0.0,
            abs_outer: 0.0,
        }
    }

    fn merge(mut self, other: MomentAcc) -> Self {
        self.n += other.n;
        self.momentum += other.momentum;
        self.kinetic += other.kinetic;
        self.internal += other.internal;
        self.abs_total += other.abs_total;
        self.abs_outer += other.abs_outer;
        self
    }
}

fn axis_nodes(panel_edges: &[f64], nodes: usize) -> Vec<(f64, f64)> {
    let rule = gauss::legendre(nodes);
    let mut out = Vec::with_capacity((panel_edges.len() - 1) * nodes);
    for w in panel_edges.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let half = 0.5 * (w[1] - w[0]);
        for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
            out.push((mid + half * t, half * wt));
        }
    }
    out
}

/// Mass, bulk velocity, and bulk-frame energy moment of `f` by composite
/// Gauss-Legendre quadrature over the distribution's declared box.
///
/// `quad.nodes` controls the points per panel. The energy moment subtracts
/// the measured bulk motion, so for a drifting Maxwellian it still returns
/// `(alpha + 5/2) n T`.
pub fn moments(f: &Distribution, gas: &GasSpec, quad: &QuadratureSpec) -> Result<Moments> {
    gas.validate()?;
    if !(f.v_radius > 0.0 && f.i_radius > 0.0) {
        return Err(Error::InvalidInput(format!(
            "truncation radii must be positive, got v {} and I {}",
            f.v_radius, f.i_radius
        )));
    }
    let rv = f.v_radius;
    let ri = f.i_radius;
    let v_axis = axis_nodes(&[-rv, -0.5 * rv, 0.0, 0.5 * rv, rv], quad.nodes);
    // Substituting I = t^2 removes the I^alpha endpoint kink for half-integer
    // alpha (the integrand gains a factor 2t, turning I^{1/2} into t^2).
    let rt = ri.sqrt();
    let i_axis: Vec<(f64, f64)> =
        axis_nodes(&[0.0, 0.25 * rt, 0.5 * rt, 0.75 * rt, rt], quad.nodes)
            .into_iter()
            .map(|(t, w)| (t * t, 2.0 * t * w))
            .collect();
    let v_cut = (1.0 - TAIL_SHELL) * rv;
    let i_cut = (1.0 - TAIL_SHELL) * ri;

    let row = |&(v1, w1): &(f64, f64)| {
        let mut acc = MomentAcc::zero();
        for &(v2, w2) in &v_axis {
            for &(v3, w3) in &v_axis {
                let v = Vec3::new(v1, v2, v3);
                let outer_v = v.amax() > v_cut;
                for &(i, wi) in &i_axis {
                    let w = w1 * w2 * w3 * wi;
                    let fx = (f.eval)(&ParticleState::new(v, i));
                    let m = w * fx;
                    acc.n += m;
                    acc.momentum += m * v;
                    acc.kinetic += 0.5 * v.norm_squared() * m;
                    acc.internal += i * m;
                    let a = w.abs() * fx.abs();
                    acc.abs_total += a;
                    if outer_v || i > i_cut {
                        acc.abs_outer += a;
                    }
                }
            }
        }
        acc
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<MomentAcc> = {
        use rayon::prelude::*;
        v_axis.par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<MomentAcc> = v_axis.iter().map(row).collect();

    let acc = rows.into_iter().fold(MomentAcc::zero(), MomentAcc::merge);
    if !(acc.n > 0.0) {
        return Err(Error::numerics(
            "moments",
            format!("nonpositive total mass {}", acc.n),
        ));
    }
    let u = acc.momentum / acc.n;
    Ok(Moments {
        n: acc.n,
        u,
        energy_moment: acc.kinetic - 0.5 * acc.n * u.norm_squared() + acc.internal,
        truncation_warning: acc.abs_outer > TRUNCATION_WARN_FRACTION * acc.abs_total,
    })
}

/// Entropy production `D(f)`: the collision dissipation functional that is
/// nonpositive for every admissible distribution and vanishes exactly on
/// Maxwellians.
///
/// Evaluated in the symmetrized weak form, whose integrand
/// `-(1/4) (X - Y) log(X / Y)` with `X = f'f'*/(I'I'*)^alpha` and
/// `Y = f f*/(I I*)^alpha` is pointwise nonpositive; the symmetrization is
/// valid for cross sections satisfying both microreversibility identities
/// (see [`crate::cross_section::verify_assumptions`]). Collisions that leave
/// the distribution's declared box are excluded, so the magnitude is a
/// conservative lower estimate of the dissipation.
///
/// Errors if `f` is nonpositive anywhere the sampler probes it inside the
/// declared box.
pub fn entropy_production(
    f: &Distribution,
    gas: &GasSpec,
    model: &CrossSectionModel,
    quad: &QuadratureSpec,
) -> Result<Estimate> {
    gas.validate()?;
    let alpha = gas.alpha;
    let bad = AtomicU64::new(0);
    // Shape of f against the separable equilibrium kernel: evaluating
    // phi = f exp(|v|^2/2 + I) / I^alpha on both sides of the collision keeps
    // every exponential factor paired with its decay (total energy is
    // conserved), so nothing overflows.
    let shape = |s: &ParticleState| {
        (f.eval)(s) * (0.5 * s.v.norm_squared() + s.i).exp() / s.i.powf(alpha)
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    let scale = two_pi.powi(3) * gamma(alpha + 1.0).powi(2) * 2.0 * two_pi;

    let est = quad::estimate(quad, "entropy-production", |rng| {
        use rand::Rng;
        let s = ParticleState::new(quad::sample_std_normal3(rng), quad::sample_energy(rng, alpha));
        let s_star =
            ParticleState::new(quad::sample_std_normal3(rng), quad::sample_energy(rng, alpha));
        let p = CollisionParams {
            r: rng.random(),
            r_kin: rng.random(),
            omega: quad::sample_unit_sphere(rng),
        };
        if !f.contains(&s) || !f.contains(&s_star) {
            return 0.0;
        }
        let (s_post, s_star_post) = match post_collision(&s, &s_star, &p) {
            Ok(pair) => pair,
            Err(_) => return 0.0,
        };
        if !f.contains(&s_post) || !f.contains(&s_star_post) {
            return 0.0;
        }
        let phi = shape(&s);
        let phi_star = shape(&s_star);
        let phi_post = shape(&s_post);
        let phi_star_post = shape(&s_star_post);
        if phi <= 0.0 || phi_star <= 0.0 || phi_post <= 0.0 || phi_star_post <= 0.0 {
            bad.fetch_add(1, Ordering::Relaxed);
            return 0.0;
        }
        let x = phi_post * phi_star_post;
        let y = phi * phi_star;
        let dissipation = (x - y) * (x / y).ln();
        let b = model.eval_b(gas, &s, &s_star, &p);
        -0.25
            * dissipation
            * b
            * (p.r * (1.0 - p.r)).powf(alpha)
            * (1.0 - p.r_kin).powf(2.0 * alpha + 1.0)
            * p.r_kin.sqrt()
            * scale
    });

    let rejected = bad.load(Ordering::Relaxed);
    if rejected > 0 {
        return Err(Error::OutsideDomain {
            reason: format!(
                "distribution nonpositive at {rejected} sampled states inside its declared box"
            ),
        });
    }
    Ok(est)
}
