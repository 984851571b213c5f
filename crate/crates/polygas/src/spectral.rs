//! Galerkin matrix of the linearized collision operator in a weighted
//! polynomial basis, its spectrum, and kernel diagnostics.
//!
//! The basis functions are `b_k = M^{1/2} phi_k`, where `M` is the normalized
//! equilibrium and the `phi_k` are products of orthonormal Hermite polynomials
//! in the velocity components with orthonormal generalized Laguerre
//! polynomials (parameter `alpha`) in the internal energy, so the `b_k` are
//! orthonormal in `L^2(dv dI)`. Matrix entries are the quadratic form of the
//! operator written over collisions,
//!
//! `<b_i, L b_j> = -1/4 int B h M M* (Delta phi_i)(Delta phi_j) dmu`,
//!
//! where `Delta phi = phi(s') + phi(s*') - phi(s) - phi(s*)`, `h` is the
//! fraction measure of the collision parametrization, and `dmu` runs over the
//! state, the partner, the energy fractions, and the scattering direction.
//! The identity behind this quadratic form requires a cross section that is
//! invariant under the exchange and return relabellings of a collision, and
//! [`assemble`] refuses models without that symmetry.
//!
//! Expanding the product splits every entry in two. The same-state products
//! integrate, by the collision invariance of the measure, to the
//! multiplication part `-<b_i, nu b_j>`, which is evaluated without touching
//! collision samples: `-nu0` times the identity when the frequency is
//! constant (`gamma = 0`), a frequency-weighted Gram matrix over the
//! deterministic state rule otherwise. Only the mixed products — the
//! transfer part — are left to the collision Monte Carlo, one stream of
//! sampled collisions updating the whole matrix at once. The subtraction is
//! the variance control that makes the assembly affordable: same-state
//! squares of the highest-degree basis functions carry polynomial moments of
//! twice their degree and would otherwise dominate every entry error, while
//! the mixed products couple two different states and keep bounded variance
//! under the tail-tempered proposals. Both parts are symmetric by
//! construction, so the symmetrization pass is the identity; negative
//! semidefiniteness and the vanishing on collision invariants hold in
//! expectation, with deviations controlled by the recorded entry errors.
//!
//! Eigenvalue statements are made relative to the noise scale
//! `tol0 = max(10 * max entry standard error, 1e-6)` recorded on the
//! assembled matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use statrs::function::beta::beta;
use statrs::function::gamma::gamma;

use crate::cross_section::{verify_assumptions, CrossSectionModel, GasSpec};
use crate::frequency::eval_nu;
use crate::kinematics::{post_collision, CollisionParams, ParticleState};
use crate::quad::{self, gauss, Estimate, NanWatch, QuadratureSpec, Scheme, BLOCK_SAMPLES};
use crate::{Error, Result, Vec3};

/// Default ceiling on the total basis dimension: the assembly touches every
/// entry per collision sample and the eigensolve is dense.
pub const MAX_BASIS_DIM: usize = 500;

const GRAM_TOL: f64 = 1e-8;
const TOL0_FLOOR: f64 = 1e-6;
const TOL0_ERR_FACTOR: f64 = 10.0;
const REFINEMENT_FRACTION: f64 = 0.1;
const MASS_CAPTURE_MIN: f64 = 0.99;
const ASSEMBLY_RANGES: u64 = 16;
const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;
/// Seed salt separating the frequency estimates of the multiplication part
/// from the collision stream of the transfer part.
const NU_SEED_SALT: u64 = 0x6E75;
/// Extra Gauss nodes per axis beyond the minimum needed for an exact Gram.
const RULE_SLACK: usize = 2;

const INVARIANT_LABELS: [&str; 5] = ["constant", "v1", "v2", "v3", "energy"];

/// Hermite-times-Laguerre basis request: velocity polynomials up to total
/// degree `n_v`, internal-energy polynomials up to degree `n_i`.
///
/// Basis order is velocity-multi-index major (graded, so the constant comes
/// first) with the energy degree fastest; the first basis function is always
/// `M^{1/2}` itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BasisSpec {
    /// Maximal total degree of the velocity polynomials.
    pub n_v: usize,
    /// Maximal degree of the internal-energy polynomials.
    pub n_i: usize,
    /// Hard ceiling on the total dimension; [`BasisSpec::validate`] rejects
    /// requests above it. Defaults to [`MAX_BASIS_DIM`].
    #[serde(default = "default_dim_cap")]
    pub dim_cap: usize,
}

fn default_dim_cap() -> usize {
    MAX_BASIS_DIM
}

impl BasisSpec {
    pub fn new(n_v: usize, n_i: usize) -> Self {
        BasisSpec {
            n_v,
            n_i,
            dim_cap: MAX_BASIS_DIM,
        }
    }

    /// Raises (or lowers) the dimension ceiling for deliberate large runs.
    pub fn with_dim_cap(mut self, dim_cap: usize) -> Self {
        self.dim_cap = dim_cap;
        self
    }

    /// Velocity multi-indices `(a, b, c)` with `a + b + c <= n_v` in graded
    /// order, `(0, 0, 0)` first.
    pub fn velocity_indices(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for deg in 0..=self.n_v {
            for a in (0..=deg).rev() {
                for b in (0..=deg - a).rev() {
                    out.push([a, b, deg - a - b]);
                }
            }
        }
        out
    }

    /// Total dimension: `C(n_v + 3, 3) * (n_i + 1)`.
    pub fn dim(&self) -> usize {
        let n = self.n_v;
        (n + 1) * (n + 2) * (n + 3) / 6 * (self.n_i + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() > self.dim_cap {
            return Err(Error::InvalidInput(format!(
                "basis dimension {} exceeds the cap {}; raise dim_cap explicitly if the run is \
                 intentional",
                self.dim(),
                self.dim_cap
            )));
        }
        Ok(())
    }
}

/// Orthonormal Hermite values `H_0(x) .. H_n(x)` for the standard Gaussian
/// weight; `out.len() = n + 1`.
fn hermite_row(x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (x * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
    }
}

/// Orthonormal generalized Laguerre values for the Gamma(`alpha + 1`, 1)
/// probability weight `x^alpha e^{-x} / Gamma(alpha + 1)`.
fn laguerre_row(alpha: f64, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = (alpha + 1.0 - x) / (alpha + 1.0).sqrt();
    }
    for m in 1..out.len().saturating_sub(1) {
        let mf = m as f64;
        out[m + 1] = ((2.0 * mf + alpha + 1.0 - x) * out[m]
            - (mf * (mf + alpha)).sqrt() * out[m - 1])
            / ((mf + 1.0) * (mf + 1.0 + alpha)).sqrt();
    }
}

fn state_rows(
    alpha: f64,
    s: &ParticleState,
    hx: &mut [f64],
    hy: &mut [f64],
    hz: &mut [f64],
    li: &mut [f64],
) {
    hermite_row(s.v.x, hx);
    hermite_row(s.v.y, hy);
    hermite_row(s.v.z, hz);
    laguerre_row(alpha, s.i, li);
}

/// Adds `sign * phi_k` to `out` for every basis index, given the component
/// rows of the tensor factors.
fn add_scaled_row(
    multis: &[[usize; 3]],
    hx: &[f64],
    hy: &[f64],
    hz: &[f64],
    li: &[f64],
    sign: f64,
    out: &mut [f64],
) {
    let mut k = 0;
    for &[a, b, c] in multis {
        let hv = sign * hx[a] * hy[b] * hz[c];
        for &l in li {
            out[k] += hv * l;
            k += 1;
        }
    }
}

/// Values at `state` of the polynomial factors `phi_k` of the weighted basis
/// functions `b_k = M^{1/2} phi_k`, in basis order. Multiply by
/// [`crate::equilibrium::sqrt_normalized_maxwellian`] to evaluate the `b_k`
/// themselves.
pub fn basis_row(basis: &BasisSpec, gas: &GasSpec, state: &ParticleState) -> DVector<f64> {
    let multis = basis.velocity_indices();
    let mut hx = vec![0.0; basis.n_v + 1];
    let mut hy = vec![0.0; basis.n_v + 1];
    let mut hz = vec![0.0; basis.n_v + 1];
    let mut li = vec![0.0; basis.n_i + 1];
    state_rows(gas.alpha, state, &mut hx, &mut hy, &mut hz, &mut li);
    let mut out = DVector::zeros(basis.dim());
    add_scaled_row(
        &multis,
        &hx,
        &hy,
        &hz,
        &li,
        1.0,
        out.as_mut_slice(),
    );
    out
}

/// The tensor Gauss rule used for every deterministic state-space integral in
/// this module (Gram matrix and kernel projections), with normalized weights:
/// returned triples `(v, I, w)` satisfy `sum w f(v, I) ~ E_M[f]`.
fn state_rule(basis: &BasisSpec, gas: &GasSpec) -> Vec<(Vec3, f64, f64)> {
    let z = std::f64::consts::TAU.powf(1.5) * gamma(gas.alpha + 1.0);
    let mut pts = gauss::velocity_energy_rule(
        basis.n_v + RULE_SLACK,
        basis.n_i + RULE_SLACK,
        gas.alpha,
    );
    for p in &mut pts {
        p.2 /= z;
    }
    pts
}

/// Gram matrix of the weighted basis under the module's deterministic state
/// quadrature. Orthonormality of the recurrences makes this the identity to
/// rounding; [`assemble`] enforces a `1e-8` defect gate before any sampling.
pub fn gram_matrix(basis: &BasisSpec, gas: &GasSpec) -> Result<DMatrix<f64>> {
    gas.validate()?;
    basis.validate()?;
    let d = basis.dim();
    let multis = basis.velocity_indices();
    let mut hx = vec![0.0; basis.n_v + 1];
    let mut hy = vec![0.0; basis.n_v + 1];
    let mut hz = vec![0.0; basis.n_v + 1];
    let mut li = vec![0.0; basis.n_i + 1];
    let mut row = vec![0.0; d];
    let mut g = DMatrix::zeros(d, d);
    for (v, i, w) in state_rule(basis, gas) {
        let s = ParticleState::new(v, i);
        state_rows(gas.alpha, &s, &mut hx, &mut hy, &mut hz, &mut li);
        row.fill(0.0);
        add_scaled_row(&multis, &hx, &hy, &hz, &li, 1.0, &mut row);
        for a in 0..d {
            let wa = w * row[a];
            for b in a..d {
                g[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    Ok(g)
}

fn max_identity_defect(g: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..g.nrows() {
        for b in 0..g.ncols() {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((g[(a, b)] - target).abs());
        }
    }
    worst
}

/// Dense Galerkin matrix of the linearized operator with per-entry Monte
/// Carlo standard errors.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    /// Basis the entries refer to.
    pub basis: BasisSpec,
    /// Symmetrized entries `<b_i, L b_j>`.
    pub entries: DMatrix<f64>,
    /// Per-entry standard errors (symmetric).
    pub std_errs: DMatrix<f64>,
    /// Largest `|A_ij - A_ji|` before symmetrization. The collision-difference
    /// estimator fills both triangles from the same samples, so this is zero
    /// by construction; eigenvalue claims rest on the entry errors instead.
    pub asymmetry: f64,
    /// Largest per-entry standard error.
    pub max_std_err: f64,
    /// Noise scale for eigenvalue claims:
    /// `max(10 * max_std_err, 1e-6)`.
    pub tol0: f64,
    /// Set when the largest standard error exceeds 10% of the largest entry
    /// magnitude; spectral statements deserve no trust until the sample
    /// budget rises.
    pub refinement_needed: bool,
    /// Monte Carlo samples behind every entry.
    pub samples: u64,
}

/// Collision-symmetry gate for the quadratic-form assembly: the estimator is
/// unbiased exactly when `B` returns the same value for a collision and for
/// its exchange and return relabellings. The structured models are certified
/// by inspection (the comparison-sum form only in the Maxwell case
/// `gamma = 0`); custom models run the Monte Carlo symmetry probes.
fn certify_model(
    model: &CrossSectionModel,
    gas: &GasSpec,
    quad: &QuadratureSpec,
) -> Result<()> {
    match model {
        CrossSectionModel::TotalEnergy {
            power_of_total: true,
            ..
        }
        | CrossSectionModel::Partitioned { .. }
        | CrossSectionModel::AngularWeighted { .. } => Ok(()),
        CrossSectionModel::TotalEnergy {
            power_of_total: false,
            ..
        } => {
            if gas.gamma == 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(
                    "the comparison-sum cross section is not collision invariant for gamma > 0, \
                     so the collision-difference assembly would not integrate the operator; use \
                     the total-power or partitioned form, or gamma = 0"
                        .into(),
                ))
            }
        }
        CrossSectionModel::Custom(_) => {
            let probe = QuadratureSpec::default()
                .with_samples(1 << 14)
                .with_seed(quad.seed ^ 0x0C11_1D);
            let report = verify_assumptions(model, gas, &probe)?;
            if report.micro_exchange.passed && report.micro_post.passed {
                Ok(())
            } else {
                Err(Error::InvalidInput(
                    "the custom cross section failed its collision-symmetry probes (exchange and \
                     return relabellings); the collision-difference assembly requires both"
                        .into(),
                ))
            }
        }
    }
}

/// Multiplication part `-<b_i, nu b_j>` of the matrix, with per-entry
/// standard errors from the seeded frequency estimates.
///
/// With a constant collision frequency (`gamma = 0`) this is `-nu0` times the
/// identity, one frequency estimate at the rest state. Otherwise it is a
/// frequency-weighted Gram matrix over an enlarged state rule; the rule is
/// exact for the polynomial factors, so the only systematic error is the
/// spectral-quadrature remainder of the smooth frequency factor.
fn multiplication_part(
    basis: &BasisSpec,
    gas: &GasSpec,
    model: &CrossSectionModel,
    quad: &QuadratureSpec,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = basis.dim();
    let mut s_mat = DMatrix::zeros(d, d);
    let mut s_var = DMatrix::zeros(d, d);
    if gas.gamma == 0.0 {
        let nu_quad = quad
            .with_samples(quad.samples.max(1 << 18))
            .with_seed(quad.seed ^ NU_SEED_SALT);
        let nu = eval_nu(&ParticleState::new(Vec3::zeros(), 0.0), gas, model, &nu_quad)?;
        for k in 0..d {
            s_mat[(k, k)] = -nu.value;
            s_var[(k, k)] = nu.std_err * nu.std_err;
        }
    } else {
        let z = std::f64::consts::TAU.powf(1.5) * gamma(gas.alpha + 1.0);
        let mut pts = gauss::velocity_energy_rule(
            basis.n_v + RULE_SLACK + 2,
            basis.n_i + RULE_SLACK + 2,
            gas.alpha,
        );
        for p in &mut pts {
            p.2 /= z;
        }
        let node_samples = (quad.samples / 16).clamp(1 << 12, 1 << 16);
        let mut hx = vec![0.0; basis.n_v + 1];
        let mut hy = vec![0.0; basis.n_v + 1];
        let mut hz = vec![0.0; basis.n_v + 1];
        let mut li = vec![0.0; basis.n_i + 1];
        let mut row = vec![0.0; d];
        let multis = basis.velocity_indices();
        for (idx, (v, i, w)) in pts.into_iter().enumerate() {
            let node_seed = (quad.seed ^ NU_SEED_SALT)
                .wrapping_add((idx as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let node_quad = quad.with_samples(node_samples).with_seed(node_seed);
            let state = ParticleState::new(v, i);
            let nu = eval_nu(&state, gas, model, &node_quad)?;
            state_rows(gas.alpha, &state, &mut hx, &mut hy, &mut hz, &mut li);
            row.fill(0.0);
            add_scaled_row(&multis, &hx, &hy, &hz, &li, 1.0, &mut row);
            for a in 0..d {
                for b in a..d {
                    let gw = w * row[a] * row[b];
                    s_mat[(a, b)] -= gw * nu.value;
                    s_var[(a, b)] += (gw * nu.std_err).powi(2);
                }
            }
        }
        for a in 0..d {
            for b in a + 1..d {
                s_mat[(b, a)] = s_mat[(a, b)];
                s_var[(b, a)] = s_var[(a, b)];
            }
        }
    }
    let s_se = s_var.map(f64::sqrt);
    Ok((s_mat, s_se))
}

struct TriSums {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

fn positive_energy(rng: &mut impl Rng, alpha: f64) -> f64 {
    loop {
        let e = quad::sample_energy(rng, alpha);
        if e > 0.0 {
            return e;
        }
    }
}

/// Assembles `A_ij = <b_i, L b_j>` as multiplication part plus
/// collision-sampled transfer part.
///
/// The multiplication part `-<b_i, nu b_j>` is produced without collision
/// samples (see [`multiplication_part`] in the module source). For the
/// transfer part, each sample draws a collision — both states from
/// tail-tempered equilibrium proposals (double-variance Gaussian velocities,
/// double-scale Gamma energies, with the exact density ratio carried in the
/// weight), energy fractions from the Beta laws of the fraction measure so
/// that only its mass enters the weight, and a uniform scattering direction —
/// and updates the whole matrix with the mixed products of the four per-state
/// basis rows, the same-state products having already been accounted for
/// exactly. The raw matrix is exactly symmetric (the symmetrization pass is
/// the identity and `asymmetry` records zero); invariants are annihilated
/// and eigenvalues confined to the negative half line up to the recorded
/// entry errors.
///
/// Errors: non-Monte-Carlo scheme, a cross section without collision
/// symmetry, a basis over its dimension cap, or a Gram defect beyond `1e-8`.
/// A largest entry error above 10% of the largest entry magnitude sets
/// `refinement_needed` instead of failing.
pub fn assemble(
    basis: &BasisSpec,
    gas: &GasSpec,
    model: &CrossSectionModel,
    quad: &QuadratureSpec,
) -> Result<OperatorMatrix> {
    gas.validate()?;
    basis.validate()?;
    if quad.scheme != Scheme::MonteCarlo {
        return Err(Error::InvalidInput(
            "operator assembly integrates an eleven-dimensional collision measure; only the \
             monte_carlo scheme is supported"
                .into(),
        ));
    }
    certify_model(model, gas, quad)?;
    let defect = max_identity_defect(&gram_matrix(basis, gas)?);
    if defect > GRAM_TOL {
        return Err(Error::InvalidInput(format!(
            "weighted basis failed its orthonormality check: max Gram defect {defect:.3e} \
             exceeds {GRAM_TOL:.0e}"
        )));
    }
    let (s_mat, s_se) = multiplication_part(basis, gas, model, quad)?;

    let d = basis.dim();
    let tri = d * (d + 1) / 2;
    let multis = basis.velocity_indices();
    let alpha = gas.alpha;
    let n_v = basis.n_v;
    let n_i = basis.n_i;
    let blocks = quad.blocks();
    let seed = quad.seed;
    // Density ratio of the equilibrium pair to the tempered proposal pair:
    // `M/p = 2^{3/2} e^{-|v|^2/4}` per velocity, `theta^{alpha+1}
    // e^{-I(1-1/theta)}` per energy; the energy scale `theta` sits near the
    // variance optimum for the highest-degree mixed products.
    let theta = 3.0f64;
    let temper_const = 8.0 * theta.powf(2.0 * alpha + 2.0);
    let energy_rate = 1.0 - 1.0 / theta;
    // The energy fractions are drawn from the Beta laws matching the fraction
    // measure, which absorbs its `(r(1-r))^alpha (1-R)^{2alpha+1} sqrt(R)`
    // factor into the proposal exactly and leaves only its mass in the
    // weight.
    let beta_r = rand_distr::Beta::new(alpha + 1.0, alpha + 1.0)
        .map_err(|e| Error::InvalidInput(format!("fraction proposal: {e}")))?;
    let beta_kin = rand_distr::Beta::new(1.5, 2.0 * alpha + 2.0)
        .map_err(|e| Error::InvalidInput(format!("fraction proposal: {e}")))?;
    let fraction_mass = beta(alpha + 1.0, alpha + 1.0) * beta(1.5, 2.0 * alpha + 2.0);
    let watch = NanWatch::new("assemble", "collision integrand non-finite");

    let sums = quad::run_blocked_ranged(
        blocks,
        ASSEMBLY_RANGES,
        |range| {
            let mut acc = TriSums {
                sum: vec![0.0; tri],
                sum_sq: vec![0.0; tri],
            };
            let mut hx = vec![0.0; n_v + 1];
            let mut hy = vec![0.0; n_v + 1];
            let mut hz = vec![0.0; n_v + 1];
            let mut li = vec![0.0; n_i + 1];
            let mut rows = [
                vec![0.0; d],
                vec![0.0; d],
                vec![0.0; d],
                vec![0.0; d],
            ];
            let mut u = vec![0.0; d];
            for block in range {
                let mut rng = quad::block_rng(seed, "assemble", block);
                for _ in 0..BLOCK_SAMPLES {
                    let s = ParticleState::new(
                        quad::sample_std_normal3(&mut rng) * std::f64::consts::SQRT_2,
                        theta * positive_energy(&mut rng, alpha),
                    );
                    let s_star = ParticleState::new(
                        quad::sample_std_normal3(&mut rng) * std::f64::consts::SQRT_2,
                        theta * positive_energy(&mut rng, alpha),
                    );
                    let r = rand_distr::Distribution::sample(&beta_r, &mut rng);
                    let r_kin = rand_distr::Distribution::sample(&beta_kin, &mut rng);
                    let omega = quad::sample_unit_sphere(&mut rng);
                    let params = CollisionParams { r, r_kin, omega };
                    let Ok((s_post, s_star_post)) = post_collision(&s, &s_star, &params) else {
                        // Counted sample with zero contribution, matching the
                        // pointwise evaluators.
                        continue;
                    };
                    let decay = (-0.25 * (s.v.norm_squared() + s_star.v.norm_squared())
                        - energy_rate * (s.i + s_star.i))
                        .exp();
                    let w = model.eval_b(gas, &s, &s_star, &params)
                        * fraction_mass
                        * FOUR_PI
                        * temper_const
                        * decay;
                    for (row, state) in rows.iter_mut().zip([&s_post, &s_star_post, &s, &s_star])
                    {
                        state_rows(alpha, state, &mut hx, &mut hy, &mut hz, &mut li);
                        row.fill(0.0);
                        add_scaled_row(&multis, &hx, &hy, &hz, &li, 1.0, row);
                    }
                    let [p, q, a, b] = &rows;
                    for k in 0..d {
                        u[k] = p[k] + q[k] - a[k] - b[k];
                    }
                    if !(w.is_finite() && u.iter().all(|x| x.is_finite())) {
                        watch.guard(f64::NAN);
                        continue;
                    }
                    let scale = -0.25 * w;
                    let mut t = 0;
                    for i in 0..d {
                        let (ui, pi, qi, ai, bi) =
                            (scale * u[i], scale * p[i], scale * q[i], scale * a[i], scale * b[i]);
                        for j in i..d {
                            let val = ui * u[j] - pi * p[j] - qi * q[j] - ai * a[j] - bi * b[j];
                            acc.sum[t] += val;
                            acc.sum_sq[t] += val * val;
                            t += 1;
                        }
                    }
                }
            }
            acc
        },
        |mut a, b| {
            for t in 0..tri {
                a.sum[t] += b.sum[t];
                a.sum_sq[t] += b.sum_sq[t];
            }
            a
        },
    );
    watch.ensure_clean()?;

    let samples = blocks * BLOCK_SAMPLES;
    let mut entries = DMatrix::zeros(d, d);
    let mut std_errs = DMatrix::zeros(d, d);
    let mut max_abs = 0.0f64;
    let mut max_std_err = 0.0f64;
    let mut t = 0;
    for i in 0..d {
        for j in i..d {
            let est = Estimate::from_sums(sums.sum[t], sums.sum_sq[t], samples);
            let value = s_mat[(i, j)] + est.value;
            let std_err = est.std_err.hypot(s_se[(i, j)]);
            entries[(i, j)] = value;
            entries[(j, i)] = value;
            std_errs[(i, j)] = std_err;
            std_errs[(j, i)] = std_err;
            max_abs = max_abs.max(value.abs());
            max_std_err = max_std_err.max(std_err);
            t += 1;
        }
    }
    let tol0 = (TOL0_ERR_FACTOR * max_std_err).max(TOL0_FLOOR);
    let refinement_needed = max_std_err > REFINEMENT_FRACTION * max_abs;
    Ok(OperatorMatrix {
        basis: *basis,
        entries,
        std_errs,
        asymmetry: 0.0,
        max_std_err,
        tol0,
        refinement_needed,
        samples,
    })
}

/// Real eigenvalues of the assembled matrix, sorted descending.
pub fn spectrum(op: &OperatorMatrix) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(op.entries.clone(), f64::EPSILON, 100_000).ok_or_else(
        || Error::numerics("spectrum", "the symmetric eigensolver did not converge"),
    )?;
    let mut evs: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    evs.sort_by(|a, b| b.total_cmp(a));
    Ok(evs)
}

/// Residuals of the conserved modes under the assembled matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelCheckReport {
    /// `||A c||` for the projections `c` of `1, v1, v2, v3, |v|^2/2 + I`.
    pub residuals: [f64; 5],
    /// `||c||` for the same projections.
    pub coefficient_norms: [f64; 5],
    /// Captured weight `||c||^2 / E_M[f^2]` of each projection.
    pub captures: [f64; 5],
    /// Residual of the non-invariant control `v1^2`, expected far above
    /// `tol0 * control_coefficient_norm`.
    pub control_residual: f64,
    pub control_coefficient_norm: f64,
    pub control_capture: f64,
    pub tol0: f64,
    /// True when all five conserved-mode residuals sit below
    /// `tol0 * coefficient norm`.
    pub passed: bool,
}

/// Projects the five conserved modes `M^{1/2} {1, v1, v2, v3, |v|^2/2 + I}`
/// onto the basis, applies the matrix, and reports residual norms, together
/// with the non-invariant control `M^{1/2} v1^2`.
///
/// Errors when a conserved mode loses more than 1% of its weight in the
/// projection: residuals of a badly represented invariant say nothing about
/// the operator, only about the basis.
pub fn kernel_check(op: &OperatorMatrix, gas: &GasSpec) -> Result<KernelCheckReport> {
    gas.validate()?;
    let basis = op.basis;
    let d = basis.dim();
    let multis = basis.velocity_indices();
    let funcs: [fn(&Vec3, f64) -> f64; 6] = [
        |_, _| 1.0,
        |v, _| v.x,
        |v, _| v.y,
        |v, _| v.z,
        |v, i| 0.5 * v.norm_squared() + i,
        |v, _| v.x * v.x,
    ];
    let mut coeffs: Vec<DVector<f64>> = (0..funcs.len()).map(|_| DVector::zeros(d)).collect();
    let mut mass = [0.0f64; 6];
    let mut hx = vec![0.0; basis.n_v + 1];
    let mut hy = vec![0.0; basis.n_v + 1];
    let mut hz = vec![0.0; basis.n_v + 1];
    let mut li = vec![0.0; basis.n_i + 1];
    let mut row = vec![0.0; d];
    for (v, i, w) in state_rule(&basis, gas) {
        let s = ParticleState::new(v, i);
        state_rows(gas.alpha, &s, &mut hx, &mut hy, &mut hz, &mut li);
        row.fill(0.0);
        add_scaled_row(&multis, &hx, &hy, &hz, &li, 1.0, &mut row);
        for (f_idx, f) in funcs.iter().enumerate() {
            let fv = f(&v, i);
            mass[f_idx] += w * fv * fv;
            let c = &mut coeffs[f_idx];
            for (k, &rk) in row.iter().enumerate() {
                c[k] += w * rk * fv;
            }
        }
    }

    let mut residuals = [0.0f64; 5];
    let mut norms = [0.0f64; 5];
    let mut captures = [0.0f64; 5];
    for f_idx in 0..5 {
        let c = &coeffs[f_idx];
        let norm = c.norm();
        let capture = norm * norm / mass[f_idx];
        if capture < MASS_CAPTURE_MIN {
            return Err(Error::InvalidInput(format!(
                "the basis captures only {:.2}% of the {} mode; it is too small for a kernel \
                 check — enlarge n_v or n_i",
                100.0 * capture,
                INVARIANT_LABELS[f_idx]
            )));
        }
        residuals[f_idx] = (&op.entries * c).norm();
        norms[f_idx] = norm;
        captures[f_idx] = capture;
    }
    let control = &coeffs[5];
    let control_norm = control.norm();
    let passed = residuals
        .iter()
        .zip(&norms)
        .all(|(res, norm)| *res <= op.tol0 * norm);
    Ok(KernelCheckReport {
        residuals,
        coefficient_norms: norms,
        captures,
        control_residual: (&op.entries * control).norm(),
        control_coefficient_norm: control_norm,
        control_capture: control_norm * control_norm / mass[5],
        tol0: op.tol0,
        passed,
    })
}

/// Spectral summary of an assembled matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpectrumReport {
    /// Eigenvalues sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Number of eigenvalues within `tol0` of zero.
    pub kernel_dim_detected: usize,
    /// Distance from zero to the nearest eigenvalue below `-tol0`
    /// (zero when none exists).
    pub gap_estimate: f64,
    pub tol0: f64,
    /// Collision frequency at the zero-velocity, zero-energy state — the
    /// lower edge of the frequency for models monotone in energy, and the
    /// empirical edge of where the discrete eigenvalues accumulate.
    pub nu0: f64,
}

/// Computes the spectrum together with the kernel count, the gap estimate,
/// and the collision-frequency edge `nu0`.
pub fn spectrum_report(
    op: &OperatorMatrix,
    gas: &GasSpec,
    model: &CrossSectionModel,
    quad: &QuadratureSpec,
) -> Result<SpectrumReport> {
    let eigenvalues = spectrum(op)?;
    let tol0 = op.tol0;
    let kernel_dim_detected = eigenvalues.iter().filter(|l| l.abs() <= tol0).count();
    let gap = eigenvalues
        .iter()
        .copied()
        .filter(|l| *l < -tol0)
        .map(|l| -l)
        .fold(f64::INFINITY, f64::min);
    let origin = ParticleState::new(Vec3::zeros(), 0.0);
    let nu0 = eval_nu(&origin, gas, model, quad)?.value;
    Ok(SpectrumReport {
        eigenvalues,
        kernel_dim_detected,
        gap_estimate: if gap.is_finite() { gap } else { 0.0 },
        tol0,
        nu0,
    })
}
