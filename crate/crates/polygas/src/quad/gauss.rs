//! Gauss rules built from the Jacobi matrices of the orthogonal-polynomial
//! recurrences (Golub-Welsch): nodes are the eigenvalues, weights come from
//! the first eigenvector components scaled by the zeroth moment.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::gamma;

/// One-dimensional quadrature rule: `sum_i weights[i] * f(nodes[i])`
/// approximates the integral of `f` against the rule's weight function.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Builds the rule for the three-term recurrence
/// `p_{k+1} = (x - a_k) p_k - b_k p_{k-1}` with zeroth moment `mu0`.
fn golub_welsch(a: &[f64], b: &[f64], mu0: f64) -> GaussRule {
    let n = a.len();
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 0..n {
        jacobi[(k, k)] = a[k];
        if k + 1 < n {
            let off = b[k + 1].sqrt();
            jacobi[(k, k + 1)] = off;
            jacobi[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let first = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * first * first)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss-Hermite rule for the weight `e^{-x^2/2}` on the real line.
///
/// Weights sum to `sqrt(2 pi)`; an `n`-node rule integrates polynomials of
/// degree `2n - 1` exactly.
pub fn hermite(n: usize) -> GaussRule {
    assert!(n > 0);
    // Physicists' recurrence for e^{-x^2} has a_k = 0, b_k = k/2, mu0 = sqrt(pi);
    // substituting x -> x / sqrt(2) rescales nodes by sqrt(2) and mu0 by the same.
    let a = vec![0.0; n];
    let b: Vec<f64> = (0..n).map(|k| k as f64 / 2.0).collect();
    let mut rule = golub_welsch(&a, &b, std::f64::consts::PI.sqrt());
    let s = std::f64::consts::SQRT_2;
    for x in &mut rule.nodes {
        *x *= s;
    }
    for w in &mut rule.weights {
        *w *= s;
    }
    rule
}

/// Gauss-Legendre rule on `[-1, 1]` (unit weight).
pub fn legendre(n: usize) -> GaussRule {
    assert!(n > 0);
    let a = vec![0.0; n];
    let b: Vec<f64> = (0..n)
        .map(|k| {
            let k = k as f64;
            k * k / (4.0 * k * k - 1.0)
        })
        .collect();
    golub_welsch(&a, &b, 2.0)
}

/// Generalized Gauss-Laguerre rule for the weight `x^alpha e^{-x}` on `x > 0`.
///
/// Weights sum to `Gamma(alpha + 1)`.
pub fn laguerre(n: usize, alpha: f64) -> GaussRule {
    assert!(n > 0);
    assert!(alpha > -1.0);
    let a: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + alpha + 1.0).collect();
    let b: Vec<f64> = (0..n).map(|k| k as f64 * (k as f64 + alpha)).collect();
    golub_welsch(&a, &b, gamma(alpha + 1.0))
}

/// Tensor rule over velocity and internal energy for integrals of the form
/// `integral f(v, I) e^{-|v|^2/2} I^alpha e^{-I} dv dI`.
///
/// Returns `(v, I, w)` triples; the number of points is `n_v^3 * n_i`.
pub fn velocity_energy_rule(n_v: usize, n_i: usize, alpha: f64) -> Vec<(crate::Vec3, f64, f64)> {
    let hv = hermite(n_v);
    let li = laguerre(n_i, alpha);
    let mut out = Vec::with_capacity(n_v * n_v * n_v * n_i);
    for (&x, &wx) in hv.nodes.iter().zip(&hv.weights) {
        for (&y, &wy) in hv.nodes.iter().zip(&hv.weights) {
            for (&z, &wz) in hv.nodes.iter().zip(&hv.weights) {
                for (&i, &wi) in li.nodes.iter().zip(&li.weights) {
                    out.push((crate::Vec3::new(x, y, z), i, wx * wy * wz * wi));
                }
            }
        }
    }
    out
}
