//! Kinetic theory of a single polyatomic gas whose internal degrees of freedom
//! are carried by a continuous molecular energy variable.
//!
//! A molecular state is a velocity `v` together with an internal energy `I >= 0`.
//! Binary collisions redistribute the total pair energy between relative motion
//! and the two internal energies through a pair of fractions `(R, r)`, and the
//! deflection is parametrized either by a reflection direction `omega` or by the
//! post-collisional relative direction `sigma`.
//!
//! The crate covers the pieces needed to study the collision operator and its
//! linearization around a Maxwellian:
//!
//! * [`kinematics`]: collision transforms, energy bookkeeping, and the slice
//!   charts used to turn collision integrals into kernel integrals;
//! * [`cross_section`]: collision cross-section models and envelope checks;
//! * [`equilibrium`]: Maxwellian distributions, moments, entropy production;
//! * [`quad`]: deterministic Monte Carlo and Gauss quadrature drivers;
//! * [`collision`]: the bilinear collision operator in both parametrizations;
//! * [`linearized`]: the integral kernels of the linearized operator and
//!   Hilbert-Schmidt diagnostics;
//! * [`frequency`]: the collision frequency, coercivity and monotonicity scans;
//! * [`spectral`]: Galerkin assembly of the linearized operator and its
//!   spectrum.
//!
//! Numerical work is deterministic for a fixed seed: Monte Carlo estimates are
//! built from fixed-size counter-seeded blocks combined in a fixed order, so
//! results are bitwise identical across thread counts and across the `parallel`
//! feature (on by default; disabling it removes the rayon dependency).

pub mod collision;
pub mod cross_section;
pub mod equilibrium;
pub mod error;
pub mod frequency;
pub mod kinematics;
pub mod linearized;
pub mod quad;
pub mod spectral;

pub use error::{Error, Result};

/// Velocity vectors live in `R^3`.
pub type Vec3 = nalgebra::Vector3<f64>;
