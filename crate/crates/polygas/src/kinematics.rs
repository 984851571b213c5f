//! Collision kinematics for a pair of molecules carrying internal energy.
//!
//! Working units put the thermal scale to one (unit mass, `kT = 1`). A binary
//! collision conserves momentum and the total pair energy
//! `E = |v - v*|^2 / 4 + I + I*`, and the post-collisional state is selected
//! by three parameters: the kinetic-energy share `R`, the split `r` of the
//! remaining internal energy between the two molecules, and a scattering
//! direction. The direction can be given either as a reflection axis `omega`
//! or as the post-collisional relative direction `sigma`; both charts are
//! provided together with the measure factor that relates them.
//!
//! The slice charts [`h_map`] / [`h_inverse`] trade the pre-collision partner
//! `(v*, I*)` for one post-collisional state at fixed `(v, I, r, R, sigma)`.
//! They are what turns collision integrals into integral kernels, so their
//! Jacobians and domain predicate live here next to the transforms.

use crate::{Error, Result, Vec3};

/// Tolerance on `| |omega| - 1 |` for direction arguments.
pub const UNIT_TOL: f64 = 1e-12;

/// One molecule: velocity and internal energy.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParticleState {
    pub v: Vec3,
    /// Internal energy, `I >= 0`.
    pub i: f64,
}

impl ParticleState {
    pub fn new(v: Vec3, i: f64) -> Self {
        ParticleState { v, i }
    }
}

/// Collision parameters in the reflection chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionParams {
    /// Split of the post-collisional internal energy: `I' = r (1 - R) E`.
    pub r: f64,
    /// Share of the total energy returned to relative motion:
    /// `|v' - v'*|^2 / 4 = R E`.
    pub r_kin: f64,
    /// Reflection axis, unit vector.
    pub omega: Vec3,
}

/// The scattering direction in the `sigma` chart together with the measure
/// factor `d omega / d sigma = 1 / (2 |sigma - g/|g||)` of one branch of the
/// two-to-one map `omega -> sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaParams {
    pub sigma: Vec3,
    /// `1 / (2 |sigma - ghat|)`; `+inf` when `omega` is orthogonal to the
    /// relative direction (then `sigma = ghat` exactly, a measure-zero set the
    /// caller has to treat as flagged).
    pub weight: f64,
}

/// Center-of-mass frame of a colliding pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterOfMass {
    /// `G = (v + v*) / 2`.
    pub velocity: Vec3,
    /// Total pair energy `E = |v - v*|^2 / 4 + I + I*`.
    pub energy: f64,
}

/// `E = |v - v*|^2 / 4 + I + I*`, symmetric in the pair.
pub fn total_energy(s: &ParticleState, s_star: &ParticleState) -> f64 {
    0.25 * (s.v - s_star.v).norm_squared() + s.i + s_star.i
}

pub fn center_of_mass(s: &ParticleState, s_star: &ParticleState) -> CenterOfMass {
    CenterOfMass {
        velocity: 0.5 * (s.v + s_star.v),
        energy: total_energy(s, s_star),
    }
}

fn check_unit(omega: Vec3) -> Result<()> {
    let norm = omega.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnitDirection { norm });
    }
    Ok(())
}

/// Householder reflection `T_omega(z) = z - 2 (z . omega) omega`.
///
/// An isometric involution of `R^3`; errors if `omega` is not a unit vector.
pub fn reflect(z: Vec3, omega: Vec3) -> Result<Vec3> {
    check_unit(omega)?;
    Ok(z - 2.0 * z.dot(&omega) * omega)
}

/// Post-collisional pair for parameters `(r, R, omega)`:
///
/// `v' = G + sqrt(RE) T_omega(ghat)`, `v'* = G - sqrt(RE) T_omega(ghat)`,
/// `I' = r (1 - R) E`, `I'* = (1 - r)(1 - R) E`.
///
/// A zero-energy pair is returned unchanged (the transform is only used under
/// integrals and `E = 0` is a null set). If the pair carries energy but has no
/// relative velocity, the relative direction is taken to be `omega` itself so
/// the map stays defined on another null set.
pub fn post_collision(
    s: &ParticleState,
    s_star: &ParticleState,
    p: &CollisionParams,
) -> Result<(ParticleState, ParticleState)> {
    check_unit(p.omega)?;
    let com = center_of_mass(s, s_star);
    if com.energy == 0.0 {
        return Ok((*s, *s_star));
    }
    let g = s.v - s_star.v;
    let ghat = if g.norm() > 0.0 { g.normalize() } else { p.omega };
    let dir = reflect(ghat, p.omega)?;
    let half_rel = (p.r_kin * com.energy).sqrt() * dir;
    let internal = (1.0 - p.r_kin) * com.energy;
    Ok((
        ParticleState::new(com.velocity + half_rel, p.r * internal),
        ParticleState::new(com.velocity - half_rel, (1.0 - p.r) * internal),
    ))
}

/// Energy fractions `(r', R')` carried by a pair seen as the *outcome* of a
/// collision: `R' = |v - v*|^2 / (4E)` and `r' = I / ((1 - R') E)`.
///
/// `r'` is zero when `I = 0`. A zero-energy pair has no fractions.
pub fn pre_fractions(s: &ParticleState, s_star: &ParticleState) -> Result<(f64, f64)> {
    let e = total_energy(s, s_star);
    if e == 0.0 {
        return Err(Error::ZeroPairEnergy);
    }
    let r_kin = (0.25 * (s.v - s_star.v).norm_squared() / e).min(1.0);
    let r = if s.i == 0.0 {
        0.0
    } else if r_kin >= 1.0 {
        // E = |g|^2/4 + I + I* makes R' = 1 with I > 0 impossible; only
        // rounding could get us here.
        return Err(Error::numerics(
            "pre_fractions",
            "kinetic fraction rounded to 1 with positive internal energy",
        ));
    } else {
        s.i / ((1.0 - r_kin) * e)
    };
    Ok((r, r_kin))
}

/// Scattering direction in the `sigma` chart: `sigma = T_omega(ghat)` and the
/// one-branch measure factor `1 / (2 |sigma - ghat|)`.
///
/// The factor is `+inf` when `omega` is orthogonal to `ghat` (`sigma = ghat`);
/// quadrature code never uses it bare, see [`omega_cosine`].
pub fn sigma_of_omega(g: Vec3, omega: Vec3) -> Result<SigmaParams> {
    if g.norm() == 0.0 {
        return Err(Error::InvalidInput(
            "sigma chart needs a nonzero relative velocity".into(),
        ));
    }
    let ghat = g.normalize();
    let sigma = reflect(ghat, omega)?;
    let dist = (sigma - ghat).norm();
    Ok(SigmaParams {
        sigma,
        weight: if dist > 0.0 { 0.5 / dist } else { f64::INFINITY },
    })
}

/// `|omega . ghat|` recovered from the `sigma` chart: equals
/// `|sigma - ghat| / 2`.
///
/// Cross sections proportional to `|omega . ghat|` cancel the singular chart
/// factor exactly: `|omega . ghat| / (2 |sigma - ghat|) = 1/4` on one branch,
/// `1/2` once the two `omega` preimages of each `sigma` are folded together.
pub fn omega_cosine(sigma: Vec3, ghat: Vec3) -> f64 {
    0.5 * (sigma - ghat).norm()
}

/// Fused angular factor of the folded `omega -> sigma` chart for cross
/// sections carrying `|omega . ghat|`.
pub const FOLDED_COSINE_WEIGHT: f64 = 0.5;

/// Jacobian of the collision chart `(v*, I*, r, R, sigma) -> (G, E, v', I')`
/// at fixed `(v, I)`:  `(1/16) R^{1/2} (1 - R) E^{5/2}`.
pub fn bl_jacobian(r_kin: f64, e: f64) -> f64 {
    0.0625 * r_kin.sqrt() * (1.0 - r_kin) * e.powf(2.5)
}

/// Which post-collisional state a slice chart solves for.
///
/// `K2` trades `(v*, I*)` for `(v'*, I'*)`; `K3` trades it for `(v', I')`.
/// The names match the kernels `k2` and `k3` built on the charts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceBranch {
    K2,
    K3,
}

/// Everything a slice chart holds fixed: the reference molecule `(v, I)`, the
/// energy fractions, and the scattering direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceAnchor {
    pub v: Vec3,
    pub i: f64,
    pub r: f64,
    pub r_kin: f64,
    pub sigma: Vec3,
}

impl SliceAnchor {
    /// `E / y`: the total energy is `scale * y` on the slice.
    pub fn scale(&self, branch: SliceBranch) -> f64 {
        match branch {
            SliceBranch::K2 => 1.0 / ((1.0 - self.r) * (1.0 - self.r_kin)),
            SliceBranch::K3 => 1.0 / (self.r * (1.0 - self.r_kin)),
        }
    }
}

/// Jacobian of the inverse slice chart `(x, y) -> (v*, I*)`:
/// `8 / ((1 - r)(1 - R))` on the `K2` branch, `8 / (r (1 - R))` on `K3`.
pub fn slice_jacobian(branch: SliceBranch, anchor: &SliceAnchor) -> f64 {
    8.0 * anchor.scale(branch)
}

/// Forward slice chart: maps the collision partner `(v*, I*)` to the
/// post-collisional state the branch solves for.
///
/// `K2`: `x = G - sqrt(RE) sigma`, `y = I'* = (1 - r)(1 - R) E`.
/// `K3`: `x = G + sqrt(RE) sigma`, `y = I'  = r (1 - R) E`.
pub fn h_map(branch: SliceBranch, anchor: &SliceAnchor, s_star: &ParticleState) -> (Vec3, f64) {
    let state = ParticleState::new(anchor.v, anchor.i);
    let com = center_of_mass(&state, s_star);
    let shift = (anchor.r_kin * com.energy).sqrt() * anchor.sigma;
    let internal = (1.0 - anchor.r_kin) * com.energy;
    match branch {
        SliceBranch::K2 => (com.velocity - shift, (1.0 - anchor.r) * internal),
        SliceBranch::K3 => (com.velocity + shift, anchor.r * internal),
    }
}

/// Full reconstruction of a collision from a slice point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceGeometry {
    /// The collision partner `(v*, I*)` of the anchor molecule.
    pub partner: ParticleState,
    /// The post-collisional state the chart did *not* solve for:
    /// `(v', I')` on the `K2` branch, `(v'*, I'*)` on `K3`.
    pub other_post: ParticleState,
    pub com: CenterOfMass,
}

/// Inverse slice chart without the domain bookkeeping: reconstructs the whole
/// collision from `(x, y)`, or `None` when the reconstructed `I*` is not
/// strictly positive (the point lies outside the slice domain).
pub fn slice_geometry(
    branch: SliceBranch,
    anchor: &SliceAnchor,
    x: Vec3,
    y: f64,
) -> Option<SliceGeometry> {
    if y <= 0.0 {
        return None;
    }
    let e = anchor.scale(branch) * y;
    let shift = (anchor.r_kin * e).sqrt() * anchor.sigma;
    let (center, other_post) = match branch {
        SliceBranch::K2 => {
            let center = x + shift;
            let i_prime = anchor.r / (1.0 - anchor.r) * y;
            (center, ParticleState::new(x + 2.0 * shift, i_prime))
        }
        SliceBranch::K3 => {
            let center = x - shift;
            let i_prime_star = (1.0 - anchor.r) / anchor.r * y;
            (center, ParticleState::new(x - 2.0 * shift, i_prime_star))
        }
    };
    let i_star = e - anchor.i - (anchor.v - center).norm_squared();
    if i_star <= 0.0 {
        return None;
    }
    Some(SliceGeometry {
        partner: ParticleState::new(2.0 * center - anchor.v, i_star),
        other_post,
        com: CenterOfMass {
            velocity: center,
            energy: e,
        },
    })
}

/// Inverse slice chart: the collision partner `(v*, I*)` behind the slice
/// point `(x, y)`. Errors when the point lies outside the slice domain.
pub fn h_inverse(
    branch: SliceBranch,
    anchor: &SliceAnchor,
    x: Vec3,
    y: f64,
) -> Result<ParticleState> {
    slice_geometry(branch, anchor, x, y)
        .map(|geo| geo.partner)
        .ok_or_else(|| Error::OutsideDomain {
            reason: "reconstructed partner internal energy is not positive".into(),
        })
}

/// Strict domain predicate of the slice chart: true exactly when the
/// reconstructed partner has `I* > 0`.
pub fn in_domain(branch: SliceBranch, anchor: &SliceAnchor, x: Vec3, y: f64) -> bool {
    slice_geometry(branch, anchor, x, y).is_some()
}
