//! The collision frequency `nu(v, I)`: pointwise evaluation, radial grid
//! profiles, an empirical coercivity constant, and monotony diagnostics.
//!
//! `nu` multiplies the identity part of the linearized operator, so the
//! evaluator here shares its sampler and normalization with the kernel part
//! in [`crate::linearized`]: both pull the `Delta` proposal from
//! [`crate::collision::sample_delta`] and the equilibrium prefactor from
//! [`crate::linearized::kernel_prefactor`].

use crate::collision::{sample_delta, NON_FINITE_CAUSE};
use crate::cross_section::{CrossSectionModel, GasSpec};
use crate::kinematics::{CollisionParams, ParticleState};
use crate::linearized::kernel_prefactor;
use crate::quad::{self, Estimate, NanWatch, QuadratureSpec};
use crate::{Error, Result};

/// The collision frequency
/// `nu(v, I) = C int B I*^alpha (r(1-r))^alpha (1-R)^{2 alpha + 1} R^{1/2}
///  e^{-I* - |v*|^2/2} dr dR domega dI* dv*`,
/// with `C` the shared equilibrium prefactor. Estimated by blocked Monte
/// Carlo; the proposal corrections pair exactly with the integrand's
/// exponential and `I*^alpha` factors, so the sample weight stays bounded for
/// every polynomially growing cross section.
pub fn eval_nu(
    s: &ParticleState,
    gas: &GasSpec,
    model: &CrossSectionModel,
    quad: &QuadratureSpec,
) -> Result<Estimate> {
    gas.validate()?;
    if s.i < 0.0 {
        return Err(Error::InvalidInput(
            "internal energy must be nonnegative".into(),
        ));
    }
    let alpha = gas.alpha;
    let prefactor = kernel_prefactor(alpha);
    let watch = NanWatch::new("eval_nu", NON_FINITE_CAUSE);
    let s = *s;
    let est = quad::estimate(quad, "eval-nu", |rng| {
        let w = sample_delta(rng, alpha, quad.margin);
        let p = w.point;
        let s_star = ParticleState::new(p.v_star, p.i_star);
        let params = CollisionParams {
            r: p.r,
            r_kin: p.r_kin,
            omega: p.omega,
        };
        let b = model.eval_b(gas, &s, &s_star, &params);
        let fractions = (p.r * (1.0 - p.r)).powf(alpha)
            * (1.0 - p.r_kin).powf(2.0 * alpha + 1.0)
            * p.r_kin.sqrt();
        let decay = p.i_star.powf(alpha) * (-p.i_star - 0.5 * p.v_star.norm_squared()).exp();
        watch.guard(prefactor * b * fractions * decay * w.weight)
    });
    let est = watch.finish(est)?;
    if est.value <= 0.0 {
        return Err(Error::numerics(
            "eval_nu",
            format!("collision frequency came out nonpositive ({})", est.value),
        ));
    }
    Ok(est)
}

/// A rectangular evaluation grid in `(|v|, I)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub v_max: f64,
    pub i_max: f64,
    pub n_v: usize,
    pub n_i: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            v_max: 6.0,
            i_max: 10.0,
            n_v: 10,
            n_i: 10,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_max > 0.0) || !(self.i_max > 0.0) {
            return Err(Error::InvalidInput(
                "grid extents must be positive".into(),
            ));
        }
        if self.n_v < 2 || self.n_i < 2 {
            return Err(Error::InvalidInput(
                "grid needs at least two points per axis".into(),
            ));
        }
        Ok(())
    }

    pub fn speeds(&self) -> Vec<f64> {
        linspace(self.v_max, self.n_v)
    }

    pub fn energies(&self) -> Vec<f64> {
        linspace(self.i_max, self.n_i)
    }
}

fn linspace(max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| max * k as f64 / (n - 1) as f64).collect()
}

/// The collision frequency on a `(|v|, I)` grid. Radiality lets a 1D speed
/// axis stand in for the full velocity space; values are evaluated at
/// `v = (speed, 0, 0)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NuProfile {
    pub speeds: Vec<f64>,
    pub energies: Vec<f64>,
    /// `values[i][j]` is the estimate at `(speeds[i], energies[j])`.
    pub values: Vec<Vec<Estimate>>,
}

/// Evaluates `nu` on the grid. Every point reuses the same sampler streams
/// (common random numbers), so differences between neighboring points carry
/// strongly correlated noise and finite-difference diagnostics stay sharp.
pub fn nu_profile(
    gas: &GasSpec,
    model: &CrossSectionModel,
    grid: &GridSpec,
    quad: &QuadratureSpec,
) -> Result<NuProfile> {
    gas.validate()?;
    grid.validate()?;
    let speeds = grid.speeds();
    let energies = grid.energies();
    let mut values = Vec::with_capacity(speeds.len());
    for &speed in &speeds {
        let mut row = Vec::with_capacity(energies.len());
        for &energy in &energies {
            let s = ParticleState::new(crate::Vec3::new(speed, 0.0, 0.0), energy);
            row.push(eval_nu(&s, gas, model, quad)?);
        }
        values.push(row);
    }
    Ok(NuProfile {
        speeds,
        energies,
        values,
    })
}

/// One grid point of the coercivity diagnostic: the ratio
/// `nu / (|v|^gamma + I^{gamma/2} + 1)` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoercivityPoint {
    pub speed: f64,
    pub energy: f64,
    pub ratio: f64,
    pub std_err: f64,
}

/// Grid-minimum coercivity report. `c_hat` is the smallest observed ratio;
/// the check passes only when even `ratio - 3 s.e.` stays positive at every
/// point, so quadrature noise can never manufacture a positive verdict.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoercivityReport {
    pub c_hat: f64,
    /// Minimum of `ratio - 3 s.e.` over the grid.
    pub lower_margin: f64,
    pub passed: bool,
    pub points: Vec<CoercivityPoint>,
}

/// Fits the empirical coercivity constant of the multiplication operator:
/// the grid minimum of `nu(v, I) / (|v|^gamma + I^{gamma/2} + 1)`.
pub fn coercivity_fit(
    gas: &GasSpec,
    model: &CrossSectionModel,
    grid: &GridSpec,
    quad: &QuadratureSpec,
) -> Result<CoercivityReport> {
    grid.validate()?;
    if grid.n_v < 10 || grid.n_i < 10 {
        return Err(Error::InvalidInput(
            "coercivity grid needs at least 10 points per axis".into(),
        ));
    }
    let profile = nu_profile(gas, model, grid, quad)?;
    let mut points = Vec::with_capacity(grid.n_v * grid.n_i);
    let mut c_hat = f64::INFINITY;
    let mut lower_margin = f64::INFINITY;
    for (i, &speed) in profile.speeds.iter().enumerate() {
        for (j, &energy) in profile.energies.iter().enumerate() {
            let est = profile.values[i][j];
            let denom = speed.powf(gas.gamma) + energy.powf(0.5 * gas.gamma) + 1.0;
            let ratio = est.value / denom;
            let std_err = est.std_err / denom;
            c_hat = c_hat.min(ratio);
            lower_margin = lower_margin.min(ratio - 3.0 * std_err);
            points.push(CoercivityPoint {
                speed,
                energy,
                ratio,
                std_err,
            });
        }
    }
    Ok(CoercivityReport {
        c_hat,
        lower_margin,
        passed: lower_margin > 0.0,
        points,
    })
}

/// Noise-aware ordering verdict for a family of 1D sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    MonotoneIncreasing,
    MonotoneDecreasing,
    Constant,
    Mixed,
}

/// Classified finite differences along one grid direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DirectionTrend {
    pub trend: Trend,
    pub rises: usize,
    pub falls: usize,
    /// Differences smaller than the combined three-standard-error scale.
    pub ties: usize,
}

/// Monotony verdicts of `nu` along the speed axis and along the internal
/// energy axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MonotonyReport {
    pub along_speed: DirectionTrend,
    pub along_energy: DirectionTrend,
}

fn classify_sections<'a>(sections: impl Iterator<Item = Vec<&'a Estimate>>) -> DirectionTrend {
    let (mut rises, mut falls, mut ties) = (0usize, 0usize, 0usize);
    for section in sections {
        for pair in section.windows(2) {
            let diff = pair[1].value - pair[0].value;
            let scale = 3.0 * pair[0].std_err.hypot(pair[1].std_err);
            if diff > scale {
                rises += 1;
            } else if diff < -scale {
                falls += 1;
            } else {
                ties += 1;
            }
        }
    }
    let trend = match (rises > 0, falls > 0) {
        (true, true) => Trend::Mixed,
        (true, false) => Trend::MonotoneIncreasing,
        (false, true) => Trend::MonotoneDecreasing,
        (false, false) => Trend::Constant,
    };
    DirectionTrend {
        trend,
        rises,
        falls,
        ties,
    }
}

/// Classifies the sign of `nu`'s finite differences along `|v|` sections and
/// along `I` sections, counting differences below the combined three-sigma
/// scale as ties. Common random numbers across the grid (see [`nu_profile`])
/// keep neighboring noise correlated, which is what makes the tie threshold
/// meaningful at moderate sample counts.
pub fn monotony_check(
    gas: &GasSpec,
    model: &CrossSectionModel,
    grid: &GridSpec,
    quad: &QuadratureSpec,
) -> Result<MonotonyReport> {
    let profile = nu_profile(gas, model, grid, quad)?;
    let along_speed = classify_sections(
        (0..profile.energies.len())
            .map(|j| profile.values.iter().map(|row| &row[j]).collect()),
    );
    let along_energy =
        classify_sections(profile.values.iter().map(|row| row.iter().collect()));
    Ok(MonotonyReport {
        along_speed,
        along_energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(value: f64, std_err: f64) -> Estimate {
        Estimate {
            value,
            std_err,
            samples: 1,
        }
    }

    #[test]
    fn trend_classifier_separates_signal_from_ties() {
        let rising = vec![est(1.0, 0.01), est(2.0, 0.01), est(3.0, 0.01)];
        let flat = vec![est(1.0, 0.01), est(1.001, 0.01), est(0.999, 0.01)];
        let wobbly = vec![est(1.0, 0.01), est(2.0, 0.01), est(1.0, 0.01)];

        let up = classify_sections(std::iter::once(rising.iter().collect()));
        assert_eq!(up.trend, Trend::MonotoneIncreasing);
        assert_eq!((up.rises, up.falls, up.ties), (2, 0, 0));

        let tie = classify_sections(std::iter::once(flat.iter().collect()));
        assert_eq!(tie.trend, Trend::Constant);
        assert_eq!(tie.ties, 2);

        let mixed = classify_sections(std::iter::once(wobbly.iter().collect()));
        assert_eq!(mixed.trend, Trend::Mixed);
    }

    #[test]
    fn grid_spec_rejects_degenerate_shapes() {
        let mut grid = GridSpec::default();
        grid.n_v = 1;
        assert!(grid.validate().is_err());
        let mut grid = GridSpec::default();
        grid.i_max = 0.0;
        assert!(grid.validate().is_err());
    }

    #[test]
    fn grid_axes_hit_both_endpoints() {
        let grid = GridSpec::default();
        let speeds = grid.speeds();
        assert_eq!(speeds.first(), Some(&0.0));
        assert_eq!(speeds.last(), Some(&6.0));
        assert_eq!(speeds.len(), 10);
        let energies = grid.energies();
        assert_eq!(energies.first(), Some(&0.0));
        assert_eq!(energies.last(), Some(&10.0));
    }

    #[test]
    fn negative_internal_energy_is_rejected() {
        let gas = GasSpec::new(0.0, 0.0).unwrap();
        let model = CrossSectionModel::total_energy(1.0);
        let s = ParticleState::new(crate::Vec3::new(0.0, 0.0, 0.0), -1.0);
        assert!(eval_nu(&s, &gas, &model, &QuadratureSpec::default()).is_err());
    }
}
