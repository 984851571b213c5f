//! Quadrature drivers: deterministic block Monte Carlo and Gauss rules.
//!
//! Monte Carlo estimates are organized as a fixed number of contiguous block
//! ranges. Every block owns a counter-seeded generator derived from the global
//! seed, a stream label, and the block index, and block results are merged in
//! block order inside each range and in range order at the end. The summation
//! tree therefore depends only on the sample budget, never on the number of
//! worker threads or on whether the `parallel` feature is enabled, which makes
//! every estimate bitwise reproducible.

pub mod gauss;

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::{Error, Result, Vec3};

/// Thread-safe tally of non-finite integrand nodes. Sampling closures route
/// every value through [`NanWatch::guard`] (non-finite nodes contribute zero
/// so the estimate stays usable for diagnostics), and [`NanWatch::finish`]
/// turns a nonzero tally into a hard error instead of a silently biased
/// result.
pub(crate) struct NanWatch {
    count: AtomicU64,
    context: &'static str,
    cause: &'static str,
}

impl NanWatch {
    pub(crate) fn new(context: &'static str, cause: &'static str) -> Self {
        NanWatch {
            count: AtomicU64::new(0),
            context,
            cause,
        }
    }

    pub(crate) fn guard(&self, value: f64) -> f64 {
        if value.is_finite() {
            value
        } else {
            self.count.fetch_add(1, Ordering::Relaxed);
            0.0
        }
    }

    pub(crate) fn finish(&self, est: Estimate) -> Result<Estimate> {
        self.ensure_clean()?;
        Ok(est)
    }

    /// [`NanWatch::finish`] for callers whose result is not a single
    /// [`Estimate`] (matrix assemblies and the like).
    pub(crate) fn ensure_clean(&self) -> Result<()> {
        let n = self.count.load(Ordering::Relaxed);
        if n == 0 {
            Ok(())
        } else {
            Err(Error::numerics(
                self.context,
                format!("{} at {n} nodes", self.cause),
            ))
        }
    }
}

/// Which quadrature backend an operator evaluation should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Blocked Monte Carlo with importance sampling matched to the measure.
    MonteCarlo,
    /// Tensor Gauss rules (Hermite in each velocity component, generalized
    /// Laguerre in internal energy). Only available where the integrand is
    /// smooth and the dimension is low.
    TensorGauss,
}

/// Settings shared by every quadrature-backed evaluation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    /// Monte Carlo sample budget. Rounded up to a whole number of blocks.
    pub samples: u64,
    /// Nodes per axis for tensor Gauss rules.
    pub nodes: usize,
    /// Velocity truncation radius for bounded-support scans and moment
    /// truncation warnings.
    pub v_max: f64,
    /// Internal-energy truncation for the same purpose.
    pub i_max: f64,
    pub seed: u64,
    /// Clearance kept from the endpoints of the energy-fraction square when a
    /// kernel slice is sampled; `0` means the open square is sampled as is.
    pub margin: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            scheme: Scheme::MonteCarlo,
            samples: 400_000,
            nodes: 24,
            v_max: 8.0,
            i_max: 40.0,
            seed: 7,
            margin: 0.0,
        }
    }
}

impl QuadratureSpec {
    pub fn with_samples(mut self, samples: u64) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn blocks(&self) -> u64 {
        self.samples.div_ceil(BLOCK_SAMPLES).max(1)
    }

    /// Actual number of samples drawn: the budget rounded up to whole blocks.
    pub fn effective_samples(&self) -> u64 {
        self.blocks() * BLOCK_SAMPLES
    }
}

/// Samples per Monte Carlo block. Fixed so that the block layout, and with it
/// the floating-point summation order, never depends on runtime conditions.
pub const BLOCK_SAMPLES: u64 = 4096;

/// Number of contiguous block ranges a run is partitioned into. Constant for
/// the same reason as [`BLOCK_SAMPLES`].
const RANGES: u64 = 64;

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub samples: u64,
}

impl Estimate {
    /// Builds the estimate from raw accumulators over `n` samples.
    pub(crate) fn from_sums(sum: f64, sum_sq: f64, n: u64) -> Estimate {
        let nf = n as f64;
        let mean = sum / nf;
        let var = ((sum_sq - sum * sum / nf) / (nf - 1.0)).max(0.0);
        Estimate {
            value: mean,
            std_err: (var / nf).sqrt(),
            samples: n,
        }
    }

    /// True when zero lies within `k` standard errors of the value.
    pub fn consistent_with_zero(&self, k: f64) -> bool {
        self.value.abs() <= k * self.std_err
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in label.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Generator for one block of one labelled stream.
///
/// The 256-bit ChaCha key is derived from the global seed and the stream
/// label, and the block index selects the ChaCha stream, so distinct labels
/// give statistically independent streams while every (seed, label, block)
/// triple is reproducible in isolation.
pub fn block_rng(seed: u64, label: &str, block: u64) -> ChaCha8Rng {
    let mut state = seed ^ fnv1a(label);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(block);
    rng
}

fn range_bounds(blocks: u64, ranges: u64) -> Vec<(u64, u64)> {
    let ranges = ranges.min(blocks).max(1);
    let base = blocks / ranges;
    let extra = blocks % ranges;
    let mut out = Vec::with_capacity(ranges as usize);
    let mut start = 0;
    for i in 0..ranges {
        let len = base + u64::from(i < extra);
        out.push((start, start + len));
        start += len;
    }
    out
}

/// Runs `work` over every contiguous block range and folds the results in
/// range order. `work` must itself process its blocks in increasing order.
pub fn run_blocked<B, W, M>(blocks: u64, work: W, merge: M) -> B
where
    B: Send,
    W: Fn(std::ops::Range<u64>) -> B + Sync,
    M: FnMut(B, B) -> B,
{
    run_blocked_ranged(blocks, RANGES, work, merge)
}

/// [`run_blocked`] with an explicit range count, for callers whose per-range
/// state is large enough that the default partition would be wasteful.
pub fn run_blocked_ranged<B, W, M>(blocks: u64, ranges: u64, work: W, mut merge: M) -> B
where
    B: Send,
    W: Fn(std::ops::Range<u64>) -> B + Sync,
    M: FnMut(B, B) -> B,
{
    let bounds = range_bounds(blocks, ranges);

    #[cfg(feature = "parallel")]
    let partials: Vec<B> = {
        use rayon::prelude::*;
        bounds
            .par_iter()
            .map(|&(start, end)| work(start..end))
            .collect()
    };

    #[cfg(not(feature = "parallel"))]
    let partials: Vec<B> = bounds
        .iter()
        .map(|&(start, end)| work(start..end))
        .collect();

    let mut iter = partials.into_iter();
    let first = iter.next().expect("at least one range");
    iter.fold(first, |acc, b| merge(acc, b))
}

/// Mean and standard error of `f` over the spec's sample budget.
///
/// `f` receives a block-local generator and draws whatever it needs; the
/// estimate averages its return value.
pub fn estimate<F>(spec: &QuadratureSpec, label: &str, f: F) -> Estimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let blocks = spec.blocks();
    let seed = spec.seed;
    let (sum, sum_sq) = run_blocked(
        blocks,
        |range| {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for block in range {
                let mut rng = block_rng(seed, label, block);
                let mut bsum = 0.0;
                let mut bsq = 0.0;
                for _ in 0..BLOCK_SAMPLES {
                    let x = f(&mut rng);
                    bsum += x;
                    bsq += x * x;
                }
                sum += bsum;
                sum_sq += bsq;
            }
            (sum, sum_sq)
        },
        |(s0, q0), (s1, q1)| (s0 + s1, q0 + q1),
    );
    Estimate::from_sums(sum, sum_sq, blocks * BLOCK_SAMPLES)
}

/// Vector-valued variant of [`estimate`]: `f` fills `out` for each draw and
/// every component is averaged with the same common random numbers.
///
/// Sharing draws across components is what paired comparisons (finite
/// differences along a grid) rely on, so the per-draw values are written into
/// one buffer rather than estimated independently.
pub fn estimate_many<F>(spec: &QuadratureSpec, label: &str, dim: usize, f: F) -> Vec<Estimate>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let blocks = spec.blocks();
    let seed = spec.seed;
    let acc = run_blocked(
        blocks,
        |range| {
            let mut sum = vec![0.0; dim];
            let mut sum_sq = vec![0.0; dim];
            let mut buf = vec![0.0; dim];
            for block in range {
                let mut rng = block_rng(seed, label, block);
                for _ in 0..BLOCK_SAMPLES {
                    buf.fill(0.0);
                    f(&mut rng, &mut buf);
                    for k in 0..dim {
                        sum[k] += buf[k];
                        sum_sq[k] += buf[k] * buf[k];
                    }
                }
            }
            (sum, sum_sq)
        },
        |(mut s0, mut q0), (s1, q1)| {
            for k in 0..dim {
                s0[k] += s1[k];
                q0[k] += q1[k];
            }
            (s0, q0)
        },
    );
    let n = blocks * BLOCK_SAMPLES;
    (0..dim)
        .map(|k| Estimate::from_sums(acc.0[k], acc.1[k], n))
        .collect()
}

/// Uniform direction on the unit sphere.
pub fn sample_unit_sphere(rng: &mut impl Rng) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Standard normal vector in `R^3`.
pub fn sample_std_normal3(rng: &mut impl Rng) -> Vec3 {
    use rand_distr::StandardNormal;
    Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Draw from the density `x^alpha e^{-x} / Gamma(alpha + 1)` on `x > 0`, the
/// natural proposal for internal-energy integrals.
pub fn sample_energy(rng: &mut impl Rng, alpha: f64) -> f64 {
    let gamma = rand_distr::Gamma::new(alpha + 1.0, 1.0).expect("alpha + 1 > 0");
    rng.sample(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_recovers_known_mean() {
        let spec = QuadratureSpec::default().with_samples(200_000);
        // E[x^2] over the standard normal proposal.
        let est = estimate(&spec, "test-x2", |rng| {
            let x: f64 = rng.sample(rand_distr::StandardNormal);
            x * x
        });
        assert!((est.value - 1.0).abs() < 4.0 * est.std_err);
        assert!(est.std_err < 0.01);
    }

    #[test]
    fn estimates_are_reproducible() {
        let spec = QuadratureSpec::default().with_samples(50_000);
        let run = || {
            estimate(&spec, "test-repro", |rng| {
                let v = sample_std_normal3(rng);
                v.norm_squared()
            })
        };
        let a = run();
        let b = run();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
    }

    #[test]
    fn block_streams_are_distinct() {
        let mut r0 = block_rng(7, "a", 0);
        let mut r1 = block_rng(7, "a", 1);
        let mut r2 = block_rng(7, "b", 0);
        let x0: u64 = r0.random();
        let x1: u64 = r1.random();
        let x2: u64 = r2.random();
        assert_ne!(x0, x1);
        assert_ne!(x0, x2);
    }

    #[test]
    fn range_partition_covers_blocks() {
        for blocks in [1, 5, 63, 64, 65, 1000] {
            let bounds = range_bounds(blocks, 64);
            assert_eq!(bounds.first().unwrap().0, 0);
            assert_eq!(bounds.last().unwrap().1, blocks);
            for w in bounds.windows(2) {
                assert_eq!(w[0].1, w[1].0);
            }
        }
    }

    #[test]
    fn sphere_sampler_is_uniform_in_mean() {
        let spec = QuadratureSpec::default().with_samples(100_000);
        let est = estimate(&spec, "test-sphere", |rng| sample_unit_sphere(rng).z);
        assert!(est.value.abs() < 4.0 * est.std_err);
        let norm = estimate(&spec, "test-sphere-norm", |rng| {
            sample_unit_sphere(rng).norm()
        });
        assert!((norm.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_sampler_matches_gamma_moments() {
        let alpha = 0.5;
        let spec = QuadratureSpec::default().with_samples(200_000);
        let est = estimate(&spec, "test-energy", |rng| sample_energy(rng, alpha));
        assert!((est.value - (alpha + 1.0)).abs() < 4.0 * est.std_err);
    }
}
