//! Compares the data-parallel execution of the blocked Monte Carlo core
//! against single-threaded execution on two representative workloads: the
//! collision-frequency estimate and the Galerkin assembly.
//!
//! With the default `parallel` feature the work distributes over a rayon
//! pool, and the benchmark pits a one-thread pool against the default pool;
//! the results are bitwise identical either way because blocks merge in
//! range order. Compiled with `--no-default-features` the same benchmark
//! times the sequential fallback directly.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use polygas::cross_section::{CrossSectionModel, GasSpec};
use polygas::frequency::eval_nu;
use polygas::kinematics::ParticleState;
use polygas::quad::QuadratureSpec;
use polygas::spectral::{assemble, BasisSpec};
use polygas::Vec3;

fn flagship() -> (GasSpec, CrossSectionModel) {
    (
        GasSpec::new(0.5, 0.0).unwrap(),
        CrossSectionModel::total_energy(1.0),
    )
}

fn nu_once(gas: &GasSpec, model: &CrossSectionModel) -> f64 {
    let quad = QuadratureSpec::default().with_samples(1 << 14).with_seed(11);
    eval_nu(&ParticleState::new(Vec3::new(0.3, -0.1, 0.6), 1.2), gas, model, &quad)
        .unwrap()
        .value
}

fn assemble_once(gas: &GasSpec, model: &CrossSectionModel) -> f64 {
    let basis = BasisSpec::new(2, 2);
    let quad = QuadratureSpec::default().with_samples(1 << 13).with_seed(12);
    let op = assemble(&basis, gas, model, &quad).unwrap();
    op.entries[(1, 1)]
}

#[cfg(feature = "parallel")]
fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn bench_core(c: &mut Criterion) {
    let (gas, model) = flagship();

    let mut nu = c.benchmark_group("collision_frequency");
    #[cfg(feature = "parallel")]
    {
        nu.bench_function("one_thread", |b| {
            b.iter(|| in_pool(1, || black_box(nu_once(&gas, &model))))
        });
        nu.bench_function("default_pool", |b| {
            b.iter(|| black_box(nu_once(&gas, &model)))
        });
    }
    #[cfg(not(feature = "parallel"))]
    nu.bench_function("sequential", |b| {
        b.iter(|| black_box(nu_once(&gas, &model)))
    });
    nu.finish();

    let mut asm = c.benchmark_group("galerkin_assembly");
    asm.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        asm.bench_function("one_thread", |b| {
            b.iter(|| in_pool(1, || black_box(assemble_once(&gas, &model))))
        });
        asm.bench_function("default_pool", |b| {
            b.iter(|| black_box(assemble_once(&gas, &model)))
        });
    }
    #[cfg(not(feature = "parallel"))]
    asm.bench_function("sequential", |b| {
        b.iter(|| black_box(assemble_once(&gas, &model)))
    });
    asm.finish();
}

criterion_group!(benches, bench_core);
criterion_main!(benches);
