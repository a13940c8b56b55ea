use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spinmesh::bath::{f_pm_quadrature, zeta_integral, BathParams, Lattice};
use spinmesh::manybody::{evolve_sector, ExactTransfer, SectorSet};
use spinmesh::qudit::{sample_rng, sample_uniform};
use spinmesh::spectral::closed_form_time;
use spinmesh::{diagonalize, propagator, NetworkSpec, Spin};

fn spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral");
    for g in [2, 4, 5] {
        let spec = NetworkSpec::hypercube(2, g, 1.0, Spin::HALF).unwrap();
        let k = spec.coupling_matrix().unwrap();
        let t = closed_form_time(&spec).unwrap();
        group.bench_with_input(BenchmarkId::new("diagonalize+propagate", k.n_sites()), &k, |b, k| {
            b.iter(|| propagator(&diagonalize(black_box(k)).unwrap(), Spin::HALF, t))
        });
    }
    group.finish();
}

fn manybody(c: &mut Criterion) {
    let mut group = c.benchmark_group("manybody");
    group.sample_size(20);
    let s0 = Spin::from_twice(20).unwrap();
    let spec = NetworkSpec::engineered_chain(8, 1.0, s0).unwrap();
    let k = spec.coupling_matrix().unwrap();
    let t = closed_form_time(&spec).unwrap();
    group.bench_function("sector build N8 n<=4", |b| b.iter(|| SectorSet::build(black_box(&k), s0, 4).unwrap()));
    let sectors = SectorSet::build(&k, s0, 4).unwrap();
    let top = sectors.sector(4);
    let mut start = vec![0u8; 8];
    start[0] = 4;
    let psi = top.basis_vector(&start).unwrap();
    group.bench_function("evolve sector n=4", |b| b.iter(|| evolve_sector(top, black_box(&psi), t).unwrap()));
    let transfer = ExactTransfer::for_network(&spec, &sectors, 5, t).unwrap();
    let mut rng = sample_rng(1, 0);
    let state = sample_uniform(5, &mut rng);
    group.bench_function("transfer fidelity d=5", |b| b.iter(|| transfer.fidelity(black_box(&state), true)));
    group.finish();
}

fn bath(c: &mut Criterion) {
    let mut group = c.benchmark_group("bath");
    let params = BathParams::at_neel_fraction(1.0, 1000.0, Spin::HALF, Lattice::SimpleCubic, 0.05).unwrap();
    for phi in [1e-3, 0.1, 1.0] {
        group.bench_with_input(BenchmarkId::new("f_pm", phi), &phi, |b, &phi| {
            b.iter(|| f_pm_quadrature(black_box(phi), &params).unwrap())
        });
    }
    group.sample_size(10);
    for res in [64, 128, 256] {
        group.bench_with_input(BenchmarkId::new("zeta", res), &res, |b, &res| {
            b.iter(|| zeta_integral(Lattice::BodyCenteredCubic, black_box(res)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, spectral, manybody, bath);
criterion_main!(benches);
