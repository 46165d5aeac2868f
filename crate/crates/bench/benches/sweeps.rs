use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use latgauge_core::group::{exp_map, AlgebraElement, GroupSpec};
use latgauge_core::lattice::TorusLattice;
use latgauge_core::sigma::{BoundaryFields, SigmaField, SigmaGraph, SigmaParams, SigmaSampler};
use latgauge_core::ym::{Algorithm, GaugeField, YmParams, YmSampler};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ym_sampler(spec: GroupSpec, algorithm: Algorithm) -> YmSampler {
    let lat = Arc::new(TorusLattice::new(2, 16).unwrap());
    let params = YmParams::new(spec, 0.06, lat.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let field = GaugeField::haar(spec, &lat, &mut rng);
    YmSampler::new(params, field, algorithm, 0.5).unwrap()
}

fn ym_sweeps(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut hb = ym_sampler(GroupSpec::su(2), Algorithm::HeatBath);
    c.bench_function("su2 heat bath sweep, 16x16", |b| b.iter(|| hb.sweep(&mut rng, false)));
    let mut me = ym_sampler(GroupSpec::su(3), Algorithm::Metropolis);
    c.bench_function("su3 metropolis sweep, 16x16", |b| b.iter(|| me.sweep(&mut rng, false)));
}

fn sigma_sweep(c: &mut Criterion) {
    let spec = GroupSpec::su(2);
    let graph = Arc::new(SigmaGraph::torus(2, 16).unwrap());
    let params = SigmaParams::new(spec, 0.05, graph.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bc = BoundaryFields::haar(&graph, 2, &mut rng);
    let field = SigmaField::haar(spec, graph.n_vertices(), &mut rng);
    let mut s = SigmaSampler::new(params, bc, field, Algorithm::Auto).unwrap();
    c.bench_function("su2 sigma sweep, 16x16 slice", |b| b.iter(|| s.sweep(&mut rng, false)));
}

fn expm(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = AlgebraElement::gaussian(GroupSpec::su(4), &mut rng).scaled(0.3);
    c.bench_function("su4 exp map", |b| b.iter(|| exp_map(std::hint::black_box(&x))));
}

criterion_group!(benches, ym_sweeps, sigma_sweep, expm);
criterion_main!(benches);
