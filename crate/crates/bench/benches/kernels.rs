use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use kitaev_edge::dynamics::{propagate_sparse, unit_vector, PulseSchedule, Segment};
use kitaev_edge::hamiltonian::{assemble, CouplingParams, GaugeConfig};
use kitaev_edge::lattice::{build_finite, build_strip, EdgeKind, FiniteShape, Periodicity};
use kitaev_edge::spectra::{strip_band_structure, uniform_grid, BlochModel};

fn assembly(c: &mut Criterion) {
    let g = build_finite(FiniteShape::Hexagon { side: 20 }).unwrap();
    let p = CouplingParams::isotropic(1.0, 0.027);
    let u = GaugeConfig::uniform(&g);
    c.bench_function("assemble_hexagon_20", |b| {
        b.iter(|| assemble(black_box(&g), &p, &u).unwrap())
    });
}

fn bands(c: &mut Criterion) {
    let g = build_strip(EdgeKind::Zigzag, 40, 1, Periodicity::PeriodicX).unwrap();
    let a = assemble(
        &g,
        &CouplingParams::isotropic(1.0, 0.027),
        &GaugeConfig::uniform(&g),
    )
    .unwrap();
    let model = BlochModel::new(&g, &a).unwrap();
    let grid = uniform_grid(121, g.strip.as_ref().unwrap().period);
    c.bench_function("zigzag_40_rows_121_points", |b| {
        b.iter(|| strip_band_structure(black_box(&model), &grid))
    });
}

fn propagation(c: &mut Criterion) {
    let g = build_finite(FiniteShape::Hexagon { side: 20 }).unwrap();
    let a = assemble(
        &g,
        &CouplingParams::isotropic(1.0, 0.027),
        &GaugeConfig::uniform(&g),
    )
    .unwrap();
    let sched = PulseSchedule::new().then(Segment::new(1.0));
    let v0 = unit_vector(a.dim, g.c_mode(0));
    c.bench_function("propagate_hexagon_20_unit_time", |b| {
        b.iter(|| {
            let mut v = v0.clone();
            propagate_sparse(&a, &sched, &mut v, |_, _| {}).unwrap();
            v
        })
    });
}

criterion_group!(benches, assembly, bands, propagation);
criterion_main!(benches);
