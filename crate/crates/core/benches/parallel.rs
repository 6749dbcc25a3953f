//! Sequential vs rayon execution of the data-parallel stages.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dbc_core::capacity::{default_q_grid, trace_region};
use dbc_core::channel::{make_broadcast_z, make_group_additive, DbcModel, GroupTable};
use dbc_core::encode::{simulate_joint, CombinerSpec};
use dbc_core::fstar::{lambda_grid, psi_sweep, EnvelopeTable};
use dbc_core::symmetry::compute_symmetry_group;
use dbc_core::{Exec, ProbVector, SimplexGrid};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn z3() -> DbcModel {
    make_group_additive(
        &GroupTable::cyclic(3),
        &ProbVector::new(vec![0.8, 0.15, 0.05]).unwrap(),
        &ProbVector::new(vec![0.7, 0.2, 0.1]).unwrap(),
    )
    .unwrap()
}

fn envelope_table(c: &mut Criterion) {
    let m = z3();
    let grid = SimplexGrid::new(3, 200).unwrap();
    let mut g = c.benchmark_group("envelope_table");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, "z3/m=200"), |b| {
            b.iter(|| EnvelopeTable::new_with(&m, black_box(grid), exec).unwrap())
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let m = z3();
    let table = EnvelopeTable::new(&m, SimplexGrid::new(3, 60).unwrap()).unwrap();
    let q = ProbVector::new(vec![0.5, 0.3, 0.2]).unwrap();
    let ls = lambda_grid(101);
    let mut g = c.benchmark_group("psi_sweep");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, "z3/101λ"), |b| {
            b.iter(|| psi_sweep(&m, black_box(&q), &ls, &table, exec).unwrap())
        });
    }
    g.finish();
}

fn region(c: &mut Criterion) {
    let m = make_broadcast_z(0.1, 0.4).unwrap();
    let table = EnvelopeTable::default_for(&m).unwrap();
    let qs = default_q_grid(2);
    let ls = lambda_grid(51);
    let mut g = c.benchmark_group("trace_region");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, "z/51λ"), |b| {
            b.iter(|| trace_region(&m, &ls, black_box(&qs), &table, exec).unwrap())
        });
    }
    g.finish();
}

fn simulate(c: &mut Criterion) {
    let m = make_broadcast_z(0.1, 0.4).unwrap();
    let spec = CombinerSpec::z_strategy(0.35, 0.8).unwrap();
    let mut g = c.benchmark_group("simulate_joint");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, "z/1e6"), |b| {
            b.iter(|| simulate_joint(&m, &spec, black_box(1_000_000), 42, exec).unwrap())
        });
    }
    g.finish();
}

fn symmetry(c: &mut Criterion) {
    let g7 = GroupTable::cyclic(7);
    let noise = |v: &[f64]| ProbVector::normalized(v.to_vec()).unwrap();
    let m = make_group_additive(
        &g7,
        &noise(&[0.7, 0.1, 0.05, 0.05, 0.04, 0.03, 0.03]),
        &noise(&[0.5, 0.15, 0.1, 0.1, 0.05, 0.05, 0.05]),
    )
    .unwrap();
    let mut g = c.benchmark_group("symmetry_group");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, "z7"), |b| {
            b.iter(|| compute_symmetry_group(black_box(&m), exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, envelope_table, sweep, region, simulate, symmetry);
criterion_main!(benches);
