use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use tmsurf_bench::{field, sphere, torus, SPHERE_LEVELS, TORUS_SIDES};
use tmsurf_core::calculus::{evaluate_J, value_and_gradient};
use tmsurf_core::linsolve::LaplaceSolver;
use tmsurf_core::surface::{assemble_stiffness, QuadratureRule};
use tmsurf_core::FunctionalParams;

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble_stiffness");
    for n in TORUS_SIDES {
        let mesh = torus(n);
        g.bench_with_input(BenchmarkId::new("torus", n), &mesh, |b, m| {
            b.iter(|| assemble_stiffness(black_box(m)))
        });
    }
    for level in SPHERE_LEVELS {
        let mesh = sphere(level);
        g.bench_with_input(BenchmarkId::new("sphere", level), &mesh, |b, m| {
            b.iter(|| assemble_stiffness(black_box(m)))
        });
    }
    g.finish();
}

fn functional(c: &mut Criterion) {
    let params = FunctionalParams::new(0.1, 4.0 * std::f64::consts::PI - 0.1, 2.0).unwrap();
    let rule = QuadratureRule::dunavant7();
    let mut g = c.benchmark_group("functional");
    for n in TORUS_SIDES {
        let mesh = torus(n);
        let u = field(&mesh).into_field();
        g.bench_with_input(BenchmarkId::new("value", n), &u, |b, u| {
            b.iter(|| evaluate_J(&mesh, black_box(u), &params).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("value_and_gradient", n), &u, |b, u| {
            b.iter(|| value_and_gradient(&mesh, black_box(u), &params, &rule).unwrap())
        });
    }
    g.finish();
}

fn laplace(c: &mut Criterion) {
    let mut g = c.benchmark_group("laplace");
    for n in TORUS_SIDES {
        let mesh = torus(n);
        let k = mesh.stiffness();
        let rhs: Vec<f64> = (0..mesh.num_vertices())
            .map(|i| ((i * 37) % 101) as f64 - 50.0)
            .collect();
        g.bench_with_input(BenchmarkId::new("factor", n), &n, |b, _| {
            b.iter(|| LaplaceSolver::new(black_box(k)).unwrap())
        });
        let solver = LaplaceSolver::new(k).unwrap();
        g.bench_with_input(BenchmarkId::new("solve", n), &rhs, |b, r| {
            b.iter(|| solver.solve(k, mesh.mass(), black_box(r)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, assembly, functional, laplace);
criterion_main!(benches);
