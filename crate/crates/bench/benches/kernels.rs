use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use monohom::laplace::{poisson_solve, BoundaryCondition, LaplaceMethod};
use monohom::mesh::{flux_residual, gradient, mollify};
use monohom::{solve_corrector, CoefficientModel, Mesh, SolveOptions};
use monohom_bench::smooth_field;

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    for n in [128, 512] {
        let mesh = Mesh::dirichlet(n).unwrap();
        let u = smooth_field(&mesh);
        let g = gradient(&mesh, &u).unwrap();
        group.bench_with_input(BenchmarkId::new("gradient", n), &n, |b, _| {
            b.iter(|| gradient(&mesh, black_box(&u)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("flux_residual", n), &n, |b, _| {
            b.iter(|| flux_residual(&mesh, black_box(&g)).unwrap())
        });
    }
    group.finish();
}

fn poisson(c: &mut Criterion) {
    let mut group = c.benchmark_group("poisson");
    for n in [128, 256] {
        let mesh = Mesh::dirichlet(n).unwrap();
        let rhs = smooth_field(&mesh);
        group.bench_with_input(BenchmarkId::new("spectral", n), &n, |b, _| {
            b.iter(|| poisson_solve(&mesh, black_box(&rhs), BoundaryCondition::ZeroBoundary, LaplaceMethod::Spectral, 1e-10).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("cg", n), &n, |b, _| {
            b.iter(|| poisson_solve(&mesh, black_box(&rhs), BoundaryCondition::ZeroBoundary, LaplaceMethod::Cg, 1e-10).unwrap())
        });
    }
    group.finish();
}

fn mollifier(c: &mut Criterion) {
    let mesh = Mesh::dirichlet(256).unwrap();
    let u = smooth_field(&mesh);
    c.bench_function("mollify_256_eps_1_32", |b| b.iter(|| mollify(&mesh, black_box(&u), 1.0 / 32.0).unwrap()));
}

fn cell(c: &mut Criterion) {
    let mut group = c.benchmark_group("cell");
    group.sample_size(10);
    let opts = SolveOptions::default();
    for model in [CoefficientModel::laminate(), CoefficientModel::nonlinear()] {
        group.bench_function(BenchmarkId::new(model.name(), 64), |b| {
            b.iter(|| solve_corrector(&model, black_box([1.0, 0.5]), 64, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, poisson, mollifier, cell);
criterion_main!(benches);
