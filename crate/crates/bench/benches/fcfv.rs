use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fcfv_bench::{poisson_fixture, stokes_fixture};
use fcfv_core::linalg::{solve, SolverKind};
use fcfv_core::{poisson, stokes, Variant};

fn precompute(c: &mut Criterion) {
    let mut g = c.benchmark_group("local_precompute");
    let problem = poisson_fixture(64);
    for v in Variant::BOTH {
        g.bench_with_input(BenchmarkId::new("poisson", v), &v, |b, &v| {
            b.iter(|| {
                for e in 0..problem.mesh.n_cells() {
                    std::hint::black_box(poisson::local_precompute(&problem, e, v).unwrap());
                }
            })
        });
    }
    g.finish();
}

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble_global");
    for n in [32, 64] {
        let p = poisson_fixture(n);
        g.bench_with_input(BenchmarkId::new("poisson", n), &p, |b, p| {
            b.iter(|| poisson::assemble_global(p, Variant::Second).unwrap())
        });
        let s = stokes_fixture(n);
        g.bench_with_input(BenchmarkId::new("stokes", n), &s, |b, s| {
            b.iter(|| stokes::assemble_global(s, Variant::Second).unwrap())
        });
    }
    g.finish();
}

fn global_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("global_solve");
    g.sample_size(10);
    let sys = poisson::assemble_global(&poisson_fixture(64), Variant::Second).unwrap();
    g.bench_function("poisson_direct_64", |b| b.iter(|| solve(&sys, SolverKind::Direct, 1e-10).unwrap()));
    let neg = sys.negated();
    g.bench_function("poisson_cg_64", |b| b.iter(|| solve(&neg, SolverKind::Cg, 1e-10).unwrap()));
    let st = stokes::assemble_global(&stokes_fixture(32), Variant::Second).unwrap();
    g.bench_function("stokes_direct_32", |b| b.iter(|| solve(&st, SolverKind::Direct, 1e-10).unwrap()));
    g.bench_function("stokes_minres_32", |b| b.iter(|| solve(&st, SolverKind::Minres, 1e-10).unwrap()));
    g.finish();
}

criterion_group!(benches, precompute, assembly, global_solve);
criterion_main!(benches);
