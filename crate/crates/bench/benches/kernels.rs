use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use itl_core::engine::{inexact_two_level, RunConfig};
use itl_core::hierarchy::{make_smoother, Hierarchy, SmootherKind};
use itl_core::matrix::{cholesky, galerkin_product, sym_eig};
use itl_core::problems::{poisson1d, random_spd, random_splitting, standard_splitting_1d};
use itl_core::rng::SplitMix64;
use itl_core::solvers::{CoarseSolver, SolverSpec};
use itl_core::theory::k_tl_spectral;

fn bench_eigensolver(c: &mut Criterion) {
    let mut group = c.benchmark_group("sym_eig");
    for m in [31usize, 63, 127] {
        let a = poisson1d(m).unwrap().a;
        group.bench_with_input(BenchmarkId::from_parameter(m), &a, |b, a| {
            b.iter(|| sym_eig(a).unwrap())
        });
    }
    group.finish();
}

fn bench_cholesky_solve(c: &mut Criterion) {
    let a = random_spd(128, 100.0, 1).unwrap().a;
    let factor = cholesky(&a).unwrap();
    let mut rng = SplitMix64::new(2);
    let rhs: Vec<f64> = (0..128).map(|_| rng.next_gaussian()).collect();
    c.bench_function("cholesky_factor_128", |b| b.iter(|| cholesky(&a).unwrap()));
    c.bench_function("cholesky_solve_128", |b| b.iter(|| factor.solve(&rhs)));
}

fn poisson_hierarchy(m: usize) -> (itl_core::problems::ProblemInstance, Hierarchy) {
    let problem = poisson1d(m).unwrap();
    let split = standard_splitting_1d(m).unwrap();
    let a_s = galerkin_product(&split.s, &problem.a);
    let smoother = make_smoother(&SmootherKind::WeightedJacobi(0.7), &a_s).unwrap();
    let h = Hierarchy::assemble(&problem, split, smoother).unwrap();
    (problem, h)
}

fn bench_sweep(c: &mut Criterion) {
    let (problem, h) = poisson_hierarchy(63);
    let chain: Vec<Box<dyn CoarseSolver>> = vec![SolverSpec::Cg { ell: 8 }.build(&h).unwrap()];
    let cfg = RunConfig { nu: 1, postsmoothing: true, outer_sweeps: 1, seed: 3 };
    let u0 = vec![0.0; h.n()];
    c.bench_function("inexact_sweep_cg8_m63", |b| {
        b.iter(|| inexact_two_level(&h, &problem.f, &u0, &chain, &cfg).unwrap())
    });
}

fn bench_coarse_solvers(c: &mut Criterion) {
    let (_, h) = poisson_hierarchy(63);
    let mut rng = SplitMix64::new(5);
    let r: Vec<f64> = (0..h.n_c()).map(|_| rng.next_gaussian()).collect();
    let cg = SolverSpec::Cg { ell: 8 }.build(&h).unwrap();
    let rcd = SolverSpec::Rcd { ell: 64, seed: 1 }.build(&h).unwrap();
    c.bench_function("cg8_apply_nc31", |b| b.iter(|| cg.apply(&r, 0).unwrap()));
    c.bench_function("rcd64_apply_nc31", |b| b.iter(|| rcd.apply(&r, 0).unwrap()));
}

fn bench_theory(c: &mut Criterion) {
    let problem = random_spd(24, 50.0, 7).unwrap();
    let split = random_splitting(&problem.a, 14, 12, 8, false).unwrap();
    let a_s = galerkin_product(&split.s, &problem.a);
    let smoother = make_smoother(&SmootherKind::GaussSeidel, &a_s).unwrap();
    let h = Hierarchy::assemble(&problem, split, smoother).unwrap();
    c.bench_function("k_tl_spectral_n24", |b| b.iter(|| k_tl_spectral(&h).unwrap()));
}

criterion_group!(
    benches,
    bench_eigensolver,
    bench_cholesky_solve,
    bench_sweep,
    bench_coarse_solvers,
    bench_theory
);
criterion_main!(benches);
