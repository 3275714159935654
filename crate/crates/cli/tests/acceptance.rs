//! Acceptance suite: every criterion the project promises, one test per
//! criterion, each printing a pass/fail line (run with --nocapture to
//! see them). Tolerances are pinned here, not configurable.

use itl_cli::config::{
    ExperimentSpec, InitialError, ProblemSpec, SmootherConfig, SplittingConfig,
};
use itl_cli::ensemble::{build_instances, default_instance_specs, default_two_grid_specs};
use itl_core::engine::{exact_two_level, inexact_two_level, RunConfig, RunTrace};
use itl_core::hierarchy::Hierarchy;
use itl_core::matrix::{norm2, sub_vec, sym_eig};
use itl_core::problems::{poisson1d, standard_splitting_1d, ProblemInstance};
use itl_core::rng::{derive, SplitMix64};
use itl_core::solvers::{CoarseSolver, SolverSpec, StationaryKind};
use itl_core::theory::{
    bound_no_postsmoothing_tg, bound_no_postsmoothing_tl, k_tg, k_tl_spectral,
    lambda_min_mtilde_a, lambda_min_plus_mtilde_a_pi, lemma_eigenvalues, sigma_itl_from,
    verify_all, RankBranch,
};
use std::time::Instant;

fn pass(number: u32, name: &str) {
    println!("acceptance {number:02} ({name}): PASS");
}

fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    (0..n).map(|_| rng.next_gaussian()).collect()
}

fn experiment(
    problem: ProblemSpec,
    splitting: SplittingConfig,
    smoother: SmootherConfig,
) -> ExperimentSpec {
    ExperimentSpec {
        problem,
        splitting,
        smoother,
        inner: vec![SolverSpec::Exact],
        nu: 1,
        postsmoothing: true,
        outer_sweeps: 1,
        trials: 1,
        seed: 0,
        initial_error: InitialError::Random,
        out: None,
    }
}

/// A compact mixed family of hierarchies for the run-bound criteria.
fn bound_test_instances() -> Vec<(ProblemInstance, Hierarchy)> {
    let specs = [
        experiment(
            ProblemSpec::Poisson1d { m: 7 },
            SplittingConfig::Standard1d,
            SmootherConfig::WeightedJacobi { omega: 0.7 },
        ),
        experiment(
            ProblemSpec::Poisson1d { m: 15 },
            SplittingConfig::Standard1d,
            SmootherConfig::WeightedJacobi { omega: 1.2 },
        ),
        experiment(
            ProblemSpec::Poisson1d { m: 15 },
            SplittingConfig::Random { n_s: 9, n_c: 7, seed: 3, force_rank_deficient_sap: false },
            SmootherConfig::GaussSeidel,
        ),
        experiment(
            ProblemSpec::Poisson2d { m: 3 },
            SplittingConfig::Random { n_s: 6, n_c: 4, seed: 4, force_rank_deficient_sap: false },
            SmootherConfig::GaussSeidel,
        ),
        experiment(
            ProblemSpec::RandomSpd { n: 10, cond_target: 50.0, seed: 5 },
            SplittingConfig::Random { n_s: 6, n_c: 5, seed: 6, force_rank_deficient_sap: false },
            SmootherConfig::GaussSeidel,
        ),
        experiment(
            ProblemSpec::RandomSpd { n: 12, cond_target: 20.0, seed: 7 },
            SplittingConfig::Random { n_s: 8, n_c: 6, seed: 8, force_rank_deficient_sap: true },
            SmootherConfig::GaussSeidel,
        ),
        experiment(
            ProblemSpec::RandomSpd { n: 9, cond_target: 30.0, seed: 9 },
            SplittingConfig::TwoGrid { n_c: 4, seed: 10 },
            SmootherConfig::GaussSeidel,
        ),
    ];
    specs.iter().map(|s| s.build_hierarchy().unwrap()).collect()
}

/// Deterministic chains whose certificates stay below one on this
/// hierarchy (the stationary certificate is instance-dependent).
fn deterministic_chains(h: &Hierarchy) -> Vec<Vec<Box<dyn CoarseSolver>>> {
    let mut chains: Vec<Vec<Box<dyn CoarseSolver>>> = vec![
        vec![SolverSpec::Exact.build(h).unwrap()],
        vec![SolverSpec::Cg { ell: 2 }.build(h).unwrap()],
        vec![SolverSpec::Cg { ell: h.n_c().max(1) }.build(h).unwrap()],
        vec![SolverSpec::Stationary {
            preconditioner: StationaryKind::Scaled { factor: 1.6 },
        }
        .build(h)
        .unwrap()],
    ];
    let jacobi = SolverSpec::Stationary { preconditioner: StationaryKind::Jacobi }
        .build(h)
        .unwrap();
    if jacobi.apriori_cert().applicable {
        chains.push(vec![jacobi]);
    }
    chains
}

/// Run one sweep-bound protocol over instances x chains x seeds and
/// apply `assert_sweep` to every recorded sweep (with per-hierarchy
/// theory computed once). Returns the run count.
fn run_bound_protocol(
    postsmoothing: bool,
    assert_sweep: impl Fn(f64, &itl_core::theory::LemmaEigenvalues, &RunTrace),
) -> usize {
    let mut runs = 0;
    for (problem, h) in bound_test_instances() {
        let k = k_tl_spectral(&h).unwrap();
        let lemma = lemma_eigenvalues(&h).unwrap();
        for (c, chain) in deterministic_chains(&h).into_iter().enumerate() {
            for seed in 0..7u64 {
                let e0 = gaussian(h.n(), derive(seed, &[c as u64, 0xBEEF]));
                let u0: Vec<f64> =
                    problem.u_star.iter().zip(&e0).map(|(u, e)| u - e).collect();
                let cfg = RunConfig { nu: 1, postsmoothing, outer_sweeps: 2, seed };
                let (_, trace) = inexact_two_level(&h, &problem.f, &u0, &chain, &cfg).unwrap();
                assert_sweep(k, &lemma, &trace);
                runs += 1;
            }
        }
    }
    runs
}

#[test]
fn c01_two_level_identity_and_supinf_oracle() {
    let started = Instant::now();
    let instances = build_instances(&default_instance_specs()).unwrap();
    assert!(instances.len() >= 50, "ensemble too small: {}", instances.len());
    let mut supinf_checked = 0;
    for inst in &instances {
        let report = verify_all(&inst.hierarchy, &[]).unwrap();
        let gap = report.identity_residuals["xz1_identity"];
        assert!(gap.abs() <= 1e-9, "{}: identity gap {gap:e}", inst.label);
        if inst.hierarchy.n() <= 12 {
            let rel = report.identity_residuals["k_tl_supinf_rel_gap"];
            assert!(rel.abs() <= 1e-7, "{}: sup-inf gap {rel:e}", inst.label);
            supinf_checked += 1;
        }
    }
    assert!(supinf_checked >= 20, "only {supinf_checked} sup-inf checks");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    pass(1, "two-level identity + sup-inf oracle");
}

#[test]
fn c02_two_grid_identity() {
    let started = Instant::now();
    let instances = build_instances(&default_two_grid_specs()).unwrap();
    assert!(instances.len() >= 30);
    for inst in &instances {
        let report = verify_all(&inst.hierarchy, &[]).unwrap();
        let gap = report.identity_residuals["xz2_identity"];
        assert!(gap.abs() <= 1e-9, "{}: identity gap {gap:e}", inst.label);
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    pass(2, "two-grid identity");
}

#[test]
fn c03_rank_dichotomy_both_branches() {
    let instances = build_instances(&default_instance_specs()).unwrap();
    let mut full = 0;
    let mut deficient = 0;
    for inst in &instances {
        let lemma = lemma_eigenvalues(&inst.hierarchy).unwrap();
        match lemma.branch {
            RankBranch::FullRank => {
                let mu = lemma.mu_tl.unwrap();
                assert!(
                    (lemma.lambda_max - (1.0 - mu)).abs() <= 1e-8,
                    "{}: full-rank gap {:e}",
                    inst.label,
                    lemma.branch_gap
                );
                full += 1;
            }
            RankBranch::Deficient => {
                assert!(
                    (lemma.lambda_max - 1.0).abs() <= 1e-8,
                    "{}: deficient gap {:e}",
                    inst.label,
                    lemma.branch_gap
                );
                deficient += 1;
            }
        }
    }
    assert!(full >= 10, "full-rank instances: {full}");
    assert!(deficient >= 10, "deficient instances: {deficient}");
    pass(3, "rank dichotomy, both branches");
}

#[test]
fn c04_preconditioner_spectrum_and_spsd_similarity() {
    let instances = build_instances(&default_instance_specs()).unwrap();
    for inst in &instances {
        let report = verify_all(&inst.hierarchy, &[]).unwrap();
        let gap = report.identity_residuals["btl_lambda_max_minus_one"];
        assert!(gap.abs() <= 1e-9, "{}: lambda_max gap {gap:e}", inst.label);
        let lmin = report.identity_residuals["etl_spsd_lambda_min"];
        assert!(lmin >= -1e-12, "{}: similarity lambda_min {lmin:e}", inst.label);
    }
    pass(4, "preconditioner spectrum + SPSD similarity");
}

#[test]
fn c05_postsmoothed_error_bound() {
    let runs = run_bound_protocol(true, |k, lemma, trace| {
        for sweep in &trace.sweeps {
            let eps = sweep.inner.measured_product();
            assert!(eps < 1.0, "measured accuracy {eps} not below one");
            let sigma = sigma_itl_from(k, lemma, eps);
            assert!(
                sweep.err_final <= (sigma + 1e-9) * sweep.err_initial,
                "bound violated: {} > {} * {}",
                sweep.err_final,
                sigma,
                sweep.err_initial
            );
        }
    });
    assert!(runs >= 200, "only {runs} runs");
    pass(5, "postsmoothed error bound");
}

#[test]
fn c06_no_postsmoothing_error_bound() {
    let runs = run_bound_protocol(false, |k, _lemma, trace| {
        for sweep in &trace.sweeps {
            let eps = sweep.inner.measured_product();
            let bound = bound_no_postsmoothing_tl(k, eps).unwrap();
            assert!(
                sweep.err_final <= (bound + 1e-9) * sweep.err_initial,
                "bound violated: {} > {} * {}",
                sweep.err_final,
                bound,
                sweep.err_initial
            );
        }
    });
    assert!(runs >= 200, "only {runs} runs");
    pass(6, "no-postsmoothing error bound");
}

#[test]
fn c07_two_grid_bounds() {
    // S = I hierarchies over several matrices and smoothers
    let specs = vec![
        experiment(
            ProblemSpec::Poisson1d { m: 9 },
            SplittingConfig::TwoGrid { n_c: 4, seed: 31 },
            SmootherConfig::Jacobi,
        ),
        experiment(
            ProblemSpec::Poisson1d { m: 13 },
            SplittingConfig::TwoGrid { n_c: 5, seed: 32 },
            SmootherConfig::GaussSeidel,
        ),
        experiment(
            ProblemSpec::Poisson2d { m: 3 },
            SplittingConfig::TwoGrid { n_c: 4, seed: 33 },
            SmootherConfig::WeightedJacobi { omega: 0.9 },
        ),
        experiment(
            ProblemSpec::RandomSpd { n: 10, cond_target: 40.0, seed: 34 },
            SplittingConfig::TwoGrid { n_c: 4, seed: 35 },
            SmootherConfig::GaussSeidel,
        ),
        experiment(
            ProblemSpec::RandomSpd { n: 8, cond_target: 15.0, seed: 36 },
            SplittingConfig::TwoGrid { n_c: 3, seed: 37 },
            SmootherConfig::GaussSeidel,
        ),
    ];
    let mut runs = 0;
    for spec in &specs {
        let (problem, h) = spec.build_hierarchy().unwrap();
        let m = &h.smoother.m_s;
        let p = &h.split.p;
        let k = k_tg(&h.a, p, m).unwrap();
        let lam_plus = lambda_min_plus_mtilde_a_pi(&h.a, p, m).unwrap();
        let lam_min = lambda_min_mtilde_a(&h.a, m).unwrap();
        for (c, chain) in deterministic_chains(&h).into_iter().enumerate() {
            for seed in 0..5u64 {
                for postsmoothing in [true, false] {
                    let e0 = gaussian(h.n(), derive(seed, &[c as u64, 0x76]));
                    let u0: Vec<f64> =
                        problem.u_star.iter().zip(&e0).map(|(u, e)| u - e).collect();
                    let cfg = RunConfig { nu: 1, postsmoothing, outer_sweeps: 2, seed };
                    let (_, trace) =
                        inexact_two_level(&h, &problem.f, &u0, &chain, &cfg).unwrap();
                    for sweep in &trace.sweeps {
                        let eps = sweep.inner.measured_product();
                        let bound = if postsmoothing {
                            1.0 - 1.0 / k + eps * (1.0 - lam_plus)
                        } else {
                            bound_no_postsmoothing_tg(k, lam_min, eps).unwrap()
                        };
                        assert!(
                            sweep.err_final <= (bound + 1e-9) * sweep.err_initial,
                            "{}: post={postsmoothing} {} > {} * {}",
                            spec.label(),
                            sweep.err_final,
                            bound,
                            sweep.err_initial
                        );
                    }
                    runs += 1;
                }
            }
        }
    }
    assert!(runs >= 200, "only {runs} runs");
    pass(7, "two-grid bounds (postsmoothed and not)");
}

#[test]
fn c08_accuracy_product_and_sandwich() {
    // mixed chains, including randomized and hybrid ones
    let mut checked = 0;
    for (problem, h) in bound_test_instances() {
        let chains: Vec<Vec<Box<dyn CoarseSolver>>> = vec![
            vec![SolverSpec::Exact.build(&h).unwrap()],
            vec![SolverSpec::Cg { ell: 2 }.build(&h).unwrap()],
            vec![SolverSpec::Rcd { ell: 4, seed: 1 }.build(&h).unwrap()],
            vec![
                SolverSpec::Cg { ell: 2 }.build(&h).unwrap(),
                SolverSpec::Rcd { ell: 6, seed: 2 }.build(&h).unwrap(),
            ],
        ];
        let chol = h.a_c_chol();
        for (c, chain) in chains.into_iter().enumerate() {
            for seed in 0..8u64 {
                let e0 = gaussian(h.n(), derive(seed, &[c as u64, 0xACC]));
                let u0: Vec<f64> =
                    problem.u_star.iter().zip(&e0).map(|(u, e)| u - e).collect();
                let cfg = RunConfig {
                    nu: chain.len(),
                    postsmoothing: true,
                    outer_sweeps: 2,
                    seed,
                };
                let (_, trace) = inexact_two_level(&h, &problem.f, &u0, &chain, &cfg).unwrap();
                for sweep in &trace.sweeps {
                    let inner = &sweep.inner;
                    assert!(
                        inner.overall <= inner.measured_product() + 1e-10,
                        "product rule violated: {} > {}",
                        inner.overall,
                        inner.measured_product()
                    );
                    let eps = inner.overall;
                    if eps >= 1.0 || inner.iterates.len() < 2 {
                        continue;
                    }
                    let r_c = &inner.residuals[0];
                    let e_c = inner.iterates.last().unwrap();
                    let r_norm2 = chol.inv_quadratic_form(r_c);
                    if r_norm2 == 0.0 {
                        continue;
                    }
                    let e_norm = h.a_c.quadratic_form(e_c).max(0.0).sqrt();
                    let r_dot_e = itl_core::matrix::dot(r_c, e_c);
                    let tol = 1e-10 * r_norm2.max(1.0);
                    assert!(
                        r_dot_e >= 0.5 * ((1.0 - eps * eps) * r_norm2 + e_norm * e_norm) - tol
                    );
                    assert!(r_dot_e >= (1.0 - eps) * r_norm2 - tol);
                    assert!(r_dot_e <= (1.0 + eps) * r_norm2 + tol);
                    let tol_n = 1e-10 * r_norm2.sqrt().max(1.0);
                    assert!(e_norm >= (1.0 - eps) * r_norm2.sqrt() - tol_n);
                    assert!(e_norm <= (1.0 + eps) * r_norm2.sqrt() + tol_n);
                    checked += 1;
                }
            }
        }
    }
    assert!(checked >= 200, "only {checked} sandwich checks");
    pass(8, "accuracy product rule + sandwich inequalities");
}

#[test]
fn c09_cg_estimate_on_coarse_laplacian() {
    // poisson1d(15) + standard splitting: A_c is half the 7-point
    // Laplacian, eigenvalues 1 - cos(k pi / 8)
    let problem = poisson1d(15).unwrap();
    let split = standard_splitting_1d(15).unwrap();
    let a_s = itl_core::matrix::galerkin_product(&split.s, &problem.a);
    let smoother =
        itl_core::hierarchy::make_smoother(&itl_core::hierarchy::SmootherKind::Jacobi, &a_s)
            .unwrap();
    let h = Hierarchy::assemble(&problem, split, smoother).unwrap();
    let n_c = h.n_c();
    assert!(n_c >= 7);

    let eig = sym_eig(&h.a_c).unwrap();
    let kappa = eig.lambda_max() / eig.lambda_min();
    let pi = std::f64::consts::PI;
    let denom = (n_c + 1) as f64;
    let analytic =
        (1.0 - (n_c as f64 * pi / denom).cos()) / (1.0 - (pi / denom).cos());
    assert!(
        (kappa - analytic).abs() <= 1e-10 * analytic,
        "kappa {kappa} vs analytic {analytic}"
    );

    let chol = h.a_c_chol();
    for ell in 1..=n_c {
        let solver = itl_core::solvers::CgSolver::new(&h.a_c, ell).unwrap();
        let root = kappa.sqrt();
        let bound_factor = 2.0 * ((root - 1.0) / (root + 1.0)).powi(ell as i32);
        for seed in 0..50u64 {
            let r = gaussian(n_c, derive(seed, &[ell as u64]));
            let e = solver.apply(&r, 0).unwrap();
            let exact = chol.solve(&r);
            let err = h.a_c.quadratic_form(&sub_vec(&exact, &e)).max(0.0).sqrt();
            let scale = h.a_c.quadratic_form(&exact).max(0.0).sqrt();
            assert!(
                err <= bound_factor * scale + 1e-12 * scale,
                "ell={ell} seed={seed}: {err} > {bound_factor} * {scale}"
            );
        }
    }
    pass(9, "conjugate-gradient accuracy estimate");
}

fn poisson_coarse(m: usize) -> itl_core::SymMatrix {
    let problem = poisson1d(m).unwrap();
    let split = standard_splitting_1d(m).unwrap();
    itl_core::matrix::galerkin_product(&split.p, &problem.a)
}

#[test]
fn c10_rcd_expected_rate_monte_carlo() {
    let started = Instant::now();
    let trials: u64 = 100_000;
    for (case, m) in [5usize, 7, 9].into_iter().enumerate() {
        let a_c = poisson_coarse(m);
        let n_c = a_c.n();
        assert_eq!(n_c, (m - 1) / 2);
        let eig = sym_eig(&a_c).unwrap();
        let rate = 1.0 - eig.lambda_min() / a_c.trace();
        let chol = itl_core::matrix::cholesky(&a_c).unwrap();
        let r = gaussian(n_c, 77 + case as u64);
        let exact = chol.solve(&r);
        let scale = a_c.quadratic_form(&exact);
        for ell in [1usize, 2, 4, 8] {
            let solver = itl_core::solvers::RcdSolver::new(&a_c, ell, 5).unwrap();
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for t in 0..trials {
                let e = solver.apply(&r, derive(9000 + case as u64, &[ell as u64, t])).unwrap();
                let v = a_c.quadratic_form(&sub_vec(&exact, &e));
                sum += v;
                sum_sq += v * v;
            }
            let mean = sum / trials as f64;
            let var = (sum_sq / trials as f64 - mean * mean).max(0.0);
            let se = (var / trials as f64).sqrt();
            let bound = rate.powi(ell as i32) * scale;
            assert!(
                mean <= bound + 3.0 * se,
                "n_c={n_c} ell={ell}: mean {mean} > bound {bound} + 3se {se}"
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 120, "took {elapsed:?}");
    pass(10, "randomized coordinate descent expected rate");
}

#[test]
fn c11_rbcd_exactness_and_expected_projection() {
    // single block: one step is an exact solve
    let a_c = poisson_coarse(9); // 4x4
    let single = itl_core::solvers::RbcdSolver::new(&a_c, vec![vec![0, 1, 2, 3]], 1, 3).unwrap();
    let chol = itl_core::matrix::cholesky(&a_c).unwrap();
    for seed in 0..20u64 {
        let r = gaussian(4, 600 + seed);
        let e = single.apply(&r, seed).unwrap();
        let exact = chol.solve(&r);
        let measured = a_c.quadratic_form(&sub_vec(&exact, &e)).max(0.0).sqrt()
            / chol.inv_norm(&r);
        assert!(measured <= 1e-12, "seed {seed}: measured {measured:e}");
    }

    // two blocks: enumerated expectation matches Monte Carlo entrywise
    let blocks = vec![vec![0usize, 1], vec![2usize, 3]];
    let solver = itl_core::solvers::RbcdSolver::new(&a_c, blocks.clone(), 1, 4).unwrap();
    let w_enum = solver.expected_projection_matrix().unwrap();
    let trials = 40_000u64;
    let n = 4;
    // sample W columns by applying single block steps to A_c's columns
    let mut rng = SplitMix64::new(41);
    let mut mean = vec![0.0; n * n];
    let mut mean_sq = vec![0.0; n * n];
    let samples: Vec<Vec<f64>> = (0..blocks.len())
        .map(|k| {
            let mut flat = vec![0.0; n * n];
            for j in 0..n {
                let col = a_c.column_vec(j);
                // block k applied to residual col from zero iterate
                let sub: Vec<usize> = blocks[k].clone();
                let rhs: Vec<f64> = sub.iter().map(|&i| col[i]).collect();
                let block_chol =
                    itl_core::matrix::cholesky(&a_c.principal_submatrix(&sub)).unwrap();
                let y = block_chol.solve(&rhs);
                for (pos, &i) in sub.iter().enumerate() {
                    flat[i * n + j] = y[pos];
                }
            }
            flat
        })
        .collect();
    for _ in 0..trials {
        let k = rng.next_index(blocks.len());
        for (idx, &v) in samples[k].iter().enumerate() {
            mean[idx] += v;
            mean_sq[idx] += v * v;
        }
    }
    for i in 0..n {
        for j in 0..n {
            let idx = i * n + j;
            let m = mean[idx] / trials as f64;
            let var = (mean_sq[idx] / trials as f64 - m * m).max(0.0);
            let se = (var / trials as f64).sqrt();
            let gap = (m - w_enum.get(i, j)).abs();
            assert!(gap <= 3.0 * se + 1e-12, "entry ({i},{j}): gap {gap:e} vs 3se {se:e}");
        }
    }

    // expected-rate bound, same protocol as criterion 10
    let eig_rate = 1.0 - solver.lambda_min_w().unwrap();
    let r = gaussian(4, 999);
    let exact = chol.solve(&r);
    let scale = a_c.quadratic_form(&exact);
    for ell in [1usize, 2, 4] {
        let s = itl_core::solvers::RbcdSolver::new(&a_c, blocks.clone(), ell, 4).unwrap();
        let t = 20_000u64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for trial in 0..t {
            let e = s.apply(&r, derive(1234, &[ell as u64, trial])).unwrap();
            let v = a_c.quadratic_form(&sub_vec(&exact, &e));
            sum += v;
            sum_sq += v * v;
        }
        let mean_v = sum / t as f64;
        let var = (sum_sq / t as f64 - mean_v * mean_v).max(0.0);
        let se = (var / t as f64).sqrt();
        let bound = eig_rate.powi(ell as i32) * scale;
        assert!(mean_v <= bound + 3.0 * se, "ell={ell}: {mean_v} > {bound} + 3se");
    }
    pass(11, "randomized Newton exactness + expected projection");
}

#[test]
fn c12_exact_chain_reduction() {
    let mut count = 0;
    for (problem, h) in bound_test_instances() {
        for seed in 0..8u64 {
            let e0 = gaussian(h.n(), derive(seed, &[0x12]));
            let u0: Vec<f64> = problem.u_star.iter().zip(&e0).map(|(u, e)| u - e).collect();
            let (u_direct, _) = exact_two_level(&h, &problem.f, &u0).unwrap();

            let chain: Vec<Box<dyn CoarseSolver>> = vec![SolverSpec::Exact.build(&h).unwrap()];
            let cfg = RunConfig { nu: 1, postsmoothing: true, outer_sweeps: 1, seed };
            let (u_chained, _) = inexact_two_level(&h, &problem.f, &u0, &chain, &cfg).unwrap();
            let gap = norm2(&sub_vec(&u_direct, &u_chained));
            assert!(gap <= 1e-12 * norm2(&u_direct).max(1.0), "exact gap {gap:e}");

            let chain: Vec<Box<dyn CoarseSolver>> =
                vec![SolverSpec::Cg { ell: h.n_c() }.build(&h).unwrap()];
            let (u_cg, _) = inexact_two_level(&h, &problem.f, &u0, &chain, &cfg).unwrap();
            let gap = norm2(&sub_vec(&u_direct, &u_cg));
            assert!(gap <= 1e-9 * norm2(&u_direct).max(1.0), "cg gap {gap:e}");
            count += 1;
        }
    }
    assert!(count >= 50, "only {count} reduction checks");
    pass(12, "exact-chain reduction to the exact method");
}

#[test]
fn c13_reports_are_deterministic_across_runs_and_threads() {
    use std::process::Command;
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.json");
    std::fs::write(
        &config_path,
        r#"{
            "problem": {"kind": "poisson1d", "m": 15},
            "splitting": {"kind": "standard_1d"},
            "smoother": {"kind": "weighted_jacobi", "omega": 0.7},
            "inner": [{"kind": "rcd", "ell": 6, "seed": 2}],
            "nu": 1,
            "outer_sweeps": 2,
            "trials": 16,
            "seed": 424242
        }"#,
    )
    .unwrap();

    let run = |out: &str, threads: &str| {
        let out_path = dir.path().join(out);
        let status = Command::new(env!("CARGO_BIN_EXE_itl"))
            .args([
                "run",
                "--config",
                config_path.to_str().unwrap(),
                "--out",
                out_path.to_str().unwrap(),
                "--threads",
                threads,
            ])
            .status()
            .unwrap();
        assert!(status.success(), "itl run failed");
        itl_cli::report::strip_timestamp(&std::fs::read_to_string(&out_path).unwrap())
    };

    let first = run("a.json", "1");
    let second = run("b.json", "1");
    assert_eq!(first, second, "same seed, same thread count: reports differ");
    let eight = run("c.json", "8");
    assert_eq!(first, eight, "thread count changed the report");
    pass(13, "byte-identical reports across reruns and thread counts");
}
