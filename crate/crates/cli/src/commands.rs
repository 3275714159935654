//! Command implementations: run, verify-identities, sweep,
//! export-problem.

use crate::config::{ExperimentSpec, InitialError, ProblemSpec, SmootherConfig, VerifySpec};
use crate::ensemble::{build_instances, default_instance_specs, default_two_grid_specs};
use crate::report::{
    timestamp, tool_version, AggregateStats, InstanceVerdict, ReportDocument, RunSummary,
    SweepSummary, VerifyDocument,
};
use crate::{from_core, CliError, Result};
use itl_core::engine::{inexact_two_level, iteration_matrix_tl, iteration_matrix_tl_no_post, RunConfig, RunTrace};
use itl_core::hierarchy::Hierarchy;
use itl_core::matrix::{inv_sqrt, market, sym_eig, sym_sqrt, SymMatrix};
use itl_core::problems::ProblemInstance;
use itl_core::rng::{derive, SplitMix64};
use itl_core::solvers::CoarseSolver;
use itl_core::theory::{verify_all, TheoryReport};
use log::info;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// The dominant error mode of the sweep: the direction whose contraction
/// attains the operator norm. Exact for the exact sweep; a deliberate
/// stress direction for inexact ones.
fn worst_error_mode(h: &Hierarchy, postsmoothing: bool) -> Result<Vec<f64>> {
    let e = if postsmoothing { iteration_matrix_tl(h) } else { iteration_matrix_tl_no_post(h) };
    let root = sym_sqrt(&h.a).map_err(from_core)?;
    let root_inv = inv_sqrt(&h.a).map_err(from_core)?;
    let g = root.to_gen().matmul(&e).matmul(&root_inv.to_gen());
    let gram = SymMatrix::from_gen(&g.transpose().matmul(&g));
    let eig = sym_eig(&gram).map_err(from_core)?;
    let q = eig.vectors.column(eig.n() - 1);
    Ok(root_inv.matvec(&q))
}

fn gaussian_error(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    (0..n).map(|_| rng.next_gaussian()).collect()
}

/// Run all trials of a spec against its hierarchy. Trials are
/// independent and execute in parallel; results are ordered by trial
/// index, so the output is schedule-independent.
pub fn execute_trials(
    spec: &ExperimentSpec,
    problem: &ProblemInstance,
    h: &Hierarchy,
) -> Result<Vec<RunTrace>> {
    let chain: Vec<Box<dyn CoarseSolver>> = spec
        .inner
        .iter()
        .map(|s| s.build(h))
        .collect::<itl_core::Result<_>>()
        .map_err(from_core)?;
    let worst = match spec.initial_error {
        InitialError::Worst => Some(worst_error_mode(h, spec.postsmoothing)?),
        InitialError::Random => None,
    };
    (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let e0 = match &worst {
                Some(v) => v.clone(),
                None => gaussian_error(h.n(), derive(spec.seed, &[trial as u64, 0xE0])),
            };
            let u0: Vec<f64> = problem.u_star.iter().zip(&e0).map(|(u, e)| u - e).collect();
            let cfg = RunConfig {
                nu: spec.nu,
                postsmoothing: spec.postsmoothing,
                outer_sweeps: spec.outer_sweeps,
                seed: derive(spec.seed, &[trial as u64]),
            };
            inexact_two_level(h, &problem.f, &u0, &chain, &cfg).map(|(_, trace)| trace)
        })
        .collect::<itl_core::Result<Vec<_>>>()
        .map_err(from_core)
}

pub struct Execution {
    pub theory: TheoryReport,
    pub runs: Vec<RunSummary>,
}

pub fn execute_spec(spec: &ExperimentSpec) -> Result<Execution> {
    spec.validate()?;
    let (problem, h) = spec.build_hierarchy()?;
    info!("hierarchy assembled: {}", spec.label());
    let traces = execute_trials(spec, &problem, &h)?;
    let theory = verify_all(&h, &traces).map_err(from_core)?;
    let runs = traces
        .iter()
        .enumerate()
        .map(|(t, trace)| RunSummary::from_trace(t, derive(spec.seed, &[t as u64]), trace))
        .collect();
    Ok(Execution { theory, runs })
}

pub fn cmd_run(spec: &ExperimentSpec) -> Result<ReportDocument> {
    let exec = execute_spec(spec)?;
    let aggregate = AggregateStats::from_summaries(&exec.runs);
    let verdicts: BTreeMap<String, bool> = exec.theory.checks.clone();
    let passed = verdicts.values().all(|&v| v);
    Ok(ReportDocument {
        tool_version: tool_version(),
        timestamp: timestamp(),
        spec_echo: serde_json::to_value(spec)
            .map_err(|e| CliError::Config(e.to_string()))?,
        theory: exec.theory,
        runs: exec.runs,
        aggregate,
        verdicts,
        passed,
    })
}

pub fn cmd_verify_identities(vspec: Option<&VerifySpec>) -> Result<VerifyDocument> {
    let specs = match vspec {
        Some(v) => {
            if v.instances.is_empty() {
                return Err(CliError::Config("no instances".into()));
            }
            v.instances.clone()
        }
        None => {
            let mut specs = default_instance_specs();
            specs.extend(default_two_grid_specs());
            specs
        }
    };
    let instances = build_instances(&specs)?;
    info!("verifying {} instances", instances.len());
    let verdicts: Vec<InstanceVerdict> = instances
        .par_iter()
        .map(|inst| {
            let theory = verify_all(&inst.hierarchy, &[]).map_err(from_core)?;
            Ok(InstanceVerdict {
                label: inst.label.clone(),
                passed: theory.all_checks_pass(),
                theory,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let failed = verdicts.iter().filter(|v| !v.passed).count();
    Ok(VerifyDocument {
        tool_version: tool_version(),
        timestamp: timestamp(),
        total: verdicts.len(),
        failed,
        passed: failed == 0,
        instances: verdicts,
    })
}

/// Parameters `sweep` can vary.
const SWEEP_PARAMETERS: [&str; 5] = ["ell", "nu", "n", "omega", "cond_target"];

fn apply_parameter(spec: &ExperimentSpec, parameter: &str, value: f64) -> Result<ExperimentSpec> {
    let mut out = spec.clone();
    match parameter {
        "ell" => {
            let ell = value as usize;
            if ell < 1 {
                return Err(CliError::Config(format!("ell = {value} must be >= 1")));
            }
            let mut touched = false;
            for solver in &mut out.inner {
                touched |= solver.set_ell(ell);
            }
            if !touched {
                return Err(CliError::Config(
                    "no solver in the chain has an iteration count".into(),
                ));
            }
        }
        "nu" => {
            out.nu = value as usize;
        }
        "n" => {
            let n = value as usize;
            match &mut out.problem {
                ProblemSpec::Poisson1d { m } | ProblemSpec::Poisson2d { m } => *m = n,
                ProblemSpec::RandomSpd { n: size, .. } => *size = n,
            }
        }
        "omega" => match &mut out.smoother {
            SmootherConfig::WeightedJacobi { omega } => *omega = value,
            _ => {
                return Err(CliError::Config(
                    "omega sweep requires a weighted_jacobi smoother".into(),
                ))
            }
        },
        "cond_target" => match &mut out.problem {
            ProblemSpec::RandomSpd { cond_target, .. } => *cond_target = value,
            _ => {
                return Err(CliError::Config(
                    "cond_target sweep requires a random_spd problem".into(),
                ))
            }
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown parameter {other:?} (expected one of {SWEEP_PARAMETERS:?})"
            )))
        }
    }
    Ok(out)
}

fn fmt(value: f64) -> String {
    format!("{value:.16e}")
}

/// One CSV row per parameter value: certificate, measured accuracy,
/// bound, contraction, and worst bound slack.
pub fn cmd_sweep(spec: &ExperimentSpec, parameter: &str, values: &[f64]) -> Result<String> {
    if values.is_empty() {
        return Err(CliError::Config("no sweep values".into()));
    }
    let mut csv = String::from("parameter,value,eps_cert,eps_measured,sigma_itl,contraction,bound_slack\n");
    for &value in values {
        let row_spec = apply_parameter(spec, parameter, value)?;
        let exec = execute_spec(&row_spec)?;
        let n_runs = exec.runs.len() as f64;
        let eps_cert = exec.runs[0].cert.epsilon;
        let eps_measured =
            exec.runs.iter().map(|r| r.measured_epsilon).sum::<f64>() / n_runs;
        let contraction =
            exec.runs.iter().map(|r| r.max_contraction).sum::<f64>() / n_runs;
        let sigma = sigma_from_report(&exec.theory, eps_measured);
        let bound_slack = exec
            .runs
            .iter()
            .flat_map(|r| r.sweeps.iter())
            .map(|s: &SweepSummary| {
                let eps = s.measured_eps.iter().product::<f64>();
                sigma_from_report(&exec.theory, eps) - s.contraction
            })
            .fold(f64::INFINITY, f64::min);
        csv.push_str(&format!(
            "{parameter},{value},{},{},{},{},{}\n",
            fmt(eps_cert),
            fmt(eps_measured),
            fmt(sigma),
            fmt(contraction),
            fmt(bound_slack),
        ));
    }
    Ok(csv)
}

/// MatrixMarket export plus a JSON sidecar with dimensions and invariant
/// residuals.
pub fn cmd_export_problem(spec: &ExperimentSpec, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let (problem, h) = spec.build_hierarchy()?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Io(out_dir.to_path_buf(), e))?;

    let a_path = out_dir.join("A.mtx");
    let s_path = out_dir.join("S.mtx");
    let p_path = out_dir.join("P.mtx");
    market::write_sym_path(&a_path, &h.a).map_err(from_core)?;
    market::write_gen_path(&s_path, &h.split.s).map_err(from_core)?;
    market::write_gen_path(&p_path, &h.split.p).map_err(from_core)?;

    #[derive(serde::Serialize)]
    struct Sidecar {
        label: String,
        n: usize,
        n_s: usize,
        n_c: usize,
        provenance: String,
        smoother: String,
        manufactured_residual: f64,
        pi_a_idempotency_residual: f64,
        a_pi_a_symmetry_residual: f64,
    }
    let idem = h.pi_a.matmul(&h.pi_a).max_abs_diff(&h.pi_a);
    let api = h.a.to_gen().matmul(&h.pi_a);
    let sidecar = Sidecar {
        label: spec.label(),
        n: h.n(),
        n_s: h.n_s(),
        n_c: h.n_c(),
        provenance: h.split.provenance.clone(),
        smoother: h.smoother.label.clone(),
        manufactured_residual: problem.residual(),
        pi_a_idempotency_residual: idem,
        a_pi_a_symmetry_residual: api.max_abs_diff(&api.transpose()),
    };
    let sidecar_path = out_dir.join("problem.json");
    let text = itl_core::report::to_json_string(&sidecar)
        .map_err(|e| CliError::Run(e.to_string()))?;
    std::fs::write(&sidecar_path, text + "\n")
        .map_err(|e| CliError::Io(sidecar_path.clone(), e))?;
    Ok(vec![a_path, s_path, p_path, sidecar_path])
}

/// sigma_itl at an arbitrary accuracy, from already-computed report
/// fields: the inexactness coefficient is (1 - mu) in the full-rank
/// branch and 1 otherwise.
pub fn sigma_from_report(theory: &TheoryReport, eps: f64) -> f64 {
    let coefficient = match theory.branch {
        itl_core::theory::RankBranch::FullRank => 1.0 - theory.mu_tl.unwrap_or(0.0),
        itl_core::theory::RankBranch::Deficient => 1.0,
    };
    1.0 - 1.0 / theory.k_tl_spectral + eps * coefficient
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SplittingConfig;
    use itl_core::solvers::SolverSpec;

    fn base_spec() -> ExperimentSpec {
        ExperimentSpec {
            problem: ProblemSpec::Poisson1d { m: 15 },
            splitting: SplittingConfig::Standard1d,
            smoother: SmootherConfig::WeightedJacobi { omega: 0.7 },
            inner: vec![SolverSpec::Cg { ell: 3 }],
            nu: 1,
            postsmoothing: true,
            outer_sweeps: 1,
            trials: 4,
            seed: 11,
            initial_error: InitialError::Random,
            out: None,
        }
    }

    #[test]
    fn run_produces_passing_report() {
        let report = cmd_run(&base_spec()).unwrap();
        assert!(report.passed, "verdicts: {:?}", report.verdicts);
        assert_eq!(report.runs.len(), 4);
        assert!(report.theory.norm_e_tl < 1.0);
    }

    #[test]
    fn exact_chain_with_worst_error_attains_the_convergence_factor() {
        let mut spec = base_spec();
        spec.inner = vec![SolverSpec::Exact];
        spec.initial_error = InitialError::Worst;
        spec.trials = 1;
        let report = cmd_run(&spec).unwrap();
        let contraction = report.runs[0].max_contraction;
        assert!(
            (contraction - report.theory.norm_e_tl).abs() <= 1e-9,
            "contraction {contraction} vs norm {}",
            report.theory.norm_e_tl
        );
    }

    #[test]
    fn sweep_over_ell_is_monotone_and_bounded() {
        let mut spec = base_spec();
        spec.initial_error = InitialError::Worst;
        let csv = cmd_sweep(&spec, "ell", &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 4);
        let mut last = f64::INFINITY;
        for row in rows {
            let cols: Vec<&str> = row.split(',').collect();
            let contraction: f64 = cols[5].parse().unwrap();
            let slack: f64 = cols[6].parse().unwrap();
            assert!(contraction <= last + 1e-12, "contraction not monotone: {csv}");
            assert!(slack >= -1e-9, "bound violated: {csv}");
            last = contraction;
        }
    }

    #[test]
    fn sweep_rejects_unknown_parameter() {
        let err = cmd_sweep(&base_spec(), "bogus", &[1.0]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn sweep_rejects_empty_values() {
        let err = cmd_sweep(&base_spec(), "ell", &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn sweep_over_nu_multiplies_certificates() {
        let mut spec = base_spec();
        spec.inner = vec![SolverSpec::Cg { ell: 4 }];
        let csv = cmd_sweep(&spec, "nu", &[1.0, 2.0, 3.0]).unwrap();
        let certs: Vec<f64> = csv
            .lines()
            .skip(1)
            .map(|row| row.split(',').nth(2).unwrap().parse().unwrap())
            .collect();
        assert!((certs[1] - certs[0] * certs[0]).abs() <= 1e-12 * certs[0]);
        assert!((certs[2] - certs[0] * certs[0] * certs[0]).abs() <= 1e-12 * certs[0]);
    }

    #[test]
    fn rcd_chain_mean_squared_coarse_error_within_expected_rate() {
        // normalized squared coarse error, averaged over many trials,
        // stays within the expected decay rate
        let mut spec = base_spec();
        spec.problem = ProblemSpec::Poisson1d { m: 9 }; // n_c = 4
        let ell = 6;
        spec.inner = vec![SolverSpec::Rcd { ell, seed: 2 }];
        spec.trials = 10_000;
        spec.seed = 3;
        let (problem, h) = spec.build_hierarchy().unwrap();
        assert_eq!(h.n_c(), 4);
        let traces = crate::commands::execute_trials(&spec, &problem, &h).unwrap();
        let sq: Vec<f64> = traces
            .iter()
            .map(|t| {
                let e = t.sweeps[0].inner.overall;
                e * e
            })
            .collect();
        let n = sq.len() as f64;
        let mean = sq.iter().sum::<f64>() / n;
        let var = sq.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let se = (var / n).sqrt();
        let eig = itl_core::matrix::sym_eig(&h.a_c).unwrap();
        let rate = 1.0 - eig.lambda_min() / h.a_c.trace();
        let bound = rate.powi(ell as i32);
        assert!(mean <= bound + 3.0 * se, "mean {mean} > {bound} + 3*{se}");
    }

    #[test]
    fn verify_default_ensemble_passes() {
        let doc = cmd_verify_identities(None).unwrap();
        assert!(doc.passed, "{} of {} instances failed", doc.failed, doc.total);
        assert!(doc.total >= 80);
    }

    #[test]
    fn verify_rejects_empty_ensemble() {
        let err = cmd_verify_identities(Some(&VerifySpec { instances: vec![] })).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
