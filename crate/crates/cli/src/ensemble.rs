//! The default verification ensemble: structured Laplacians with the
//! classical splitting, random instances with generic splittings (both
//! rank branches), and two-grid companions for every fine-level matrix.

use crate::config::{InstanceSpec, ProblemSpec, SmootherConfig, SplittingConfig};
use crate::{from_core, Result};
use itl_core::hierarchy::Hierarchy;
use itl_core::problems::ProblemInstance;
use itl_core::theory::RankBranch;

/// A labeled, assembled verification instance.
pub struct EnsembleInstance {
    pub label: String,
    pub problem: ProblemInstance,
    pub hierarchy: Hierarchy,
}

fn instance(
    problem: ProblemSpec,
    splitting: SplittingConfig,
    smoother: SmootherConfig,
) -> InstanceSpec {
    InstanceSpec { problem, splitting, smoother }
}

/// Splitting sizes for a generic instance: overlap by one so that
/// n_s + n_c = n + 1 > n exercises the non-direct-sum case half the time.
fn generic_sizes(n: usize, overlap: bool) -> (usize, usize) {
    let n_c = n / 2;
    let n_s = if overlap { n - n_c + 1 } else { n - n_c };
    (n_s, n_c)
}

/// The instance list behind `verify-identities` (and acceptance): at
/// least 50 two-level instances covering structured and random problems,
/// mixed smoothers, and both rank branches.
pub fn default_instance_specs() -> Vec<InstanceSpec> {
    let mut specs = Vec::new();

    // structured 1D: classical splitting (A-orthogonal, hence the
    // rank-deficient branch of the lemma)
    for m in [7usize, 15, 31] {
        for smoother in [
            SmootherConfig::WeightedJacobi { omega: 0.7 },
            SmootherConfig::WeightedJacobi { omega: 1.3 },
            SmootherConfig::Jacobi,
            SmootherConfig::GaussSeidel,
        ] {
            specs.push(instance(
                ProblemSpec::Poisson1d { m },
                SplittingConfig::Standard1d,
                smoother,
            ));
        }
    }

    // structured 1D with generic random splittings (full-rank branch).
    // Gauss-Seidel is the one smoother that stays valid on the dense
    // Galerkin A_s these produce.
    for (i, m) in [7usize, 15, 31].into_iter().enumerate() {
        for j in 0..2usize {
            let (n_s, n_c) = generic_sizes(m, (i + j) % 2 == 0);
            specs.push(instance(
                ProblemSpec::Poisson1d { m },
                SplittingConfig::Random {
                    n_s,
                    n_c,
                    seed: 100 + (i * 2 + j) as u64,
                    force_rank_deficient_sap: false,
                },
                SmootherConfig::GaussSeidel,
            ));
        }
    }

    // structured 2D
    for (i, m) in [3usize, 4, 5].into_iter().enumerate() {
        let n = m * m;
        for j in 0..2usize {
            let (n_s, n_c) = generic_sizes(n, (i + j) % 2 == 1);
            specs.push(instance(
                ProblemSpec::Poisson2d { m },
                SplittingConfig::Random {
                    n_s,
                    n_c,
                    seed: 200 + (i * 2 + j) as u64,
                    force_rank_deficient_sap: false,
                },
                SmootherConfig::GaussSeidel,
            ));
        }
    }

    // seeded random SPD instances, all n <= 12 so the sup-inf oracle
    // covers them
    for i in 0..20u64 {
        let n = 6 + (i as usize % 4) * 2; // 6, 8, 10, 12
        let cond = if i % 2 == 0 { 10.0 } else { 100.0 };
        let (n_s, n_c) = generic_sizes(n, i % 3 == 0);
        specs.push(instance(
            ProblemSpec::RandomSpd { n, cond_target: cond, seed: 300 + i },
            SplittingConfig::Random {
                n_s,
                n_c,
                seed: 400 + i,
                force_rank_deficient_sap: false,
            },
            SmootherConfig::GaussSeidel,
        ));
    }

    // forced rank-deficient instances (the other branch of the lemma)
    for i in 0..10u64 {
        let n = 8 + (i as usize % 3) * 2; // 8, 10, 12
        specs.push(instance(
            ProblemSpec::RandomSpd { n, cond_target: 30.0, seed: 500 + i },
            SplittingConfig::Random {
                n_s: n - 2,
                n_c: n - 4,
                seed: 600 + i,
                force_rank_deficient_sap: true,
            },
            SmootherConfig::GaussSeidel,
        ));
    }

    specs
}

/// Two-grid companions: one S = I instance per ensemble entry, on the
/// same fine-level matrix. Laplacians keep Jacobi-type smoothers (valid
/// there by diagonal dominance); random matrices use Gauss-Seidel, which
/// is valid for every SPD matrix.
pub fn default_two_grid_specs() -> Vec<InstanceSpec> {
    default_instance_specs()
        .into_iter()
        .enumerate()
        .map(|(i, tl)| {
            let n = match &tl.problem {
                ProblemSpec::Poisson1d { m } => *m,
                ProblemSpec::Poisson2d { m } => m * m,
                ProblemSpec::RandomSpd { n, .. } => *n,
            };
            let n_c = if i % 2 == 0 { n / 2 } else { (n / 3).max(1) };
            let smoother = match &tl.problem {
                ProblemSpec::RandomSpd { .. } => SmootherConfig::GaussSeidel,
                _ => match i % 3 {
                    0 => SmootherConfig::Jacobi,
                    1 => SmootherConfig::WeightedJacobi { omega: 0.8 },
                    _ => SmootherConfig::GaussSeidel,
                },
            };
            instance(
                tl.problem,
                SplittingConfig::TwoGrid { n_c, seed: 700 + i as u64 },
                smoother,
            )
        })
        .collect()
}

pub fn build_instances(specs: &[InstanceSpec]) -> Result<Vec<EnsembleInstance>> {
    specs
        .iter()
        .map(|spec| {
            let exp = spec.to_experiment();
            let label = exp.label();
            let (problem, hierarchy) = exp.build_hierarchy()?;
            Ok(EnsembleInstance { label, problem, hierarchy })
        })
        .collect()
}

/// Count instances per rank branch (used by the acceptance suite to
/// confirm coverage of both cases).
pub fn branch_counts(instances: &[EnsembleInstance]) -> Result<(usize, usize)> {
    let mut full = 0;
    let mut deficient = 0;
    for inst in instances {
        let lemma =
            itl_core::theory::lemma_eigenvalues(&inst.hierarchy).map_err(from_core)?;
        match lemma.branch {
            RankBranch::FullRank => full += 1,
            RankBranch::Deficient => deficient += 1,
        }
    }
    Ok((full, deficient))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ensemble_is_large_enough() {
        let specs = default_instance_specs();
        assert!(specs.len() >= 50, "only {} instances", specs.len());
    }

    #[test]
    fn all_default_instances_assemble() {
        let instances = build_instances(&default_instance_specs()).unwrap();
        assert_eq!(instances.len(), default_instance_specs().len());
        let (full, deficient) = branch_counts(&instances).unwrap();
        assert!(full >= 10, "full-rank branch coverage: {full}");
        assert!(deficient >= 10, "deficient branch coverage: {deficient}");
    }

    #[test]
    fn two_grid_companions_assemble() {
        let instances = build_instances(&default_two_grid_specs()).unwrap();
        assert_eq!(instances.len(), default_instance_specs().len());
        assert!(instances.iter().all(|i| i.hierarchy.is_two_grid()));
    }
}
