//! Experiment configuration: the JSON schema and the builders that turn
//! it into problems, hierarchies, and solver chains.

use crate::{from_core, CliError, Result};
use itl_core::hierarchy::{make_smoother, Hierarchy, SmootherKind};
use itl_core::matrix::galerkin_product;
use itl_core::problems::{
    poisson1d, poisson2d, random_prolongation, random_spd, random_splitting,
    standard_splitting_1d, ProblemInstance,
};
use itl_core::solvers::SolverSpec;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Poisson1d { m: usize },
    Poisson2d { m: usize },
    RandomSpd { n: usize, cond_target: f64, seed: u64 },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ProblemInstance> {
        match self {
            ProblemSpec::Poisson1d { m } => poisson1d(*m),
            ProblemSpec::Poisson2d { m } => poisson2d(*m),
            ProblemSpec::RandomSpd { n, cond_target, seed } => random_spd(*n, *cond_target, *seed),
        }
        .map_err(from_core)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplittingConfig {
    /// Classical 1D interpolation/injection pair; requires a poisson1d
    /// problem with odd m.
    #[serde(rename = "standard_1d")]
    Standard1d,
    Random {
        n_s: usize,
        n_c: usize,
        seed: u64,
        #[serde(default)]
        force_rank_deficient_sap: bool,
    },
    /// S = I with a seeded random prolongation (two-grid form).
    TwoGrid { n_c: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SmootherConfig {
    Jacobi,
    WeightedJacobi { omega: f64 },
    GaussSeidel,
}

impl SmootherConfig {
    pub fn kind(&self) -> SmootherKind {
        match self {
            SmootherConfig::Jacobi => SmootherKind::Jacobi,
            SmootherConfig::WeightedJacobi { omega } => SmootherKind::WeightedJacobi(*omega),
            SmootherConfig::GaussSeidel => SmootherKind::GaussSeidel,
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_one() -> usize {
    1
}

fn default_inner() -> Vec<SolverSpec> {
    vec![SolverSpec::Exact]
}

/// How the initial error of each trial is chosen.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialError {
    /// Seeded Gaussian error per trial.
    #[default]
    Random,
    /// The dominant error mode of the exact sweep, for which the exact
    /// contraction attains the convergence factor.
    Worst,
}

/// One experiment: a problem, a hierarchy, a solver chain, and trial
/// parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub splitting: SplittingConfig,
    pub smoother: SmootherConfig,
    #[serde(default = "default_inner")]
    pub inner: Vec<SolverSpec>,
    #[serde(default = "default_one")]
    pub nu: usize,
    #[serde(default = "default_true")]
    pub postsmoothing: bool,
    #[serde(default = "default_one")]
    pub outer_sweeps: usize,
    #[serde(default = "default_one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial_error: InitialError,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(CliError::Config("trials must be >= 1".into()));
        }
        if self.nu < 1 {
            return Err(CliError::Config("nu must be >= 1".into()));
        }
        if self.outer_sweeps < 1 {
            return Err(CliError::Config("outer_sweeps must be >= 1".into()));
        }
        if self.inner.is_empty() {
            return Err(CliError::Config("inner solver chain is empty".into()));
        }
        if self.inner.len() != 1 && self.inner.len() != self.nu {
            return Err(CliError::Config(format!(
                "inner chain has {} solvers but nu = {}",
                self.inner.len(),
                self.nu
            )));
        }
        Ok(())
    }

    /// Build the problem and assembled hierarchy this spec describes.
    pub fn build_hierarchy(&self) -> Result<(ProblemInstance, Hierarchy)> {
        let problem = self.problem.build()?;
        match &self.splitting {
            SplittingConfig::Standard1d => {
                let m = match self.problem {
                    ProblemSpec::Poisson1d { m } => m,
                    _ => {
                        return Err(CliError::Config(
                            "standard_1d splitting requires a poisson1d problem".into(),
                        ))
                    }
                };
                let split = standard_splitting_1d(m).map_err(from_core)?;
                let a_s = galerkin_product(&split.s, &problem.a);
                let smoother = make_smoother(&self.smoother.kind(), &a_s).map_err(from_core)?;
                let h = Hierarchy::assemble(&problem, split, smoother).map_err(from_core)?;
                Ok((problem, h))
            }
            SplittingConfig::Random { n_s, n_c, seed, force_rank_deficient_sap } => {
                let split =
                    random_splitting(&problem.a, *n_s, *n_c, *seed, *force_rank_deficient_sap)
                        .map_err(from_core)?;
                let a_s = galerkin_product(&split.s, &problem.a);
                let smoother = make_smoother(&self.smoother.kind(), &a_s).map_err(from_core)?;
                let h = Hierarchy::assemble(&problem, split, smoother).map_err(from_core)?;
                Ok((problem, h))
            }
            SplittingConfig::TwoGrid { n_c, seed } => {
                let p = random_prolongation(problem.n(), *n_c, *seed).map_err(from_core)?;
                let smoother =
                    make_smoother(&self.smoother.kind(), &problem.a).map_err(from_core)?;
                let h = Hierarchy::two_grid(problem.a.clone(), p, smoother).map_err(from_core)?;
                Ok((problem, h))
            }
        }
    }

    pub fn label(&self) -> String {
        let problem = match &self.problem {
            ProblemSpec::Poisson1d { m } => format!("poisson1d(m={m})"),
            ProblemSpec::Poisson2d { m } => format!("poisson2d(m={m})"),
            ProblemSpec::RandomSpd { n, cond_target, seed } => {
                format!("random_spd(n={n},cond={cond_target},seed={seed})")
            }
        };
        let splitting = match &self.splitting {
            SplittingConfig::Standard1d => "standard_1d".to_string(),
            SplittingConfig::Random { n_s, n_c, seed, force_rank_deficient_sap } => format!(
                "random(n_s={n_s},n_c={n_c},seed={seed}{})",
                if *force_rank_deficient_sap { ",deficient" } else { "" }
            ),
            SplittingConfig::TwoGrid { n_c, seed } => format!("two_grid(n_c={n_c},seed={seed})"),
        };
        let smoother = match &self.smoother {
            SmootherConfig::Jacobi => "jacobi".to_string(),
            SmootherConfig::WeightedJacobi { omega } => format!("weighted_jacobi({omega})"),
            SmootherConfig::GaussSeidel => "gauss_seidel".to_string(),
        };
        format!("{problem}/{splitting}/{smoother}")
    }
}

/// Ensemble description for `verify-identities`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    pub instances: Vec<InstanceSpec>,
}

/// One verification instance: a hierarchy with no solver chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub problem: ProblemSpec,
    pub splitting: SplittingConfig,
    pub smoother: SmootherConfig,
}

impl InstanceSpec {
    pub fn to_experiment(&self) -> ExperimentSpec {
        ExperimentSpec {
            problem: self.problem.clone(),
            splitting: self.splitting.clone(),
            smoother: self.smoother.clone(),
            inner: default_inner(),
            nu: 1,
            postsmoothing: true,
            outer_sweeps: 1,
            trials: 1,
            seed: 0,
            initial_error: InitialError::Random,
            out: None,
        }
    }
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
