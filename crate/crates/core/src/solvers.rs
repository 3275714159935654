//! Coarse solvers: mappings r -> e approximating A_c^{-1} r, each with an
//! a-priori accuracy certificate, plus the inner iteration that chains
//! them and measures their realized accuracy.
//!
//! Accuracy is always relative in the energy norm:
//! ||A_c^{-1} r - e||_{A_c} <= eps ||r||_{A_c^{-1}}, either for every
//! input (deterministic) or in expectation over the solver's randomness.

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::matrix::{
    axpy, cholesky, dot, sub_vec, sym_eig, CholeskyFactor, GenMatrix, SymMatrix,
};
use crate::rng::{derive, SplitMix64};
use serde::Serialize;

/// Whether a certificate bounds every realization or only the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertMode {
    Deterministic,
    InExpectation,
}

/// A-priori relative accuracy of a coarse solver (or a chain of them).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AccuracyCert {
    pub epsilon: f64,
    pub mode: CertMode,
    /// Each chained factor was below one; a factor at or above one makes
    /// the multiplicative accuracy argument inapplicable.
    pub applicable: bool,
}

impl AccuracyCert {
    pub fn deterministic(epsilon: f64) -> Self {
        AccuracyCert { epsilon, mode: CertMode::Deterministic, applicable: epsilon < 1.0 }
    }

    pub fn in_expectation(epsilon: f64) -> Self {
        AccuracyCert { epsilon, mode: CertMode::InExpectation, applicable: epsilon < 1.0 }
    }

    /// Certificate of the composition: accuracies multiply; the result is
    /// deterministic only if every factor is.
    pub fn chain(certs: &[AccuracyCert]) -> AccuracyCert {
        let epsilon = certs.iter().map(|c| c.epsilon).product();
        let mode = if certs.iter().all(|c| c.mode == CertMode::Deterministic) {
            CertMode::Deterministic
        } else {
            CertMode::InExpectation
        };
        AccuracyCert { epsilon, mode, applicable: certs.iter().all(|c| c.applicable) }
    }
}

/// A coarse-level solver: `apply` may be nonlinear and may consume
/// randomness, but must be deterministic given (r, rng_state).
pub trait CoarseSolver: Send + Sync {
    fn apply(&self, r: &[f64], rng_state: u64) -> Result<Vec<f64>>;
    fn apriori_cert(&self) -> AccuracyCert;
    fn label(&self) -> String;
}

// ── exact ───────────────────────────────────────────────────────────────

/// Cached-Cholesky direct solve; epsilon = 0.
pub struct ExactSolver {
    chol: CholeskyFactor,
}

impl ExactSolver {
    pub fn new(h: &Hierarchy) -> Self {
        ExactSolver { chol: h.a_c_chol().clone() }
    }
}

impl CoarseSolver for ExactSolver {
    fn apply(&self, r: &[f64], _rng_state: u64) -> Result<Vec<f64>> {
        Ok(self.chol.solve(r))
    }

    fn apriori_cert(&self) -> AccuracyCert {
        AccuracyCert::deterministic(0.0)
    }

    fn label(&self) -> String {
        "exact".into()
    }
}

// ── conjugate gradients ─────────────────────────────────────────────────

/// `ell` plain CG iterations from a zero initial guess.
pub struct CgSolver {
    a_c: SymMatrix,
    ell: usize,
    cert: AccuracyCert,
}

impl CgSolver {
    pub fn new(a_c: &SymMatrix, ell: usize) -> Result<Self> {
        assert!(ell >= 1, "cg needs at least one iteration");
        let eig = sym_eig(a_c)?;
        let kappa = eig.lambda_max() / eig.lambda_min();
        let root = kappa.sqrt();
        let epsilon = 2.0 * ((root - 1.0) / (root + 1.0)).powi(ell as i32);
        Ok(CgSolver { a_c: a_c.clone(), ell, cert: AccuracyCert::deterministic(epsilon) })
    }

    pub fn kappa_epsilon(kappa: f64, ell: usize) -> f64 {
        let root = kappa.sqrt();
        2.0 * ((root - 1.0) / (root + 1.0)).powi(ell as i32)
    }
}

impl CoarseSolver for CgSolver {
    fn apply(&self, r: &[f64], _rng_state: u64) -> Result<Vec<f64>> {
        let n = r.len();
        let mut x = vec![0.0; n];
        let mut res = r.to_vec();
        let mut p = res.clone();
        let mut rs_old = dot(&res, &res);
        // residuals at roundoff level stall; stop instead of dividing noise
        let stop = (1e-15 * rs_old.sqrt()).powi(2);
        for step in 0..self.ell {
            if rs_old <= stop {
                break;
            }
            let ap = self.a_c.matvec(&p);
            let curvature = dot(&p, &ap);
            if curvature <= 0.0 {
                return Err(Error::BreakdownNumerical { step, curvature });
            }
            let alpha = rs_old / curvature;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut res);
            let rs_new = dot(&res, &res);
            let beta = rs_new / rs_old;
            for (pi, ri) in p.iter_mut().zip(&res) {
                *pi = ri + beta * *pi;
            }
            rs_old = rs_new;
        }
        Ok(x)
    }

    fn apriori_cert(&self) -> AccuracyCert {
        self.cert
    }

    fn label(&self) -> String {
        format!("cg(ell={})", self.ell)
    }
}

// ── randomized coordinate descent ───────────────────────────────────────

/// `ell` coordinate steps from zero; coordinate i is sampled with
/// probability (A_c)_ii / tr(A_c). The certificate is an in-expectation
/// bound.
pub struct RcdSolver {
    a_c: SymMatrix,
    ell: usize,
    seed: u64,
    cert: AccuracyCert,
}

impl RcdSolver {
    pub fn new(a_c: &SymMatrix, ell: usize, seed: u64) -> Result<Self> {
        assert!(ell >= 1, "rcd needs at least one step");
        let eig = sym_eig(a_c)?;
        let rate = 1.0 - eig.lambda_min() / a_c.trace();
        let epsilon = rate.max(0.0).powf(ell as f64 / 2.0);
        Ok(RcdSolver { a_c: a_c.clone(), ell, seed, cert: AccuracyCert::in_expectation(epsilon) })
    }
}

impl CoarseSolver for RcdSolver {
    fn apply(&self, r: &[f64], rng_state: u64) -> Result<Vec<f64>> {
        let mut rng = SplitMix64::new(derive(self.seed, &[rng_state]));
        let diag = self.a_c.diag_vec();
        let mut e = vec![0.0; r.len()];
        for _ in 0..self.ell {
            let i = rng.next_weighted(&diag);
            let row_dot = dot(self.a_c.row(i), &e);
            e[i] += (r[i] - row_dot) / diag[i];
        }
        Ok(e)
    }

    fn apriori_cert(&self) -> AccuracyCert {
        self.cert
    }

    fn label(&self) -> String {
        format!("rcd(ell={},seed={})", self.ell, self.seed)
    }
}

// ── randomized block-coordinate descent (randomized Newton) ─────────────

/// `ell` block steps from zero; each step samples a block uniformly from
/// a fixed partition and solves that block's equations exactly.
pub struct RbcdSolver {
    a_c: SymMatrix,
    blocks: Vec<Vec<usize>>,
    factors: Vec<CholeskyFactor>,
    ell: usize,
    seed: u64,
    cert: AccuracyCert,
}

impl RbcdSolver {
    pub fn new(a_c: &SymMatrix, blocks: Vec<Vec<usize>>, ell: usize, seed: u64) -> Result<Self> {
        assert!(ell >= 1, "rbcd needs at least one step");
        validate_partition(&blocks, a_c.n())?;
        let mut factors = Vec::with_capacity(blocks.len());
        for (k, block) in blocks.iter().enumerate() {
            let sub = a_c.principal_submatrix(block);
            factors.push(cholesky(&sub).map_err(|_| Error::SingularBlock { block: k })?);
        }
        let w = expected_projection(a_c, &blocks, &factors)?;
        let lambda_min_w = sym_eig(&w.1)?.lambda_min();
        let epsilon = (1.0 - lambda_min_w).max(0.0).powf(ell as f64 / 2.0);
        Ok(RbcdSolver {
            a_c: a_c.clone(),
            blocks,
            factors,
            ell,
            seed,
            cert: AccuracyCert::in_expectation(epsilon),
        })
    }

    /// E[I_B (A_B)^{-1} I_B^T A_c] by exact enumeration over the partition.
    pub fn expected_projection_matrix(&self) -> Result<GenMatrix> {
        Ok(expected_projection(&self.a_c, &self.blocks, &self.factors)?.0)
    }

    /// Smallest eigenvalue of the expected projection.
    pub fn lambda_min_w(&self) -> Result<f64> {
        Ok(sym_eig(&expected_projection(&self.a_c, &self.blocks, &self.factors)?.1)?.lambda_min())
    }

    /// One block update of `e` for block index k (shared with `apply`).
    fn block_step(&self, e: &mut [f64], r: &[f64], k: usize) {
        let block = &self.blocks[k];
        let ae = self.a_c.matvec(e);
        let rhs: Vec<f64> = block.iter().map(|&i| r[i] - ae[i]).collect();
        let y = self.factors[k].solve(&rhs);
        for (pos, &i) in block.iter().enumerate() {
            e[i] += y[pos];
        }
    }
}

fn validate_partition(blocks: &[Vec<usize>], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if blocks.is_empty() {
        return Err(Error::InvalidSize { context: "rbcd", detail: "empty partition".into() });
    }
    for block in blocks {
        if block.is_empty() {
            return Err(Error::InvalidSize { context: "rbcd", detail: "empty block".into() });
        }
        for &i in block {
            if i >= n || seen[i] {
                return Err(Error::InvalidSize {
                    context: "rbcd",
                    detail: format!("index {i} out of range or repeated"),
                });
            }
            seen[i] = true;
        }
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::InvalidSize {
            context: "rbcd",
            detail: "partition does not cover all indices".into(),
        });
    }
    Ok(())
}

/// Returns (W, sym similar) where W = mean over blocks of
/// I_B (A_B)^{-1} I_B^T A_c and the symmetric matrix
/// A_c^{1/2} H A_c^{1/2} (H = mean block inverse) carrying its spectrum.
fn expected_projection(
    a_c: &SymMatrix,
    blocks: &[Vec<usize>],
    factors: &[CholeskyFactor],
) -> Result<(GenMatrix, SymMatrix)> {
    let n = a_c.n();
    let mut h = GenMatrix::zeros(n, n);
    for (block, factor) in blocks.iter().zip(factors) {
        let inv = factor.inverse();
        for (bi, &i) in block.iter().enumerate() {
            for (bj, &j) in block.iter().enumerate() {
                h.set(i, j, h.get(i, j) + inv.get(bi, bj));
            }
        }
    }
    let h = h.scale(1.0 / blocks.len() as f64);
    let h_sym = SymMatrix::from_gen(&h);
    let w = h.matmul(&a_c.to_gen());
    let spectral = {
        let root = crate::matrix::sym_sqrt(a_c)?;
        crate::matrix::sandwich(&root.to_gen(), &h_sym)
    };
    Ok((w, spectral))
}

impl CoarseSolver for RbcdSolver {
    fn apply(&self, r: &[f64], rng_state: u64) -> Result<Vec<f64>> {
        let mut rng = SplitMix64::new(derive(self.seed, &[rng_state]));
        let mut e = vec![0.0; r.len()];
        for _ in 0..self.ell {
            let k = rng.next_index(self.blocks.len());
            self.block_step(&mut e, r, k);
        }
        Ok(e)
    }

    fn apriori_cert(&self) -> AccuracyCert {
        self.cert
    }

    fn label(&self) -> String {
        format!("rbcd(ell={},blocks={},seed={})", self.ell, self.blocks.len(), self.seed)
    }
}

// ── stationary (linear preconditioner) ──────────────────────────────────

/// One application of an SPD preconditioner B_c^{-1}. Its certificate is
/// the spectral-equivalence radius max |1 - lambda| over lambda(B_c^{-1} A_c),
/// which is strictly stronger than the accuracy contract requires.
pub struct StationarySolver {
    b_chol: CholeskyFactor,
    cert: AccuracyCert,
    kind: String,
}

impl StationarySolver {
    pub fn new(b_c: &SymMatrix, a_c: &SymMatrix, kind: impl Into<String>) -> Result<Self> {
        let b_chol = cholesky(b_c)?;
        // lambda(B^{-1} A) via the SPD congruence L^{-1} A L^{-T}
        let l_inv = b_chol.lower().inverse()?;
        let reduced = crate::matrix::sandwich(&l_inv, a_c);
        let eig = sym_eig(&reduced)?;
        let epsilon = eig.values.iter().fold(0.0f64, |m, &l| m.max((1.0 - l).abs()));
        Ok(StationarySolver {
            b_chol,
            cert: AccuracyCert::deterministic(epsilon),
            kind: kind.into(),
        })
    }
}

impl CoarseSolver for StationarySolver {
    fn apply(&self, r: &[f64], _rng_state: u64) -> Result<Vec<f64>> {
        Ok(self.b_chol.solve(r))
    }

    fn apriori_cert(&self) -> AccuracyCert {
        self.cert
    }

    fn label(&self) -> String {
        format!("stationary({})", self.kind)
    }
}

// ── declarative solver specs ────────────────────────────────────────────

/// Preconditioner choices for the stationary solver.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StationaryKind {
    /// B_c = diag(A_c)
    Jacobi,
    /// B_c = factor * A_c
    Scaled { factor: f64 },
}

impl StationaryKind {
    pub fn build_matrix(&self, a_c: &SymMatrix) -> SymMatrix {
        match self {
            StationaryKind::Jacobi => SymMatrix::diag(&a_c.diag_vec()),
            StationaryKind::Scaled { factor } => a_c.scale(*factor),
        }
    }

    pub fn label(&self) -> String {
        match self {
            StationaryKind::Jacobi => "jacobi".into(),
            StationaryKind::Scaled { factor } => format!("scaled:{factor}"),
        }
    }
}

/// Declarative description of one inner-solver slot, as it appears in
/// run-config files.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverSpec {
    Exact,
    Cg {
        ell: usize,
    },
    Rcd {
        ell: usize,
        #[serde(default)]
        seed: u64,
    },
    Rbcd {
        ell: usize,
        blocks: Vec<Vec<usize>>,
        #[serde(default)]
        seed: u64,
    },
    Stationary {
        preconditioner: StationaryKind,
    },
}

impl SolverSpec {
    /// Instantiate against a hierarchy's coarse matrix.
    pub fn build(&self, h: &Hierarchy) -> Result<Box<dyn CoarseSolver>> {
        match self {
            SolverSpec::Exact => Ok(Box::new(ExactSolver::new(h))),
            SolverSpec::Cg { ell } => Ok(Box::new(CgSolver::new(&h.a_c, *ell)?)),
            SolverSpec::Rcd { ell, seed } => Ok(Box::new(RcdSolver::new(&h.a_c, *ell, *seed)?)),
            SolverSpec::Rbcd { ell, blocks, seed } => {
                Ok(Box::new(RbcdSolver::new(&h.a_c, blocks.clone(), *ell, *seed)?))
            }
            SolverSpec::Stationary { preconditioner } => {
                let b_c = preconditioner.build_matrix(&h.a_c);
                Ok(Box::new(StationarySolver::new(&b_c, &h.a_c, preconditioner.label())?))
            }
        }
    }

    /// The a-priori accuracy formula for this solver on a given coarse
    /// matrix (the same value the built solver certifies).
    pub fn epsilon_formula(&self, a_c: &SymMatrix) -> Result<AccuracyCert> {
        match self {
            SolverSpec::Exact => Ok(AccuracyCert::deterministic(0.0)),
            SolverSpec::Cg { ell } => Ok(CgSolver::new(a_c, *ell)?.apriori_cert()),
            SolverSpec::Rcd { ell, seed } => Ok(RcdSolver::new(a_c, *ell, *seed)?.apriori_cert()),
            SolverSpec::Rbcd { ell, blocks, seed } => {
                Ok(RbcdSolver::new(a_c, blocks.clone(), *ell, *seed)?.apriori_cert())
            }
            SolverSpec::Stationary { preconditioner } => {
                let b_c = preconditioner.build_matrix(a_c);
                Ok(StationarySolver::new(&b_c, a_c, preconditioner.label())?.apriori_cert())
            }
        }
    }

    /// Iteration count, for parameter sweeps.
    pub fn set_ell(&mut self, new_ell: usize) -> bool {
        match self {
            SolverSpec::Cg { ell } | SolverSpec::Rcd { ell, .. } | SolverSpec::Rbcd { ell, .. } => {
                *ell = new_ell;
                true
            }
            _ => false,
        }
    }
}

// ── inner iteration ─────────────────────────────────────────────────────

/// Per-step record of the inner iteration.
#[derive(Debug, Clone)]
pub struct InnerTrace {
    /// r_0 = r_c, then r_k = r_c - A_c e_k after each executed step.
    pub residuals: Vec<Vec<f64>>,
    /// e_0 = 0, then each running iterate.
    pub iterates: Vec<Vec<f64>>,
    /// Realized per-step accuracy
    /// ||A_c^{-1} r_{k-1} - B[[r_{k-1}]]||_{A_c} / ||r_{k-1}||_{A_c^{-1}}.
    pub measured_eps: Vec<f64>,
    /// Realized overall accuracy of the final iterate against r_c.
    pub overall: f64,
    /// True when a negligible residual stopped the iteration early.
    pub short_circuited: bool,
}

impl InnerTrace {
    /// Product of the per-step measured accuracies.
    pub fn measured_product(&self) -> f64 {
        self.measured_eps.iter().product()
    }
}

/// Residual norm below which the coarse problem counts as solved and
/// relative accuracies stop being meaningful.
const INNER_GUARD: f64 = 1e-14;

/// Run the inner correction recurrence e_k = e_{k-1} + B_k[[r_c - A_c e_{k-1}]]
/// from e_0 = 0, measuring each step's realized accuracy against the
/// cached exact factorization (a verification aid; the iterate itself
/// never uses it).
pub fn run_inner(
    h: &Hierarchy,
    r_c: &[f64],
    solvers: &[&dyn CoarseSolver],
    stream: u64,
) -> Result<(Vec<f64>, InnerTrace)> {
    assert!(!solvers.is_empty(), "inner chain must have at least one solver");
    let chol = h.a_c_chol();
    let mut e = vec![0.0; r_c.len()];
    let mut r = r_c.to_vec();
    let mut trace = InnerTrace {
        residuals: vec![r.clone()],
        iterates: vec![e.clone()],
        measured_eps: Vec::new(),
        overall: 0.0,
        short_circuited: false,
    };
    for (k, solver) in solvers.iter().enumerate() {
        let denom = chol.inv_norm(&r);
        if denom <= INNER_GUARD {
            trace.measured_eps.push(0.0);
            trace.short_circuited = true;
            break;
        }
        let y = solver.apply(&r, derive(stream, &[k as u64]))?;
        let exact = chol.solve(&r);
        let diff = sub_vec(&exact, &y);
        let num = h.a_c.quadratic_form(&diff).max(0.0).sqrt();
        trace.measured_eps.push(num / denom);
        for (ei, yi) in e.iter_mut().zip(&y) {
            *ei += yi;
        }
        r = sub_vec(r_c, &h.a_c.matvec(&e));
        trace.residuals.push(r.clone());
        trace.iterates.push(e.clone());
    }
    let denom0 = chol.inv_norm(r_c);
    trace.overall = if denom0 <= INNER_GUARD {
        0.0
    } else {
        let exact = chol.solve(r_c);
        let diff = sub_vec(&exact, &e);
        h.a_c.quadratic_form(&diff).max(0.0).sqrt() / denom0
    };
    Ok((e, trace))
}
