//! Error type shared by all solver and analysis modules.

use std::fmt;

/// Errors surfaced by matrix kernels, generators, hierarchy assembly,
/// coarse solvers, and the theory computations.
#[derive(Debug)]
pub enum Error {
    /// A matrix required to be symmetric positive definite is not
    /// (Cholesky pivot at `index` fell below the pivot tolerance).
    NotSpd { context: &'static str, index: usize, pivot: f64 },
    /// The Jacobi eigensolver failed to reach the off-diagonal target
    /// within the sweep limit.
    NoConvergence { sweeps: usize, off_norm: f64 },
    /// A matrix required to be symmetric positive semidefinite has a
    /// significantly negative eigenvalue.
    NegativeSpectrum { context: &'static str, lambda_min: f64 },
    /// A generator was called with a size it cannot honor.
    InvalidSize { context: &'static str, detail: String },
    /// Splitting dimensions violate max{n_s, n_c} < n <= n_s + n_c.
    InvalidSplit { n: usize, n_s: usize, n_c: usize },
    /// The rank-deficiency flag cannot be satisfied (n_s = n leaves an
    /// empty complement to draw the replacement column from).
    UnsatisfiableFlag,
    /// A randomized generator exhausted its resampling budget.
    RetriesExhausted { context: &'static str, retries: usize },
    /// M_s + M_s^T - A_s is not SPD, so the smoother does not contract.
    SmootherInvalid { lambda_min: f64 },
    /// rank([S P]) < n: the splitting cannot yield a convergent method.
    RankCondition { rank: usize, n: usize },
    /// Conjugate gradients hit a nonpositive curvature p^T A p, which an
    /// SPD matrix cannot produce in exact arithmetic.
    BreakdownNumerical { step: usize, curvature: f64 },
    /// A block principal submatrix failed its Cholesky factorization.
    SingularBlock { block: usize },
    /// Range(I - Pi_A) is not contained in the range of the sup-inf
    /// Gram operator; the rank condition failed upstream.
    SubspaceMismatch { residual: f64 },
    /// The eigenvalue identity disagreed between its two computation
    /// paths beyond tolerance.
    BranchMismatch { lhs: f64, rhs: f64 },
    /// A bound radicand left [0, 1], which the theory rules out.
    NegativeRadicand { context: &'static str, value: f64 },
    /// A solver-chain specification named an unrecognized solver.
    UnknownSolver { kind: String },
    /// An internal consistency check failed beyond its tolerance.
    InvariantViolated { name: &'static str, residual: f64 },
    /// Malformed input file or matrix-format violation.
    Parse { path: String, line: usize, detail: String },
    /// Underlying I/O failure, tagged with the offending path.
    Io { path: String, source: std::io::Error },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotSpd { context, index, pivot } => {
                write!(f, "{context}: not SPD (pivot {pivot:e} at index {index})")
            }
            Error::NoConvergence { sweeps, off_norm } => {
                write!(f, "eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")
            }
            Error::NegativeSpectrum { context, lambda_min } => {
                write!(f, "{context}: not SPSD (lambda_min {lambda_min:e})")
            }
            Error::InvalidSize { context, detail } => write!(f, "{context}: {detail}"),
            Error::InvalidSplit { n, n_s, n_c } => {
                write!(f, "splitting sizes violate max{{n_s, n_c}} < n <= n_s + n_c (n={n}, n_s={n_s}, n_c={n_c})")
            }
            Error::UnsatisfiableFlag => {
                write!(f, "cannot force rank deficiency: n_s = n leaves no complement")
            }
            Error::RetriesExhausted { context, retries } => {
                write!(f, "{context}: no valid sample after {retries} retries")
            }
            Error::SmootherInvalid { lambda_min } => {
                write!(f, "smoother invalid: lambda_min(M_s + M_s^T - A_s) = {lambda_min:e} <= 0")
            }
            Error::RankCondition { rank, n } => {
                write!(f, "rank([S P]) = {rank} < n = {n}")
            }
            Error::BreakdownNumerical { step, curvature } => {
                write!(f, "cg breakdown at step {step}: p^T A p = {curvature:e}")
            }
            Error::SingularBlock { block } => write!(f, "block {block} principal submatrix not SPD"),
            Error::SubspaceMismatch { residual } => {
                write!(f, "correction subspace mismatch (residual {residual:e})")
            }
            Error::BranchMismatch { lhs, rhs } => {
                write!(f, "eigenvalue identity mismatch: {lhs:.17e} vs {rhs:.17e}")
            }
            Error::NegativeRadicand { context, value } => {
                write!(f, "{context}: radicand {value:e} outside [0, 1]")
            }
            Error::UnknownSolver { kind } => write!(f, "unknown solver kind {kind:?}"),
            Error::InvariantViolated { name, residual } => {
                write!(f, "invariant {name} violated (residual {residual:e})")
            }
            Error::Parse { path, line, detail } => write!(f, "{path}:{line}: {detail}"),
            Error::Io { path, source } => write!(f, "{path}: {source}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
