//! The outer two-level iterations: presmoothing, restriction, coarse
//! correction (exact or chained inexact), prolongation, optional
//! postsmoothing. Also assembles the explicit iteration matrices and the
//! induced preconditioner used by the analysis.
//!
//! The solver path applies operators through cached factorizations; the
//! explicit matrices exist for verification only.

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::matrix::{cholesky, sandwich, sub_vec, sym_eig, GenMatrix, SymMatrix};
use crate::rng::derive;
use crate::solvers::{run_inner, AccuracyCert, CoarseSolver, InnerTrace};

/// Outer-iteration configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Inner iterations per sweep; a length-1 chain is reused nu times.
    pub nu: usize,
    pub postsmoothing: bool,
    pub outer_sweeps: usize,
    /// Base seed for this run; per-sweep and per-step streams derive
    /// from it.
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nu < 1 {
            return Err(Error::InvalidSize { context: "run_config", detail: "nu < 1".into() });
        }
        if self.outer_sweeps < 1 {
            return Err(Error::InvalidSize {
                context: "run_config",
                detail: "outer_sweeps < 1".into(),
            });
        }
        Ok(())
    }
}

/// Energy-norm errors across one outer sweep.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    /// ||u - u^(0)||_A at sweep entry
    pub err_initial: f64,
    /// after presmoothing
    pub err_presmooth: f64,
    /// after coarse correction (the no-postsmoothing output)
    pub err_corrected: f64,
    /// after the full sweep
    pub err_final: f64,
    pub inner: InnerTrace,
}

impl SweepRecord {
    pub fn contraction(&self) -> f64 {
        if self.err_initial == 0.0 {
            0.0
        } else {
            self.err_final / self.err_initial
        }
    }
}

/// Record of a full run (one or more sweeps).
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub sweeps: Vec<SweepRecord>,
    pub cert: AccuracyCert,
    pub chain_label: String,
}

impl RunTrace {
    /// Product of the measured per-step accuracies of the first sweep.
    pub fn measured_epsilon(&self) -> f64 {
        self.sweeps[0].inner.measured_product()
    }

    /// Worst per-sweep contraction across the run.
    pub fn max_contraction(&self) -> f64 {
        self.sweeps.iter().map(SweepRecord::contraction).fold(0.0, f64::max)
    }
}

fn energy(h: &Hierarchy, u_exact: &[f64], u: &[f64]) -> f64 {
    h.a.quadratic_form(&sub_vec(u_exact, u)).max(0.0).sqrt()
}

/// One exact sweep: the five steps with a direct coarse solve. Kept
/// independent of the chained path so the reduction property is a real
/// cross-check, not a tautology.
pub fn exact_two_level(h: &Hierarchy, f: &[f64], u0: &[f64]) -> Result<(Vec<f64>, RunTrace)> {
    let u_exact = cholesky(&h.a)?.solve(f);
    let err_initial = energy(h, &u_exact, u0);

    let u1 = h.apply_compatible_relaxation(u0, f);
    let residual = sub_vec(f, &h.a.matvec(&u1));
    let r_c = h.split.p.tr_matvec(&residual);
    let e_c = h.a_c_chol().solve(&r_c);
    let u2: Vec<f64> = u1.iter().zip(h.split.p.matvec(&e_c)).map(|(u, c)| u + c).collect();
    let u_out = h.apply_post_relaxation(&u2, f);

    let r_after = sub_vec(&r_c, &h.a_c.matvec(&e_c));
    let inner = InnerTrace {
        residuals: vec![r_c.clone(), r_after],
        iterates: vec![vec![0.0; e_c.len()], e_c],
        measured_eps: vec![0.0],
        overall: 0.0,
        short_circuited: false,
    };
    let trace = RunTrace {
        sweeps: vec![SweepRecord {
            err_initial,
            err_presmooth: energy(h, &u_exact, &u1),
            err_corrected: energy(h, &u_exact, &u2),
            err_final: energy(h, &u_exact, &u_out),
            inner,
        }],
        cert: AccuracyCert::deterministic(0.0),
        chain_label: "direct".into(),
    };
    Ok((u_out, trace))
}

/// Expand a chain to nu slots: either it already has nu solvers, or a
/// single solver is reused for every inner iteration.
pub fn expand_chain(
    chain: &[Box<dyn CoarseSolver>],
    nu: usize,
) -> Result<Vec<&dyn CoarseSolver>> {
    if chain.len() == nu {
        Ok(chain.iter().map(AsRef::as_ref).collect())
    } else if chain.len() == 1 {
        Ok(vec![chain[0].as_ref(); nu])
    } else {
        Err(Error::InvalidSize {
            context: "solver_chain",
            detail: format!("chain has {} solvers but nu = {}", chain.len(), nu),
        })
    }
}

/// Inexact two-level iteration (Algorithm 2 semantics): `cfg.outer_sweeps`
/// sweeps, each running the inner chain from a zero coarse guess. With
/// `postsmoothing: false` the sweep output is the corrected iterate.
pub fn inexact_two_level(
    h: &Hierarchy,
    f: &[f64],
    u0: &[f64],
    chain: &[Box<dyn CoarseSolver>],
    cfg: &RunConfig,
) -> Result<(Vec<f64>, RunTrace)> {
    cfg.validate()?;
    let solvers = expand_chain(chain, cfg.nu)?;
    let certs: Vec<AccuracyCert> = solvers.iter().map(|s| s.apriori_cert()).collect();
    let chain_label =
        solvers.iter().map(|s| s.label()).collect::<Vec<_>>().join("+");
    let u_exact = cholesky(&h.a)?.solve(f);

    let mut u = u0.to_vec();
    let mut sweeps = Vec::with_capacity(cfg.outer_sweeps);
    for sweep in 0..cfg.outer_sweeps {
        let err_initial = energy(h, &u_exact, &u);

        let u1 = h.apply_compatible_relaxation(&u, f);
        let residual = sub_vec(f, &h.a.matvec(&u1));
        let r_c = h.split.p.tr_matvec(&residual);
        let stream = derive(cfg.seed, &[0xA1, sweep as u64]);
        let (e_c, inner) = run_inner(h, &r_c, &solvers, stream)?;
        let u2: Vec<f64> = u1.iter().zip(h.split.p.matvec(&e_c)).map(|(a, c)| a + c).collect();
        let u_out = if cfg.postsmoothing { h.apply_post_relaxation(&u2, f) } else { u2.clone() };

        sweeps.push(SweepRecord {
            err_initial,
            err_presmooth: energy(h, &u_exact, &u1),
            err_corrected: energy(h, &u_exact, &u2),
            err_final: energy(h, &u_exact, &u_out),
            inner,
        });
        u = u_out;
    }
    Ok((u, RunTrace { sweeps, cert: AccuracyCert::chain(&certs), chain_label }))
}

/// Two-grid specialization: same iteration on an S = I hierarchy.
pub fn inexact_two_grid(
    h: &Hierarchy,
    f: &[f64],
    u0: &[f64],
    chain: &[Box<dyn CoarseSolver>],
    cfg: &RunConfig,
) -> Result<(Vec<f64>, RunTrace)> {
    if !h.is_two_grid() {
        return Err(Error::InvalidSize {
            context: "inexact_two_grid",
            detail: "hierarchy does not have S = I".into(),
        });
    }
    inexact_two_level(h, f, u0, chain, cfg)
}

/// I - S M_s^{-1} S^T A
fn presmoothing_error_map(h: &Hierarchy) -> GenMatrix {
    let n = h.n();
    let sm = h.split.s.matmul(h.m_s_inv()).matmul(&h.split.s.transpose());
    GenMatrix::identity(n).sub(&sm.matmul(&h.a.to_gen()))
}

/// I - S M_s^{-T} S^T A
fn postsmoothing_error_map(h: &Hierarchy) -> GenMatrix {
    let n = h.n();
    let sm = h.split.s.matmul(&h.m_s_inv().transpose()).matmul(&h.split.s.transpose());
    GenMatrix::identity(n).sub(&sm.matmul(&h.a.to_gen()))
}

/// Error-propagation matrix of the exact sweep:
/// (I - S M_s^{-T} S^T A)(I - Pi_A)(I - S M_s^{-1} S^T A).
pub fn iteration_matrix_tl(h: &Hierarchy) -> GenMatrix {
    let correction = GenMatrix::identity(h.n()).sub(&h.pi_a);
    postsmoothing_error_map(h)
        .matmul(&correction)
        .matmul(&presmoothing_error_map(h))
}

/// Error-propagation matrix of the exact sweep without postsmoothing:
/// (I - Pi_A)(I - S M_s^{-1} S^T A).
pub fn iteration_matrix_tl_no_post(h: &Hierarchy) -> GenMatrix {
    GenMatrix::identity(h.n()).sub(&h.pi_a).matmul(&presmoothing_error_map(h))
}

/// Two-grid error-propagation matrix (I - M^{-T} A)(I - Pi_A)(I - M^{-1} A)
/// via the S = I hierarchy.
pub fn iteration_matrix_tg(a: &SymMatrix, p: &GenMatrix, m: &GenMatrix) -> Result<GenMatrix> {
    let smoother = crate::hierarchy::make_smoother(
        &crate::hierarchy::SmootherKind::Custom(m.clone()),
        a,
    )?;
    let h = Hierarchy::two_grid(a.clone(), p.clone(), smoother)?;
    Ok(iteration_matrix_tl(&h))
}

/// The induced two-level preconditioner, in both directions.
#[derive(Debug, Clone)]
pub struct TlPreconditioner {
    /// B^{-1} = S Mbar^{-1} S^T + (I - S M^{-T} S^T A) P A_c^{-1} P^T (I - A S M^{-1} S^T)
    pub b_inv: SymMatrix,
    pub b: SymMatrix,
}

const BTL_TOL: f64 = 1e-9;

/// Assemble B^{-1} from its additive form, cross-check it against the
/// iteration matrix (I - B^{-1} A = E) and against the hierarchical
/// factored form, and verify B - A is positive semidefinite.
pub fn assemble_b_tl(h: &Hierarchy) -> Result<TlPreconditioner> {
    let term1 = sandwich(&h.split.s, &h.mbar_s_inv);
    let left = postsmoothing_error_map(h);
    let mid = h.split.p.matmul(&h.a_c_chol().solve_mat(&h.split.p.transpose()));
    let term2 = left.matmul(&mid).matmul(&left.transpose());
    let b_inv = SymMatrix::from_gen(&term1.to_gen().add(&term2));

    // consistency with the iteration matrix
    let e_from_b = GenMatrix::identity(h.n()).sub(&b_inv.to_gen().matmul(&h.a.to_gen()));
    let gap = e_from_b.max_abs_diff(&iteration_matrix_tl(h));
    if gap > BTL_TOL {
        return Err(Error::InvariantViolated { name: "b_tl_matches_e_tl", residual: gap });
    }

    // hierarchical factored form
    let gap = b_inv.max_abs_diff(&assemble_b_tl_hierarchical(h)?);
    if gap > BTL_TOL {
        return Err(Error::InvariantViolated { name: "b_tl_hierarchical_form", residual: gap });
    }

    b_inv.mark_spd(true);
    let b = cholesky(&b_inv)?.inverse();

    // B - A is SPSD
    let eig_gap = sym_eig(&b.sub(&h.a))?;
    let scale = sym_eig(&h.a)?.spectral_radius();
    if eig_gap.lambda_min() < -1e-10 * scale {
        return Err(Error::InvariantViolated {
            name: "b_tl_dominates_a",
            residual: eig_gap.lambda_min(),
        });
    }
    Ok(TlPreconditioner { b_inv, b })
}

/// B^{-1} through the block-factored form
/// [S P] U^{-1} diag(Mbar^{-1}, A_c^{-1}) L^{-1} [S P]^T with unit
/// triangular U, L coupling the smoothing and coarse blocks.
pub fn assemble_b_tl_hierarchical(h: &Hierarchy) -> Result<SymMatrix> {
    let (n_s, n_c) = (h.n_s(), h.n_c());
    let joint = h.split.s.hcat(&h.split.p);
    // coupling block M^{-T} S^T A P
    let stap = h.split.s.transpose().matmul(&h.a.to_gen()).matmul(&h.split.p);
    let coupling = {
        let mut out = GenMatrix::zeros(n_s, n_c);
        for j in 0..n_c {
            out.set_column(j, &h.apply_m_inv_t(&stap.column(j)));
        }
        out
    };
    // upper factor inverse: [[I, -coupling], [0, I]]
    let mut u_inv = GenMatrix::identity(n_s + n_c);
    for i in 0..n_s {
        for j in 0..n_c {
            u_inv.set(i, n_s + j, -coupling.get(i, j));
        }
    }
    // middle: diag(Mbar^{-1}, A_c^{-1})
    let a_c_inv = h.a_c_chol().inverse();
    let mut mid = GenMatrix::zeros(n_s + n_c, n_s + n_c);
    for i in 0..n_s {
        for j in 0..n_s {
            mid.set(i, j, h.mbar_s_inv.get(i, j));
        }
    }
    for i in 0..n_c {
        for j in 0..n_c {
            mid.set(n_s + i, n_s + j, a_c_inv.get(i, j));
        }
    }
    let hat_b_inv = u_inv.matmul(&mid).matmul(&u_inv.transpose());
    Ok(SymMatrix::from_gen(&joint.matmul(&hat_b_inv).matmul(&joint.transpose())))
}
