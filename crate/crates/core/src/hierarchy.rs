//! Assembly and validation of the two-level operator bundle: Galerkin
//! products A_s = S^T A S and A_c = P^T A P, the symmetrized smoothers,
//! and the A-orthogonal correction projector.
//!
//! Validity failures are hard errors here, not warnings: everything
//! downstream (solvers, bounds, identities) assumes them.

use crate::error::{Error, Result};
use crate::matrix::{
    cholesky, galerkin_product, sandwich, sym_eig, sym_sqrt, CholeskyFactor, GenMatrix, LuFactor,
    SymMatrix,
};
use crate::problems::{ProblemInstance, SplittingSpec};

/// How the local smoother matrix M_s is built from A_s.
#[derive(Debug, Clone)]
pub enum SmootherKind {
    /// M_s = diag(A_s)
    Jacobi,
    /// M_s = diag(A_s) / omega
    WeightedJacobi(f64),
    /// M_s = lower triangle of A_s including the diagonal
    GaussSeidel,
    /// Caller-provided nonsingular matrix.
    Custom(GenMatrix),
}

impl SmootherKind {
    pub fn label(&self) -> String {
        match self {
            SmootherKind::Jacobi => "jacobi".into(),
            SmootherKind::WeightedJacobi(w) => format!("weighted_jacobi({w})"),
            SmootherKind::GaussSeidel => "gauss_seidel".into(),
            SmootherKind::Custom(_) => "custom".into(),
        }
    }
}

/// A validated local smoother: M_s + M_s^T - A_s is SPD, equivalently
/// ||I - M_s^{-1} A_s||_{A_s} < 1.
#[derive(Debug, Clone)]
pub struct Smoother {
    pub m_s: GenMatrix,
    pub label: String,
}

/// Build M_s from A_s and validate it. Validity is not automatic: Jacobi
/// on an arbitrary SPD matrix may fail, and that failure is reported, not
/// patched.
pub fn make_smoother(kind: &SmootherKind, a_s: &SymMatrix) -> Result<Smoother> {
    let n_s = a_s.n();
    let m_s = match kind {
        SmootherKind::Jacobi => SymMatrix::diag(&a_s.diag_vec()).to_gen(),
        SmootherKind::WeightedJacobi(omega) => {
            if !(*omega > 0.0) {
                return Err(Error::InvalidSize {
                    context: "weighted_jacobi",
                    detail: format!("omega = {omega} must be positive"),
                });
            }
            SymMatrix::diag(&a_s.diag_vec()).scale(1.0 / omega).to_gen()
        }
        SmootherKind::GaussSeidel => {
            GenMatrix::from_fn(n_s, n_s, |i, j| if j <= i { a_s.get(i, j) } else { 0.0 })
        }
        SmootherKind::Custom(m) => {
            if m.rows() != n_s || m.cols() != n_s {
                return Err(Error::InvalidSize {
                    context: "custom_smoother",
                    detail: format!("expected {n_s}x{n_s}, got {}x{}", m.rows(), m.cols()),
                });
            }
            m.clone()
        }
    };
    validate_smoother(&m_s, a_s)?;
    Ok(Smoother { m_s, label: kind.label() })
}

/// Symmetrizer W = M_s + M_s^T - A_s; SPD is the validity condition.
fn symmetrizer(m_s: &GenMatrix, a_s: &SymMatrix) -> SymMatrix {
    SymMatrix::from_gen(&m_s.add(&m_s.transpose()).sub(&a_s.to_gen()))
}

fn validate_smoother(m_s: &GenMatrix, a_s: &SymMatrix) -> Result<()> {
    let w = symmetrizer(m_s, a_s);
    if cholesky(&w).is_err() {
        let lambda_min = sym_eig(&w)?.lambda_min();
        return Err(Error::SmootherInvalid { lambda_min });
    }
    Ok(())
}

/// The assembled two-level operator bundle. Immutable after `assemble`;
/// safe to share across concurrent runs.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub a: SymMatrix,
    pub split: SplittingSpec,
    pub smoother: Smoother,
    pub a_s: SymMatrix,
    pub a_c: SymMatrix,
    /// M_s (M_s + M_s^T - A_s)^{-1} M_s^T
    pub mbar_s: SymMatrix,
    /// M_s^T (M_s + M_s^T - A_s)^{-1} M_s
    pub mtilde_s: SymMatrix,
    /// M_s^{-1} (M_s + M_s^T - A_s) M_s^{-T}, the exact inverse of mtilde_s
    pub mtilde_s_inv: SymMatrix,
    /// M_s^{-T} (M_s + M_s^T - A_s) M_s^{-1}, the exact inverse of mbar_s
    pub mbar_s_inv: SymMatrix,
    /// P A_c^{-1} P^T A, the A-orthogonal projector onto Range(P)
    pub pi_a: GenMatrix,
    a_c_chol: CholeskyFactor,
    m_s_lu: LuFactor,
    m_s_inv: GenMatrix,
}

const PROJECTOR_TOL: f64 = 1e-9;

impl Hierarchy {
    /// Assemble and validate from a problem, splitting, and smoother.
    pub fn assemble(
        problem: &ProblemInstance,
        split: SplittingSpec,
        smoother: Smoother,
    ) -> Result<Hierarchy> {
        Self::from_parts(problem.a.clone(), split, smoother, true)
    }

    /// Two-grid specialization: S = I, M_s = M on the full space.
    pub fn two_grid(a: SymMatrix, p: GenMatrix, smoother: Smoother) -> Result<Hierarchy> {
        let n = a.n();
        if p.rows() != n || p.cols() >= n {
            return Err(Error::InvalidSize {
                context: "two_grid",
                detail: format!("P must be n x n_c with n_c < n = {n}"),
            });
        }
        let split = SplittingSpec {
            s: GenMatrix::identity(n),
            p,
            provenance: "two_grid_identity".into(),
        };
        // rank([I P]) = n holds trivially; skip the strict n_s < n bound.
        Self::from_parts(a, split, smoother, false)
    }

    fn from_parts(
        a: SymMatrix,
        split: SplittingSpec,
        smoother: Smoother,
        check_split: bool,
    ) -> Result<Hierarchy> {
        a.ensure_spd("hierarchy")?;
        if check_split {
            match split.validate() {
                Ok(()) => {}
                Err(Error::RankCondition { rank, .. }) => {
                    return Err(Error::RankCondition { rank, n: split.n() })
                }
                Err(e) => return Err(e),
            }
        }
        if split.n() != a.n() {
            return Err(Error::InvalidSize {
                context: "hierarchy",
                detail: format!("splitting is {}-dimensional, matrix is {}", split.n(), a.n()),
            });
        }
        if smoother.m_s.rows() != split.n_s() {
            return Err(Error::InvalidSize {
                context: "hierarchy",
                detail: format!(
                    "smoother is {}x{}, n_s = {}",
                    smoother.m_s.rows(),
                    smoother.m_s.cols(),
                    split.n_s()
                ),
            });
        }

        let a_s = galerkin_product(&split.s, &a);
        let a_c = galerkin_product(&split.p, &a);
        cholesky(&a_s)?;
        let a_c_chol = cholesky(&a_c)?;

        let m_s = &smoother.m_s;
        let w = symmetrizer(m_s, &a_s);
        let w_chol = match cholesky(&w) {
            Ok(f) => f,
            Err(_) => {
                let lambda_min = sym_eig(&w)?.lambda_min();
                return Err(Error::SmootherInvalid { lambda_min });
            }
        };

        // mbar = M W^{-1} M^T, mtilde = M^T W^{-1} M
        let w_inv_mt = w_chol.solve_mat(&m_s.transpose());
        let mbar_s = SymMatrix::from_gen(&m_s.matmul(&w_inv_mt));
        let w_inv_m = w_chol.solve_mat(m_s);
        let mtilde_s = SymMatrix::from_gen(&m_s.transpose().matmul(&w_inv_m));
        mbar_s.mark_spd(true);
        mtilde_s.mark_spd(true);

        let m_s_lu = m_s.lu().map_err(|_| Error::InvalidSize {
            context: "hierarchy",
            detail: "smoother matrix is singular".into(),
        })?;
        let m_s_inv = {
            let n_s = m_s.rows();
            let mut inv = GenMatrix::zeros(n_s, n_s);
            let mut e = vec![0.0; n_s];
            for j in 0..n_s {
                e[j] = 1.0;
                inv.set_column(j, &m_s_lu.solve(&e));
                e[j] = 0.0;
            }
            inv
        };
        // exact inverses: mtilde^{-1} = M^{-1} W M^{-T}, mbar^{-1} = M^{-T} W M^{-1}
        let mtilde_s_inv = sandwich(&m_s_inv, &w);
        let mbar_s_inv = sandwich(&m_s_inv.transpose(), &w);
        mtilde_s_inv.mark_spd(true);
        mbar_s_inv.mark_spd(true);

        // Pi_A = P A_c^{-1} P^T A
        let pta = split.p.transpose().matmul(&a.to_gen());
        let pi_a = split.p.matmul(&a_c_chol.solve_mat(&pta));

        let h = Hierarchy {
            a,
            split,
            smoother,
            a_s,
            a_c,
            mbar_s,
            mtilde_s,
            mtilde_s_inv,
            mbar_s_inv,
            pi_a,
            a_c_chol,
            m_s_lu,
            m_s_inv,
        };
        h.check_projector()?;
        Ok(h)
    }

    fn check_projector(&self) -> Result<()> {
        let idem = self.pi_a.matmul(&self.pi_a).max_abs_diff(&self.pi_a);
        if idem > PROJECTOR_TOL {
            return Err(Error::InvariantViolated { name: "pi_a_idempotent", residual: idem });
        }
        let api = self.a.to_gen().matmul(&self.pi_a);
        let skew = api.max_abs_diff(&api.transpose());
        if skew > PROJECTOR_TOL * self.a.max_abs() {
            return Err(Error::InvariantViolated { name: "a_pi_a_symmetric", residual: skew });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn n_s(&self) -> usize {
        self.split.n_s()
    }

    pub fn n_c(&self) -> usize {
        self.split.n_c()
    }

    /// True for the S = I specialization.
    pub fn is_two_grid(&self) -> bool {
        self.n_s() == self.n() && self.split.s == GenMatrix::identity(self.n())
    }

    pub fn a_c_chol(&self) -> &CholeskyFactor {
        &self.a_c_chol
    }

    /// M_s^{-1} x
    pub fn apply_m_inv(&self, x: &[f64]) -> Vec<f64> {
        self.m_s_lu.solve(x)
    }

    /// M_s^{-T} x
    pub fn apply_m_inv_t(&self, x: &[f64]) -> Vec<f64> {
        self.m_s_lu.solve_transpose(x)
    }

    /// Explicit M_s^{-1} (used by the iteration-matrix assembly).
    pub fn m_s_inv(&self) -> &GenMatrix {
        &self.m_s_inv
    }

    /// One compatible-relaxation sweep: u + S M_s^{-1} S^T (f - A u).
    pub fn apply_compatible_relaxation(&self, u: &[f64], f: &[f64]) -> Vec<f64> {
        let mut residual = f.to_vec();
        let au = self.a.matvec(u);
        for (r, a) in residual.iter_mut().zip(&au) {
            *r -= a;
        }
        let r_s = self.split.s.tr_matvec(&residual);
        let correction = self.split.s.matvec(&self.apply_m_inv(&r_s));
        u.iter().zip(&correction).map(|(ui, ci)| ui + ci).collect()
    }

    /// Transposed-smoother sweep: u + S M_s^{-T} S^T (f - A u).
    pub fn apply_post_relaxation(&self, u: &[f64], f: &[f64]) -> Vec<f64> {
        let mut residual = f.to_vec();
        let au = self.a.matvec(u);
        for (r, a) in residual.iter_mut().zip(&au) {
            *r -= a;
        }
        let r_s = self.split.s.tr_matvec(&residual);
        let correction = self.split.s.matvec(&self.apply_m_inv_t(&r_s));
        u.iter().zip(&correction).map(|(ui, ci)| ui + ci).collect()
    }
}

/// ||I - M_s^{-1} A_s||_{A_s}: the contraction factor of the local
/// smoother in the A_s-norm, via the symmetrized product
/// (I - X)(I - X^T) with X = A_s^{1/2} M_s^{-1} A_s^{1/2}.
pub fn smoother_contraction(h: &Hierarchy) -> Result<f64> {
    let root = sym_sqrt(&h.a_s)?;
    let x = root.to_gen().matmul(h.m_s_inv()).matmul(&root.to_gen());
    let f = GenMatrix::identity(h.n_s()).sub(&x);
    let g = SymMatrix::from_gen(&f.matmul(&f.transpose()));
    Ok(sym_eig(&g)?.lambda_max().max(0.0).sqrt())
}
