//! Cholesky factorization of SPD matrices and triangular solves.

use super::{GenMatrix, SymMatrix};
use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor L with A = L L^T.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: GenMatrix,
}

/// Factor an SPD matrix. The pivot tolerance is 1e-12 times the largest
/// diagonal entry; a pivot at or below it fails with `NotSpd` and marks
/// the matrix verified-not-SPD. Success marks it verified-SPD.
pub fn cholesky(a: &SymMatrix) -> Result<CholeskyFactor> {
    let n = a.n();
    let max_diag = (0..n).fold(0.0f64, |m, i| m.max(a.get(i, i)));
    let pivot_tol = 1e-12 * max_diag;
    let mut l = GenMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            let ljk = l.get(j, k);
            d -= ljk * ljk;
        }
        if !(d > pivot_tol) {
            a.mark_spd(false);
            return Err(Error::NotSpd { context: "cholesky", index: j, pivot: d });
        }
        let diag = d.sqrt();
        l.set(j, j, diag);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / diag);
        }
    }
    a.mark_spd(true);
    Ok(CholeskyFactor { l })
}

impl CholeskyFactor {
    pub fn n(&self) -> usize {
        self.l.rows()
    }

    pub fn lower(&self) -> &GenMatrix {
        &self.l
    }

    /// Solve A x = b via forward and back substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = self.forward(b);
        self.backward_in_place(&mut y);
        y
    }

    /// Solve L y = b.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(b.len(), n);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l.get(i, k) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        y
    }

    /// Solve L^T x = y in place.
    pub fn backward_in_place(&self, y: &mut [f64]) {
        let n = self.n();
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l.get(k, i) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
    }

    /// Solve A X = B columnwise.
    pub fn solve_mat(&self, b: &GenMatrix) -> GenMatrix {
        let mut out = GenMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            out.set_column(j, &self.solve(&b.column(j)));
        }
        out
    }

    /// Explicit A^{-1}, symmetrized.
    pub fn inverse(&self) -> SymMatrix {
        let inv = self.solve_mat(&GenMatrix::identity(self.n()));
        let s = SymMatrix::from_gen(&inv);
        s.mark_spd(true);
        s
    }

    /// x^T A^{-1} x, clamped at zero.
    pub fn inv_quadratic_form(&self, x: &[f64]) -> f64 {
        let y = self.forward(x);
        y.iter().map(|v| v * v).sum::<f64>().max(0.0)
    }

    /// ||x||_{A^{-1}} = sqrt(x^T A^{-1} x).
    pub fn inv_norm(&self, x: &[f64]) -> f64 {
        self.inv_quadratic_form(x).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_factors_to_identity() {
        let a = SymMatrix::identity(3);
        let f = cholesky(&a).unwrap();
        assert!(f.lower().max_abs_diff(&GenMatrix::identity(3)) == 0.0);
        assert_eq!(a.spd_status(), Some(true));
    }

    #[test]
    fn two_by_two_factor() {
        // [[4,2],[2,3]] -> L = [[2,0],[1,sqrt(2)]]
        let a = SymMatrix::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let f = cholesky(&a).unwrap();
        assert_eq!(f.lower().get(0, 0), 2.0);
        assert_eq!(f.lower().get(1, 0), 1.0);
        assert!((f.lower().get(1, 1) - 2.0f64.sqrt()).abs() < 1e-15);
        // re-multiplication oracle
        let llt = f.lower().matmul(&f.lower().transpose());
        assert!(llt.max_abs_diff(&a.to_gen()) <= 1e-10 * a.max_abs());
    }

    #[test]
    fn indefinite_is_rejected() {
        // eigenvalues {3, -1}
        let a = SymMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        match cholesky(&a) {
            Err(Error::NotSpd { .. }) => {}
            other => panic!("expected NotSpd, got {other:?}"),
        }
        assert_eq!(a.spd_status(), Some(false));
    }

    #[test]
    fn solve_matches_direct() {
        let a = SymMatrix::from_rows(&[&[4.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 2.0]]);
        let f = cholesky(&a).unwrap();
        let x = [1.0, -2.0, 3.0];
        let b = a.matvec(&x);
        let got = f.solve(&b);
        for (g, e) in got.iter().zip(x.iter()) {
            assert!((g - e).abs() < 1e-13);
        }
    }

    #[test]
    fn inv_norm_is_norm_of_solution() {
        let a = SymMatrix::diag(&[4.0, 9.0]);
        let f = cholesky(&a).unwrap();
        // ||x||_{A^{-1}}^2 = 1/4 + 1/9
        let v = f.inv_quadratic_form(&[1.0, 1.0]);
        assert!((v - (0.25 + 1.0 / 9.0)).abs() < 1e-15);
    }
}
