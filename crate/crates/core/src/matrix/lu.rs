//! LU factorization with partial pivoting for general square matrices
//! (nonsymmetric smoothers, square splitting solves).

use super::GenMatrix;
use crate::error::{Error, Result};

/// Packed LU factors of a row permutation of A: A[perm[i], :] = (L U)[i, :].
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: GenMatrix,
    perm: Vec<usize>,
}

impl LuFactor {
    pub fn new(a: &GenMatrix) -> Result<Self> {
        assert!(a.is_square(), "LU requires a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        let tol = 1e-14 * scale.max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (mut pivot_row, mut pivot_val) = (k, lu.get(k, k).abs());
            for i in (k + 1)..n {
                let v = lu.get(i, k).abs();
                if v > pivot_val {
                    pivot_row = i;
                    pivot_val = v;
                }
            }
            if pivot_val <= tol {
                return Err(Error::NotSpd { context: "lu_singular", index: k, pivot: pivot_val });
            }
            if pivot_row != k {
                perm.swap(k, pivot_row);
                for j in 0..n {
                    let tmp = lu.get(k, j);
                    lu.set(k, j, lu.get(pivot_row, j));
                    lu.set(pivot_row, j, tmp);
                }
            }
            let pivot = lu.get(k, k);
            for i in (k + 1)..n {
                let factor = lu.get(i, k) / pivot;
                lu.set(i, k, factor);
                for j in (k + 1)..n {
                    let v = lu.get(i, j) - factor * lu.get(k, j);
                    lu.set(i, j, v);
                }
            }
        }
        Ok(LuFactor { lu, perm })
    }

    pub fn n(&self) -> usize {
        self.lu.rows()
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(b.len(), n);
        // forward: L y = P b   (unit lower triangle)
        let mut y: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.lu.get(i, k) * y[k];
            }
        }
        // backward: U x = y
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.lu.get(i, k) * y[k];
            }
            y[i] /= self.lu.get(i, i);
        }
        y
    }

    /// Solve A^T x = b using the same factors.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(b.len(), n);
        // A^T = U^T L^T P, so first U^T z = b (lower triangular)
        let mut z = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                z[i] -= self.lu.get(k, i) * z[k];
            }
            z[i] /= self.lu.get(i, i);
        }
        // then L^T w = z (upper triangular, unit diagonal)
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                z[i] -= self.lu.get(k, i) * z[k];
            }
        }
        // finally x = P^T w
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[self.perm[i]] = z[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_general_system() {
        let a = GenMatrix::from_rows(&[&[0.0, 2.0, 1.0], &[1.0, -1.0, 0.0], &[3.0, 0.0, 2.0]]);
        let f = a.lu().unwrap();
        let x = [1.0, 2.0, -1.0];
        let b = a.matvec(&x);
        let got = f.solve(&b);
        for (g, e) in got.iter().zip(x.iter()) {
            assert!((g - e).abs() < 1e-13, "{got:?}");
        }
    }

    #[test]
    fn transpose_solve_matches_explicit_transpose() {
        let a = GenMatrix::from_rows(&[&[0.0, 2.0, 1.0], &[1.0, -1.0, 0.0], &[3.0, 0.0, 2.0]]);
        let f = a.lu().unwrap();
        let b = [0.5, -1.5, 2.0];
        let got = f.solve_transpose(&b);
        let want = a.transpose().lu().unwrap().solve(&b);
        for (g, e) in got.iter().zip(want.iter()) {
            assert!((g - e).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = GenMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(a.lu().is_err());
    }
}
