//! Dense linear-algebra primitives: matrix types, energy norms, and the
//! factorizations and spectral operations everything else builds on.
//!
//! Storage is dense row-major `f64`. This targets desk-scale verification
//! (n up to a couple thousand), not production PDE sizes.

mod chol;
mod eig;
mod lu;
pub mod market;
mod qr;

pub use chol::{cholesky, CholeskyFactor};
pub use eig::{
    generalized_sym_eig, inv_sqrt, numeric_rank, pseudo_inverse, spectrum_of_spsd_product,
    spectrum_of_spsd_product_scaled, sym_eig, sym_sqrt, sym_sqrt_scaled, EigDecomp,
};
pub use lu::LuFactor;
pub use qr::orthonormal_columns;

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Default relative threshold below which eigenvalues / singular values
/// are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

// ── vectors ─────────────────────────────────────────────────────────────

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).max(0.0).sqrt()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

// ── general dense matrix ────────────────────────────────────────────────

/// Dense rectangular matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GenMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl GenMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        GenMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        GenMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        GenMatrix { rows: r, cols: c, data }
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        let c = cols.len();
        let r = if c == 0 { 0 } else { cols[0].len() };
        assert!(cols.iter().all(|col| col.len() == r), "ragged columns");
        Self::from_fn(r, c, |i, j| cols[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[f64]) {
        assert_eq!(col.len(), self.rows);
        for i in 0..self.rows {
            self.set(i, j, col[i]);
        }
    }

    pub fn transpose(&self) -> GenMatrix {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// self^T * x without forming the transpose.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            axpy(x[i], self.row(i), &mut y);
        }
        y
    }

    pub fn matmul(&self, other: &GenMatrix) -> GenMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = GenMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &GenMatrix) -> GenMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        GenMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &GenMatrix) -> GenMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        GenMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> GenMatrix {
        let data = self.data.iter().map(|a| a * s).collect();
        GenMatrix { rows: self.rows, cols: self.cols, data }
    }

    /// Horizontal concatenation [self other].
    pub fn hcat(&self, other: &GenMatrix) -> GenMatrix {
        assert_eq!(self.rows, other.rows);
        Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self.get(i, j)
            } else {
                other.get(i, j - self.cols)
            }
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest |self - other| entry.
    pub fn max_abs_diff(&self, other: &GenMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn lu(&self) -> Result<LuFactor> {
        LuFactor::new(self)
    }

    /// Explicit inverse via LU. Desk-scale convenience; prefer the factor's
    /// solve methods in hot paths.
    pub fn inverse(&self) -> Result<GenMatrix> {
        let f = self.lu()?;
        let n = self.rows;
        let mut inv = GenMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = f.solve(&e);
            inv.set_column(j, &col);
            e[j] = 0.0;
        }
        Ok(inv)
    }
}

// ── symmetric matrix ────────────────────────────────────────────────────

/// Dense symmetric matrix with a lazily certified SPD status.
///
/// Symmetry is exact: construction averages (A + A^T)/2, so
/// `get(i, j) == get(j, i)` holds bitwise thereafter.
#[derive(Debug)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
    /// None = unknown, Some(true) = verified SPD, Some(false) = verified not SPD.
    spd: OnceLock<bool>,
}

impl Clone for SymMatrix {
    fn clone(&self) -> Self {
        let spd = OnceLock::new();
        if let Some(&v) = self.spd.get() {
            let _ = spd.set(v);
        }
        SymMatrix { n: self.n, data: self.data.clone(), spd }
    }
}

impl PartialEq for SymMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.data == other.data
    }
}

impl SymMatrix {
    /// Build from row-major entries, enforcing symmetry by averaging.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), n * n, "entry count mismatch");
        let mut data = entries;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (data[i * n + j] + data[j * n + i]);
                data[i * n + j] = avg;
                data[j * n + i] = avg;
            }
        }
        SymMatrix { n, data, spd: OnceLock::new() }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self::from_entries(n, data)
    }

    pub fn from_gen(g: &GenMatrix) -> Self {
        assert!(g.is_square(), "symmetric matrix must be square");
        Self::from_entries(g.rows(), g.data().to_vec())
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        Self::from_gen(&GenMatrix::from_rows(rows))
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n], spd: OnceLock::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_gen(&self) -> GenMatrix {
        GenMatrix { rows: self.n, cols: self.n, data: self.data.clone() }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        SymMatrix { n: self.n, data, spd: OnceLock::new() }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        SymMatrix { n: self.n, data, spd: OnceLock::new() }
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|a| a * s).collect(),
            spd: OnceLock::new(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn diag_vec(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// v^T A v
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        dot(v, &self.matvec(v))
    }

    /// Principal submatrix on the given indices.
    pub fn principal_submatrix(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix::from_fn(idx.len(), |i, j| self.get(idx[i], idx[j]))
    }

    /// Column j as a vector (equal to row j by symmetry).
    pub fn column_vec(&self, j: usize) -> Vec<f64> {
        self.row(j).to_vec()
    }

    /// SPD certification state: None = never checked.
    pub fn spd_status(&self) -> Option<bool> {
        self.spd.get().copied()
    }

    pub(crate) fn mark_spd(&self, verified: bool) {
        let _ = self.spd.set(verified);
    }

    /// Certify SPD, running a Cholesky check if the status is unknown.
    pub fn ensure_spd(&self, context: &'static str) -> Result<()> {
        match self.spd_status() {
            Some(true) => Ok(()),
            Some(false) => Err(Error::NotSpd { context, index: 0, pivot: f64::NAN }),
            None => match cholesky(self) {
                Ok(_) => Ok(()),
                Err(Error::NotSpd { index, pivot, .. }) => {
                    Err(Error::NotSpd { context, index, pivot })
                }
                Err(e) => Err(e),
            },
        }
    }
}

/// Energy norm ||v||_A = sqrt(v^T A v) for SPD `a`.
pub fn energy_norm(v: &[f64], a: &SymMatrix) -> Result<f64> {
    a.ensure_spd("energy_norm")?;
    Ok(a.quadratic_form(v).max(0.0).sqrt())
}

/// sym(B^T A B): the Galerkin triple product, symmetrized to absorb the
/// roundoff skew of the two multiplications.
pub fn galerkin_product(b: &GenMatrix, a: &SymMatrix) -> SymMatrix {
    let ab = a.to_gen().matmul(b);
    SymMatrix::from_gen(&b.transpose().matmul(&ab))
}

/// sym(L * M * L^T) for general L and symmetric M.
pub fn sandwich(l: &GenMatrix, m: &SymMatrix) -> SymMatrix {
    let lm = l.matmul(&m.to_gen());
    SymMatrix::from_gen(&lm.matmul(&l.transpose()))
}
