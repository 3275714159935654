//! Symmetric eigendecomposition by cyclic Jacobi rotations, plus the
//! spectral operations built on it: pseudoinverse, numeric rank, matrix
//! square roots, and spectra of SPSD products.

use super::{sandwich, GenMatrix, SymMatrix, RANK_TOL};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition A = Q diag(values) Q^T with ascending values and
/// orthonormal columns in `vectors`.
#[derive(Debug, Clone)]
pub struct EigDecomp {
    pub values: Vec<f64>,
    pub vectors: GenMatrix,
}

impl EigDecomp {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn lambda_min(&self) -> f64 {
        self.values[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Largest |eigenvalue|.
    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest eigenvalue above `rank_tol * spectral_radius`.
    pub fn lambda_min_positive(&self, rank_tol: f64) -> Option<f64> {
        let cut = rank_tol * self.spectral_radius();
        self.values.iter().copied().find(|&v| v > cut)
    }

    /// Q f(Lambda) Q^T, symmetrized.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.n();
        let q = &self.vectors;
        let mapped: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let mut out = GenMatrix::zeros(n, n);
        for k in 0..n {
            let fk = mapped[k];
            if fk == 0.0 {
                continue;
            }
            for i in 0..n {
                let qik = q.get(i, k);
                if qik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let v = out.get(i, j) + fk * qik * q.get(j, k);
                    out.set(i, j, v);
                }
            }
        }
        SymMatrix::from_gen(&out)
    }

    /// ||Q^T Q - I||_max
    pub fn orthogonality_residual(&self) -> f64 {
        let qtq = self.vectors.transpose().matmul(&self.vectors);
        qtq.max_abs_diff(&GenMatrix::identity(self.n()))
    }

    /// ||A - Q Lambda Q^T||_max
    pub fn reconstruction_residual(&self, a: &SymMatrix) -> f64 {
        self.apply_fn(|v| v).max_abs_diff(a)
    }

    /// Columns of Q whose eigenvalue satisfies the predicate.
    pub fn select_columns(&self, pred: impl Fn(f64) -> bool) -> GenMatrix {
        let cols: Vec<Vec<f64>> = (0..self.n())
            .filter(|&k| pred(self.values[k]))
            .map(|k| self.vectors.column(k))
            .collect();
        GenMatrix::from_columns(&cols)
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations,
/// iterated until the off-diagonal Frobenius norm falls to 1e-14 ||A||_F.
pub fn sym_eig(a: &SymMatrix) -> Result<EigDecomp> {
    let n = a.n();
    if n == 0 {
        return Ok(EigDecomp { values: vec![], vectors: GenMatrix::zeros(0, 0) });
    }
    let mut m = a.to_gen();
    let mut q = GenMatrix::identity(n);
    let target = 1e-14 * a.frobenius();

    let off_norm = |m: &GenMatrix| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for r in (p + 1)..n {
                let v = m.get(p, r);
                s += 2.0 * v * v;
            }
        }
        s.sqrt()
    };

    let mut off = off_norm(&m);
    let mut sweeps = 0;
    while off > target {
        if sweeps >= MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off_norm: off });
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apq = m.get(p, r);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(r, r);
                // Element negligible against the diagonal: zero it out.
                let g = 100.0 * apq.abs();
                if app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    m.set(p, r, 0.0);
                    m.set(r, p, 0.0);
                    continue;
                }
                // Rutishauser rotation
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                m.set(p, p, app - t * apq);
                m.set(r, r, aqq + t * apq);
                m.set(p, r, 0.0);
                m.set(r, p, 0.0);
                for i in 0..n {
                    if i == p || i == r {
                        continue;
                    }
                    let aip = m.get(i, p);
                    let aiq = m.get(i, r);
                    let new_p = aip - s * (aiq + tau * aip);
                    let new_q = aiq + s * (aip - tau * aiq);
                    m.set(i, p, new_p);
                    m.set(p, i, new_p);
                    m.set(i, r, new_q);
                    m.set(r, i, new_q);
                }
                for i in 0..n {
                    let qip = q.get(i, p);
                    let qiq = q.get(i, r);
                    q.set(i, p, qip - s * (qiq + tau * qip));
                    q.set(i, r, qiq + s * (qip - tau * qiq));
                }
            }
        }
        sweeps += 1;
        off = off_norm(&m);
    }

    // sort ascending, carrying eigenvector columns along
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).partial_cmp(&m.get(j, j)).unwrap());
    let values: Vec<f64> = order.iter().map(|&k| m.get(k, k)).collect();
    let cols: Vec<Vec<f64>> = order.iter().map(|&k| q.column(k)).collect();
    Ok(EigDecomp { values, vectors: GenMatrix::from_columns(&cols) })
}

/// Moore-Penrose pseudoinverse of a symmetric positive semidefinite
/// matrix: eigenvalues at or below `rank_tol * lambda_max` invert to zero.
pub fn pseudo_inverse(a: &SymMatrix, rank_tol: f64) -> Result<SymMatrix> {
    let eig = sym_eig(a)?;
    let scale = eig.spectral_radius();
    if eig.lambda_min() < -rank_tol * scale {
        return Err(Error::NegativeSpectrum {
            context: "pseudo_inverse",
            lambda_min: eig.lambda_min(),
        });
    }
    let cut = rank_tol * scale;
    Ok(eig.apply_fn(|v| if v <= cut { 0.0 } else { 1.0 / v }))
}

/// Gram-route noise floor: eigenvalues of B^T B below this multiple of
/// lambda_max are eigensolver roundoff, so the singular values they
/// imply (~1e-6 sigma_max) carry no rank information.
const GRAM_NOISE: f64 = 1e-12;

/// Number of singular values above `rank_tol * sigma_max`, computed from
/// the eigenvalues of B^T B. Squaring halves the attainable precision,
/// so the cut is applied to eigenvalues at max(rank_tol^2, noise floor).
pub fn numeric_rank(b: &GenMatrix, rank_tol: f64) -> Result<usize> {
    if b.rows() == 0 || b.cols() == 0 {
        return Ok(0);
    }
    let g = SymMatrix::from_gen(&b.transpose().matmul(b));
    let eig = sym_eig(&g)?;
    let lambda_max = eig.lambda_max().max(0.0);
    if lambda_max == 0.0 {
        return Ok(0);
    }
    let cut = lambda_max * (rank_tol * rank_tol).max(GRAM_NOISE);
    Ok(eig.values.iter().filter(|&&v| v > cut).count())
}

/// Symmetric square root of an SPSD matrix (small negative eigenvalues
/// within -RANK_TOL * rho are clamped to zero).
pub fn sym_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    sym_sqrt_scaled(a, 0.0)
}

/// Like [`sym_sqrt`], but judging "numerically zero" against an external
/// `scale` as well as the spectral radius. Needed when `a` is a
/// difference of large operators that cancels to roundoff: its own
/// spectral radius is then pure noise.
pub fn sym_sqrt_scaled(a: &SymMatrix, scale: f64) -> Result<SymMatrix> {
    let eig = sym_eig(a)?;
    let cut = RANK_TOL * eig.spectral_radius().max(scale);
    if eig.lambda_min() < -cut {
        return Err(Error::NegativeSpectrum { context: "sym_sqrt", lambda_min: eig.lambda_min() });
    }
    Ok(eig.apply_fn(|v| if v <= cut { 0.0 } else { v.sqrt() }))
}

/// Inverse square root of an SPD matrix.
pub fn inv_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(a)?;
    let lmax = eig.lambda_max();
    if eig.lambda_min() <= 1e-12 * lmax.max(0.0) || lmax <= 0.0 {
        return Err(Error::NotSpd { context: "inv_sqrt", index: 0, pivot: eig.lambda_min() });
    }
    Ok(eig.apply_fn(|v| 1.0 / v.sqrt()))
}

/// Spectrum of N X for SPSD X, returned ascending as the eigenvalues of
/// the symmetric matrix X^{1/2} N X^{1/2} (same multiset).
pub fn spectrum_of_spsd_product(x: &SymMatrix, n_mat: &SymMatrix) -> Result<Vec<f64>> {
    spectrum_of_spsd_product_scaled(x, n_mat, 0.0)
}

/// [`spectrum_of_spsd_product`] with an external scale for the SPSD check
/// on X (see [`sym_sqrt_scaled`]).
pub fn spectrum_of_spsd_product_scaled(
    x: &SymMatrix,
    n_mat: &SymMatrix,
    scale: f64,
) -> Result<Vec<f64>> {
    assert_eq!(x.n(), n_mat.n());
    let root = sym_sqrt_scaled(x, scale)?;
    let m = sandwich(&root.to_gen(), n_mat);
    Ok(sym_eig(&m)?.values)
}

/// Eigenvalues of Y^{-1} X for symmetric X and SPD Y, ascending, via the
/// Cholesky congruence L^{-1} X L^{-T} with Y = L L^T.
pub fn generalized_sym_eig(x: &SymMatrix, y: &SymMatrix) -> Result<Vec<f64>> {
    assert_eq!(x.n(), y.n());
    let chol = super::cholesky(y)?;
    let n = x.n();
    let mut z = GenMatrix::zeros(n, n);
    for j in 0..n {
        z.set_column(j, &chol.forward(&x.column_vec(j)));
    }
    let zt = z.transpose();
    let mut w = GenMatrix::zeros(n, n);
    for j in 0..n {
        w.set_column(j, &chol.forward(&zt.column(j)));
    }
    Ok(sym_eig(&SymMatrix::from_gen(&w))?.values)
}
