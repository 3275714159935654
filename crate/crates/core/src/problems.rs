//! Generators for SPD test systems A u = f and splitting ingredients
//! (S, P), covering structured 1D/2D Laplacians and seeded random
//! instances for property coverage.
//!
//! Right-hand sides are manufactured from a known reference solution, so
//! energy-norm errors are computable exactly in tests and traces.

use crate::error::{Error, Result};
use crate::matrix::{
    cholesky, norm2, numeric_rank, orthonormal_columns, sub_vec, sym_eig, GenMatrix, SymMatrix,
    RANK_TOL,
};
use crate::rng::{derive, SplitMix64};

const SPLITTING_RETRIES: usize = 100;

/// An SPD system with a reference solution.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub a: SymMatrix,
    pub f: Vec<f64>,
    pub u_star: Vec<f64>,
    pub label: String,
}

impl ProblemInstance {
    /// Manufacture f = A u_star and certify A as SPD.
    pub fn manufactured(a: SymMatrix, u_star: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        cholesky(&a)?;
        let f = a.matvec(&u_star);
        Ok(ProblemInstance { a, f, u_star, label: label.into() })
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    /// ||A u_star - f||_2 / ||f||_2
    pub fn residual(&self) -> f64 {
        let r = sub_vec(&self.a.matvec(&self.u_star), &self.f);
        norm2(&r) / norm2(&self.f).max(f64::MIN_POSITIVE)
    }
}

/// Fine/coarse splitting: S spans the smoothing subspace, P the coarse
/// space. Valid splittings have full-column-rank S and P whose union
/// spans the whole space.
#[derive(Debug, Clone)]
pub struct SplittingSpec {
    pub s: GenMatrix,
    pub p: GenMatrix,
    pub provenance: String,
}

impl SplittingSpec {
    pub fn n(&self) -> usize {
        self.s.rows()
    }

    pub fn n_s(&self) -> usize {
        self.s.cols()
    }

    pub fn n_c(&self) -> usize {
        self.p.cols()
    }

    /// Check dimension bounds and the three rank conditions.
    pub fn validate(&self) -> Result<()> {
        let (n, n_s, n_c) = (self.n(), self.n_s(), self.n_c());
        if self.p.rows() != n {
            return Err(Error::InvalidSize {
                context: "splitting",
                detail: format!("S has {} rows but P has {}", n, self.p.rows()),
            });
        }
        if !(n_s.max(n_c) < n && n <= n_s + n_c) {
            return Err(Error::InvalidSplit { n, n_s, n_c });
        }
        if numeric_rank(&self.s, RANK_TOL)? != n_s {
            return Err(Error::RankCondition { rank: numeric_rank(&self.s, RANK_TOL)?, n: n_s });
        }
        if numeric_rank(&self.p, RANK_TOL)? != n_c {
            return Err(Error::RankCondition { rank: numeric_rank(&self.p, RANK_TOL)?, n: n_c });
        }
        let joint = numeric_rank(&self.s.hcat(&self.p), RANK_TOL)?;
        if joint != n {
            return Err(Error::RankCondition { rank: joint, n });
        }
        Ok(())
    }
}

/// Smooth seeded vector: a few low-frequency sine modes with seeded
/// coefficients.
fn smooth_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let coeffs: Vec<f64> = (0..3).map(|_| 1.0 + (rng.next_f64() - 0.5)).collect();
    (0..n)
        .map(|i| {
            let x = (i + 1) as f64 / (n + 1) as f64;
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * ((k + 1) as f64 * std::f64::consts::PI * x).sin())
                .sum()
        })
        .collect()
}

/// 1D Laplacian: tridiag(-1, 2, -1) of size m.
pub fn poisson1d(m: usize) -> Result<ProblemInstance> {
    if m < 3 {
        return Err(Error::InvalidSize { context: "poisson1d", detail: format!("m = {m} < 3") });
    }
    let a = SymMatrix::from_fn(m, |i, j| match i.abs_diff(j) {
        0 => 2.0,
        1 => -1.0,
        _ => 0.0,
    });
    let u_star = smooth_vector(m, derive(0x1D, &[m as u64]));
    ProblemInstance::manufactured(a, u_star, format!("poisson1d(m={m})"))
}

/// 2D Laplacian on an m-by-m grid: 5-point stencil, lexicographic order.
pub fn poisson2d(m: usize) -> Result<ProblemInstance> {
    if m < 3 {
        return Err(Error::InvalidSize { context: "poisson2d", detail: format!("m = {m} < 3") });
    }
    let n = m * m;
    let a = SymMatrix::from_fn(n, |r, c| {
        let (ri, rj) = (r / m, r % m);
        let (ci, cj) = (c / m, c % m);
        if r == c {
            4.0
        } else if (ri == ci && rj.abs_diff(cj) == 1) || (rj == cj && ri.abs_diff(ci) == 1) {
            -1.0
        } else {
            0.0
        }
    });
    let mut rng = SplitMix64::new(derive(0x2D, &[m as u64]));
    let coeffs: Vec<f64> = (0..2).map(|_| 1.0 + (rng.next_f64() - 0.5)).collect();
    let u_star: Vec<f64> = (0..n)
        .map(|idx| {
            let x = ((idx / m) + 1) as f64 / (m + 1) as f64;
            let y = ((idx % m) + 1) as f64 / (m + 1) as f64;
            let pi = std::f64::consts::PI;
            coeffs[0] * (pi * x).sin() * (pi * y).sin()
                + coeffs[1] * (2.0 * pi * x).sin() * (pi * y).sin()
        })
        .collect();
    ProblemInstance::manufactured(a, u_star, format!("poisson2d(m={m})"))
}

/// Seeded random SPD matrix A = Q diag(spectrum) Q^T with the spectrum
/// log-uniform on [1, cond_target]; the endpoints 1 and cond_target are
/// always present, so the generated condition number equals the target up
/// to roundoff.
pub fn random_spd(n: usize, cond_target: f64, seed: u64) -> Result<ProblemInstance> {
    if n < 2 {
        return Err(Error::InvalidSize { context: "random_spd", detail: format!("n = {n} < 2") });
    }
    if !(cond_target >= 1.0) {
        return Err(Error::InvalidSize {
            context: "random_spd",
            detail: format!("cond_target = {cond_target} < 1"),
        });
    }
    let mut rng = SplitMix64::new(derive(seed, &[0x5bd]));
    let g = GenMatrix::from_fn(n, n, |_, _| rng.next_gaussian());
    let q = orthonormal_columns(&g)?;
    let log_k = cond_target.ln();
    let mut spectrum = vec![0.0; n];
    spectrum[0] = 1.0;
    spectrum[n - 1] = cond_target;
    for lam in spectrum.iter_mut().take(n - 1).skip(1) {
        *lam = (rng.next_f64() * log_k).exp();
    }
    let lam = SymMatrix::diag(&spectrum);
    let a = SymMatrix::from_gen(&q.matmul(&lam.to_gen()).matmul(&q.transpose()));
    let u_star: Vec<f64> = (0..n).map(|_| rng.next_gaussian()).collect();
    ProblemInstance::manufactured(
        a,
        u_star,
        format!("random_spd(n={n},cond={cond_target},seed={seed})"),
    )
}

/// Classical 1D hierarchical splitting for odd m: P interpolates linearly
/// from the (m-1)/2 even-positioned coarse nodes, S injects unit vectors
/// at the (m+1)/2 remaining fine-only nodes. Direct-sum case: n_s + n_c = n.
pub fn standard_splitting_1d(m: usize) -> Result<SplittingSpec> {
    if m < 3 || m % 2 == 0 {
        return Err(Error::InvalidSize {
            context: "standard_splitting_1d",
            detail: format!("m = {m} must be odd and >= 3"),
        });
    }
    let n_c = (m - 1) / 2;
    let n_s = (m + 1) / 2;
    let mut p = GenMatrix::zeros(m, n_c);
    for j in 0..n_c {
        p.set(2 * j, j, 0.5);
        p.set(2 * j + 1, j, 1.0);
        p.set(2 * j + 2, j, 0.5);
    }
    let mut s = GenMatrix::zeros(m, n_s);
    for k in 0..n_s {
        s.set(2 * k, k, 1.0);
    }
    let spec = SplittingSpec { s, p, provenance: format!("standard_1d(m={m})") };
    spec.validate()?;
    Ok(spec)
}

/// Seeded Gaussian splitting, resampled until the rank invariants hold.
///
/// With `force_rank_deficient_sap`, the last column of P is replaced by a
/// vector from the orthogonal complement of Range(S) in the A-inner
/// product, which drives rank(S^T A P) down to n_c - 1. That
/// configuration has measure zero under plain sampling, so it has to be
/// constructed.
pub fn random_splitting(
    a: &SymMatrix,
    n_s: usize,
    n_c: usize,
    seed: u64,
    force_rank_deficient_sap: bool,
) -> Result<SplittingSpec> {
    let n = a.n();
    if force_rank_deficient_sap && n_s >= n {
        return Err(Error::UnsatisfiableFlag);
    }
    if !(n_s.max(n_c) < n && n <= n_s + n_c) {
        return Err(Error::InvalidSplit { n, n_s, n_c });
    }
    for attempt in 0..SPLITTING_RETRIES {
        let mut rng = SplitMix64::new(derive(seed, &[0x59117, attempt as u64]));
        let s = GenMatrix::from_fn(n, n_s, |_, _| rng.next_gaussian());
        let mut p = GenMatrix::from_fn(n, n_c, |_, _| rng.next_gaussian());
        if force_rank_deficient_sap {
            // basis of Null(S^T A) from the small eigenvalues of (S^T A)^T (S^T A)
            let sta = s.transpose().matmul(&a.to_gen());
            let gram = SymMatrix::from_gen(&sta.transpose().matmul(&sta));
            let eig = sym_eig(&gram)?;
            let cut = RANK_TOL * eig.spectral_radius();
            let null_basis = eig.select_columns(|v| v <= cut);
            if null_basis.cols() == 0 {
                continue;
            }
            let coeffs: Vec<f64> = (0..null_basis.cols()).map(|_| rng.next_gaussian()).collect();
            let v = null_basis.matvec(&coeffs);
            p.set_column(n_c - 1, &v);
        }
        let spec = SplittingSpec {
            s,
            p,
            provenance: format!(
                "random(n={n},n_s={n_s},n_c={n_c},seed={seed},deficient={force_rank_deficient_sap})"
            ),
        };
        if spec.validate().is_err() {
            continue;
        }
        if force_rank_deficient_sap {
            let sap = spec.s.transpose().matmul(&a.to_gen()).matmul(&spec.p);
            if numeric_rank(&sap, RANK_TOL)? != n_c - 1 {
                continue;
            }
        }
        return Ok(spec);
    }
    Err(Error::RetriesExhausted { context: "random_splitting", retries: SPLITTING_RETRIES })
}

/// Seeded Gaussian prolongation with full column rank (for two-grid
/// instances, where S is the identity).
pub fn random_prolongation(n: usize, n_c: usize, seed: u64) -> Result<GenMatrix> {
    if n_c >= n {
        return Err(Error::InvalidSize {
            context: "random_prolongation",
            detail: format!("n_c = {n_c} must be < n = {n}"),
        });
    }
    for attempt in 0..SPLITTING_RETRIES {
        let mut rng = SplitMix64::new(derive(seed, &[0x9801, attempt as u64]));
        let p = GenMatrix::from_fn(n, n_c, |_, _| rng.next_gaussian());
        if numeric_rank(&p, RANK_TOL)? == n_c {
            return Ok(p);
        }
    }
    Err(Error::RetriesExhausted { context: "random_prolongation", retries: SPLITTING_RETRIES })
}
