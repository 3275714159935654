//! Orthonormalization used by the random problem generators.

use super::{axpy, dot, norm2, GenMatrix};
use crate::error::{Error, Result};

/// Orthonormal basis for the column span via modified Gram-Schmidt with
/// one reorthogonalization pass. Input columns must be linearly
/// independent at the 1e-12 level.
pub fn orthonormal_columns(a: &GenMatrix) -> Result<GenMatrix> {
    let (rows, cols) = (a.rows(), a.cols());
    assert!(cols <= rows, "more columns than rows");
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut v = a.column(j);
        let scale = norm2(&v);
        for _ in 0..2 {
            for qi in &q {
                let proj = dot(qi, &v);
                axpy(-proj, qi, &mut v);
            }
        }
        let norm = norm2(&v);
        if norm <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::RankCondition { rank: j, n: cols });
        }
        v.iter_mut().for_each(|x| *x /= norm);
        q.push(v);
    }
    Ok(GenMatrix::from_columns(&q))
}
