//! Symmetric eigen helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `(lambda_min, lambda_max)` of a symmetric matrix.
pub fn eig_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    let eig = a.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

pub fn lambda_min(a: &DMatrix<f64>) -> f64 {
    eig_extremes(a).0
}

pub fn lambda_max(a: &DMatrix<f64>) -> f64 {
    eig_extremes(a).1
}

/// `A^{-1/2}` for a symmetric positive definite `A`.
pub fn inv_sqrt_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = a.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if !(min > 1e-12 * max.max(1e-300)) {
        return Err(Error::RankDeficient {
            min_eigenvalue: min,
        });
    }
    let d = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()),
    );
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&d) * q.transpose())
}

/// Largest `c` with `m <= c * h` in the Loewner order, i.e.
/// `lambda_max(h^{-1/2} m h^{-1/2})`.
pub fn relative_lambda_max(m: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<f64> {
    let s = inv_sqrt_spd(h)?;
    let mut c = &s * m * &s;
    symmetrize(&mut c);
    Ok(lambda_max(&c))
}

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}
