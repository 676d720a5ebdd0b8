//! Small dense helpers shared by the solver modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}

/// `a * b` for a real `a` and complex `b`, as two real products.
pub fn real_times_complex(a: &DMatrix<f64>, b: &CMatrix) -> CMatrix {
    let re = a * b.map(|z| z.re);
    let im = a * b.map(|z| z.im);
    CMatrix::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)]))
}

/// Squared Frobenius-type norm `sum_j c_j^H G c_j` over the columns of `c`.
pub fn gram_norm_sq(gram: &DMatrix<f64>, c: &CMatrix) -> f64 {
    let gc = real_times_complex(gram, c);
    c.iter().zip(gc.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>().max(0.0)
}

/// All singular values of a real square matrix, descending.
pub fn singular_values(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let m = faer::Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    let s = m
        .singular_values()
        .map_err(|e| Error::SingularValues(format!("{e:?}")))?;
    Ok(s)
}

/// Spectral-norm estimate by power iteration on `A^T A`.
///
/// Stops after `max_iter` iterations or when successive estimates agree to `tol`
/// relative. The start vector is all ones, so the result is deterministic.
pub fn power_norm(a: &DMatrix<f64>, max_iter: usize, tol: f64) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let av = a * &v;
        let atav = a.tr_mul(&av);
        let norm = atav.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm.sqrt();
        v = atav / norm;
        let converged = (next - estimate).abs() <= tol * next;
        estimate = next;
        if converged {
            break;
        }
    }
    estimate
}
