//! Preconditioned conjugate gradients for sparse symmetric positive definite systems.

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgInfo {
    pub iterations: usize,
    /// `||b - A x|| / ||b||`
    pub relative_residual: f64,
}

/// Solves `A x = b` from `x0` with a diagonal (Jacobi) preconditioner until
/// `||b - A x|| <= rel_tol * ||b||`.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    diagonal: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgInfo)> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n || diagonal.len() != n {
        return Err(Error::ShapeMismatch(format!("{}x{} system with rhs {}", a.nrows(), a.ncols(), n)));
    }
    if diagonal.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidParameter("preconditioner must be positive".into()));
    }
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], CgInfo { iterations: 0, relative_residual: 0.0 }));
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = a.mul_vec(&x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut res = norm2(&r) / b_norm;
    if res <= rel_tol {
        return Ok((x, CgInfo { iterations: 0, relative_residual: res }));
    }
    let mut z: Vec<f64> = r.iter().zip(diagonal).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolveFail { iterations: it, residual: res });
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        res = norm2(&r) / b_norm;
        if res <= rel_tol {
            // confirm against the true residual to guard against drift
            let mut true_r = a.mul_vec(&x);
            true_r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
            let true_res = norm2(&true_r) / b_norm;
            if true_res <= rel_tol {
                return Ok((x, CgInfo { iterations: it, relative_residual: true_res }));
            }
            r = true_r;
        }
        for i in 0..n {
            z[i] = r[i] / diagonal[i];
        }
        let rz_next = dot(&r, &z);
        let ratio = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + ratio * p[i];
        }
    }
    Err(Error::LinearSolveFail { iterations: max_iter, residual: res })
}
