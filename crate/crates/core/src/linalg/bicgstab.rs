use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::sparse::SparseMatrix;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// BiCGStab with Jacobi (diagonal) preconditioning.
///
/// Fallback path for systems whose band is too wide for a direct solve.
/// Restarts on breakdown of the stabilizing inner products; gives up after
/// `max_iters` with the final residual attached to the error.
pub fn bicgstab(
    a: &SparseMatrix,
    b: &[Complex64],
    tol: f64,
    max_iters: usize,
) -> Result<Vec<Complex64>> {
    let n = a.n_rows();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }
    let inv_diag: Vec<Complex64> = a
        .diag()
        .iter()
        .map(|&d| {
            if d.norm_sqr() > 0.0 {
                Complex64::new(1.0, 0.0) / d
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    let precond = |v: &[Complex64]| -> Vec<Complex64> {
        v.iter().zip(&inv_diag).map(|(x, m)| x * m).collect()
    };

    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut r = b.to_vec();
    let mut r_hat = r.clone();
    let mut rho_prev = Complex64::new(1.0, 0.0);
    let mut alpha = Complex64::new(1.0, 0.0);
    let mut omega = Complex64::new(1.0, 0.0);
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    let mut p = vec![Complex64::new(0.0, 0.0); n];
    let mut first = true;

    for _ in 0..max_iters {
        let rho = dot(&r_hat, &r);
        if rho.norm() < 1e-300 {
            // Breakdown: restart with the current residual as the shadow.
            r_hat = r.clone();
            rho_prev = Complex64::new(1.0, 0.0);
            omega = Complex64::new(1.0, 0.0);
            p.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            v.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            first = true;
            continue;
        }
        if first {
            p = r.clone();
            first = false;
        } else {
            let beta = (rho / rho_prev) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
        }
        let p_hat = precond(&p);
        v = a.matvec(&p_hat)?;
        let denom = dot(&r_hat, &v);
        if denom.norm() < 1e-300 {
            r_hat = r.clone();
            first = true;
            continue;
        }
        alpha = rho / denom;
        let s: Vec<Complex64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm(&s) <= tol * b_norm {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return Ok(x);
        }
        let s_hat = precond(&s);
        let t = a.matvec(&s_hat)?;
        let tt = dot(&t, &t);
        if tt.norm() < 1e-300 {
            return Err(Error::SolverFailure {
                residual: norm(&s) / b_norm,
                shift: None,
            });
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
        }
        r = s.iter().zip(&t).map(|(si, ti)| si - omega * ti).collect();
        if norm(&r) <= tol * b_norm {
            return Ok(x);
        }
        rho_prev = rho;
    }
    Err(Error::SolverFailure {
        residual: norm(&r) / b_norm,
        shift: None,
    })
}
