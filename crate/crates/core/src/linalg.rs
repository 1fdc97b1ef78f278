//! Dense linear algebra helpers and a matrix-free GMRES.

use faer::{c64, Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eig(a: &Mat<c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let n = a.nrows();
    // symmetrize roundoff so the backend sees an exactly Hermitian input
    let mut h = Mat::<c64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            h[(i, j)] = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
        }
    }
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::EigenFailure(format!("{e:?}")))?;
    let vals = (0..n).map(|i| evd.S()[i].re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Lower Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky_lower(a: &Mat<c64>) -> Result<Mat<c64>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|_| Error::EigenFailure("Cholesky failed: matrix not positive definite".into()))?;
    Ok(llt.L().to_owned())
}

/// Solve `X L^H = B` for `X` given the lower-triangular `L` (i.e. apply
/// `L^{-H}` on the right), used to orthonormalize a basis against a Gram
/// matrix factor.
pub fn right_apply_inv_adjoint_lower(b: &Mat<c64>, l: &Mat<c64>) -> Mat<c64> {
    // X = B L^{-H}  <=>  L X^H = B^H
    let mut xh = b.adjoint().to_owned();
    l.solve_lower_triangular_in_place(&mut xh);
    xh.adjoint().to_owned()
}

/// Restarted GMRES with a caller-supplied (possibly weighted) inner product.
///
/// Solves `A x = b` where `apply` computes `A x`. The inner product must be
/// Hermitian positive definite; the residual tolerance is relative to the
/// norm of `b` in that product.
pub struct GmresOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub restart: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            tol: 1e-12,
            max_iters: 2000,
            restart: 40,
        }
    }
}

pub struct GmresOutcome {
    pub iterations: usize,
    pub residual: f64,
}

pub fn gmres<A, IP>(
    apply: A,
    ip: IP,
    b: &[Complex64],
    x: &mut [Complex64],
    opts: &GmresOptions,
) -> Result<GmresOutcome>
where
    A: Fn(&[Complex64], &mut [Complex64]),
    IP: Fn(&[Complex64], &[Complex64]) -> Complex64,
{
    let n = b.len();
    let norm = |v: &[Complex64]| ip(v, v).re.max(0.0).sqrt();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.fill(Complex64::ZERO);
        return Ok(GmresOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    let target = opts.tol * b_norm;
    let mut scratch = vec![Complex64::ZERO; n];
    let mut total_iters = 0usize;

    loop {
        // r = b - A x
        apply(x, &mut scratch);
        let mut r: Vec<Complex64> = b.iter().zip(&scratch).map(|(bi, ti)| bi - ti).collect();
        let beta = norm(&r);
        if beta <= target {
            return Ok(GmresOutcome {
                iterations: total_iters,
                residual: beta / b_norm,
            });
        }
        for v in r.iter_mut() {
            *v /= beta;
        }
        let m = opts.restart;
        let mut basis: Vec<Vec<Complex64>> = vec![r];
        let mut h = vec![vec![Complex64::ZERO; m]; m + 1];
        let mut cs = vec![Complex64::ZERO; m];
        let mut sn = vec![Complex64::ZERO; m];
        let mut g = vec![Complex64::ZERO; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;

        for k in 0..m {
            apply(&basis[k], &mut scratch);
            let mut w = scratch.clone();
            // modified Gram-Schmidt
            for j in 0..=k {
                let hjk = ip(&w, &basis[j]);
                h[j][k] = hjk;
                for (wi, vj) in w.iter_mut().zip(&basis[j]) {
                    *wi -= hjk * vj;
                }
            }
            let wn = norm(&w);
            h[k + 1][k] = Complex64::new(wn, 0.0);
            // apply accumulated Givens rotations
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j].conj() * h[j][k] + cs[j].conj() * h[j + 1][k];
                h[j][k] = t;
            }
            // new rotation zeroing h[k+1][k]
            let (c, s) = givens(h[k][k], h[k + 1][k]);
            cs[k] = c;
            sn[k] = s;
            h[k][k] = c * h[k][k] + s * h[k + 1][k];
            h[k + 1][k] = Complex64::ZERO;
            g[k + 1] = -s.conj() * g[k];
            g[k] = c.conj() * g[k];
            total_iters += 1;
            k_used = k + 1;

            let res = g[k + 1].norm();
            if res <= target || wn < 1e-300 {
                break;
            }
            if wn > 0.0 {
                for v in w.iter_mut() {
                    *v /= wn;
                }
            }
            basis.push(w);
        }

        // back substitution
        let mut y = vec![Complex64::ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vji) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vji;
            }
        }

        apply(x, &mut scratch);
        let res: f64 = norm(
            &b.iter()
                .zip(&scratch)
                .map(|(bi, ti)| bi - ti)
                .collect::<Vec<_>>(),
        );
        if res <= target {
            return Ok(GmresOutcome {
                iterations: total_iters,
                residual: res / b_norm,
            });
        }
        if total_iters >= opts.max_iters {
            return Err(Error::SolverDidNotConverge {
                residual: res / b_norm,
                iterations: total_iters,
                target: opts.tol,
            });
        }
    }
}

fn givens(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (Complex64::new(1.0, 0.0), Complex64::ZERO);
    }
    if an == 0.0 {
        return (Complex64::ZERO, Complex64::new(1.0, 0.0));
    }
    let r = (an * an + bn * bn).sqrt();
    let c = Complex64::new(an / r, 0.0);
    let s = (a / an) * b.conj() * (1.0 / r);
    (c, s)
}
