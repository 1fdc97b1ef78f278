//! Periodic elliptic cell problems and homogenized tensors.
//!
//! For a material tensor `A` and a direction `eta`, the cell corrector is
//! the periodic mean-zero potential `W` with
//!
//! ```text
//! -div( A (eta + grad W) ) = 0   on the unit cell.
//! ```
//!
//! Discretization is Fourier collocation: gradients and divergences are
//! exact frequency multipliers, the tensor acts pointwise on the grid, and
//! the resulting Hermitian positive definite system is solved matrix-free
//! by conjugate gradients preconditioned with the inverse Laplacian symbol.
//! The effective tensor takes the cell mean of the flux `A (eta + grad W)`
//! column by column.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{FieldPair, ScalarField, VectorField};
use crate::grid::TWO_PI;
use crate::material::{EnergyProduct, MaterialTensor};

pub const DEFAULT_RTOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct CellSolution {
    /// Mean-zero corrector potential.
    pub w: ScalarField,
    pub grad_w: VectorField,
    /// Flux `A (eta + grad W)` in coefficients.
    pub flux: VectorField,
    /// `|| div flux || / || A eta ||`.
    pub residual: f64,
    pub iterations: usize,
}

pub struct CellOptions {
    pub rtol: f64,
    pub max_iters: Option<usize>,
}

impl Default for CellOptions {
    fn default() -> Self {
        CellOptions {
            rtol: DEFAULT_RTOL,
            max_iters: None,
        }
    }
}

fn inv_laplacian(grid: &crate::grid::Grid, r: &ScalarField) -> ScalarField {
    let mut out = ScalarField::zeros(*grid);
    for (flat, k) in grid.iter_k() {
        let k2 = k.iter().map(|&ki| (TWO_PI * ki as f64).powi(2)).sum::<f64>();
        if k2 > 0.0 {
            out.coeffs[flat] = r.coeffs[flat] / k2;
        }
    }
    out
}

fn scalar_inner(a: &ScalarField, b: &ScalarField) -> Complex64 {
    a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x * y.conj()).sum()
}

pub fn solve_cell_corrector(
    a: &MaterialTensor,
    eta: [f64; 3],
    opts: &CellOptions,
) -> Result<CellSolution> {
    let grid = a.grid;
    let eta_c = [
        Complex64::new(eta[0], 0.0),
        Complex64::new(eta[1], 0.0),
        Complex64::new(eta[2], 0.0),
    ];
    let a_eta = a.apply_field(&VectorField::constant(grid, eta_c));
    let a_eta_norm = a_eta.norm();

    // L W = -div(A grad W),  rhs = div(A eta)
    let apply_l = |w: &ScalarField| -> ScalarField {
        let flux = a.apply_field(&w.gradient());
        let mut out = flux.divergence();
        for c in out.coeffs.iter_mut() {
            *c = -*c;
        }
        out.set_mean_zero();
        out
    };
    let mut rhs = a_eta.divergence();
    rhs.set_mean_zero();

    let rhs_norm = rhs.norm();
    let mut w = ScalarField::zeros(grid);
    let mut iterations = 0;
    if rhs_norm > 0.0 {
        let max_iters = opts.max_iters.unwrap_or(10 * grid.len());
        let mut r = rhs.clone();
        let mut z = inv_laplacian(&grid, &r);
        let mut p = z.clone();
        let mut rho = scalar_inner(&r, &z);
        let target = 0.05 * opts.rtol * rhs_norm;
        loop {
            let q = apply_l(&p);
            let alpha = rho / scalar_inner(&q, &p);
            for (wc, pc) in w.coeffs.iter_mut().zip(&p.coeffs) {
                *wc += alpha * pc;
            }
            for (rc, qc) in r.coeffs.iter_mut().zip(&q.coeffs) {
                *rc -= alpha * qc;
            }
            iterations += 1;
            if r.norm() <= target {
                break;
            }
            if iterations >= max_iters {
                let res = r.norm() / rhs_norm;
                return Err(Error::SolverDidNotConverge {
                    residual: res,
                    iterations,
                    target: opts.rtol,
                });
            }
            z = inv_laplacian(&grid, &r);
            let rho_new = scalar_inner(&r, &z);
            let beta = rho_new / rho;
            rho = rho_new;
            for (pc, zc) in p.coeffs.iter_mut().zip(&z.coeffs) {
                *pc = zc + beta * *pc;
            }
        }
        w.set_mean_zero();
    }

    let grad_w = w.gradient();
    let mut total = grad_w.clone();
    for j in 0..3 {
        total.comp[j][0] += eta_c[j];
    }
    let flux = a.apply_field(&total);
    let residual = if a_eta_norm > 0.0 {
        flux.divergence().norm() / a_eta_norm
    } else {
        0.0
    };
    if residual > opts.rtol {
        return Err(Error::SolverDidNotConverge {
            residual,
            iterations,
            target: opts.rtol,
        });
    }
    Ok(CellSolution {
        w,
        grad_w,
        flux,
        residual,
        iterations,
    })
}

#[derive(Clone, Debug)]
pub struct Homogenized {
    pub tensor: [[Complex64; 3]; 3],
    pub solutions: [CellSolution; 3],
    /// `||H - H^H||` (max entry deviation).
    pub hermiticity: f64,
    pub min_eig: f64,
}

pub fn homogenized_tensor(a: &MaterialTensor, opts: &CellOptions) -> Result<Homogenized> {
    let basis = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let sols: [CellSolution; 3] = [
        solve_cell_corrector(a, basis[0], opts)?,
        solve_cell_corrector(a, basis[1], opts)?,
        solve_cell_corrector(a, basis[2], opts)?,
    ];
    let mut h = [[Complex64::ZERO; 3]; 3];
    for (j, sol) in sols.iter().enumerate() {
        let mean = sol.flux.mean();
        for i in 0..3 {
            h[i][j] = mean[i];
        }
    }
    let mut herm: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            herm = herm.max((h[i][j] - h[j][i].conj()).norm());
        }
    }
    let mut hs = [[Complex64::ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            hs[i][j] = (h[i][j] + h[j][i].conj()) * 0.5;
        }
    }
    let min_eig = {
        let m = faer::Mat::from_fn(3, 3, |i, j| hs[i][j]);
        crate::linalg::hermitian_eig(&m)?.0[0]
    };
    Ok(Homogenized {
        tensor: h,
        solutions: sols,
        hermiticity: herm,
        min_eig,
    })
}

/// The equivalent energy form `H_ij = <A (e_j + grad W_j), e_i + grad W_i>`,
/// an independent route to the effective tensor used for cross-checks.
pub fn homogenized_energy_form(
    a: &MaterialTensor,
    sols: &[CellSolution; 3],
) -> [[Complex64; 3]; 3] {
    let grid = a.grid;
    let mut corrected: Vec<VectorField> = Vec::with_capacity(3);
    for (j, sol) in sols.iter().enumerate() {
        let mut t = sol.grad_w.clone();
        t.comp[j][0] += Complex64::new(1.0, 0.0);
        corrected.push(t);
    }
    let mut h = [[Complex64::ZERO; 3]; 3];
    for j in 0..3 {
        let flux_vals = a.apply_field(&corrected[j]).values();
        for i in 0..3 {
            let ci = corrected[i].values();
            let mut acc = Complex64::ZERO;
            for g in 0..grid.len() {
                for c in 0..3 {
                    acc += flux_vals[c][g] * ci[c][g].conj();
                }
            }
            h[i][j] = acc / grid.len() as f64;
        }
    }
    h
}

/// The six stationary modes at `xi = 0`: flux modes `(Q(e_i + grad W_i), 0)`
/// and gradient modes `(0, e_i + grad Z_i)`, orthonormalized in the weighted
/// energy product.
pub struct KernelBasis {
    pub pairs: Vec<FieldPair>,
}

pub fn kernel_basis(
    p: &MaterialTensor,
    q: &MaterialTensor,
    opts: &CellOptions,
) -> Result<KernelBasis> {
    let grid = q.grid;
    if p.grid != grid {
        return Err(Error::GridMisaligned("P and Q live on different grids".into()));
    }
    let mut raw: Vec<FieldPair> = Vec::with_capacity(6);
    for i in 0..3 {
        let mut eta = [0.0; 3];
        eta[i] = 1.0;
        let sol = solve_cell_corrector(q, eta, opts)?;
        raw.push(FieldPair {
            u: sol.flux,
            v: VectorField::zeros(grid),
        });
    }
    for i in 0..3 {
        let mut zeta = [0.0; 3];
        zeta[i] = 1.0;
        let sol = solve_cell_corrector(p, zeta, opts)?;
        let mut v = sol.grad_w;
        v.comp[i][0] += Complex64::new(1.0, 0.0);
        raw.push(FieldPair {
            u: VectorField::zeros(grid),
            v,
        });
    }
    // modified Gram-Schmidt in the weighted product
    let ip = EnergyProduct::new(p, q);
    let mut pairs: Vec<FieldPair> = Vec::with_capacity(6);
    for mut cand in raw {
        for prev in &pairs {
            let c = ip.inner(&cand, prev);
            cand = cand.sub(&prev.scale(c));
        }
        let n = ip.norm(&cand);
        if n < 1e-12 {
            return Err(Error::Numerical(
                "kernel basis degenerated during orthonormalization".into(),
            ));
        }
        pairs.push(cand.scale(Complex64::new(1.0 / n, 0.0)));
    }
    Ok(KernelBasis { pairs })
}
