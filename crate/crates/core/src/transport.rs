//! Amplitude transport systems.
//!
//! Each degenerate mode group `(xi, lambda_j)` of multiplicity `m` carries
//! macroscopic amplitudes `a_l(t, x)` solving the hyperbolic system
//!
//! ```text
//! d_t a_l + sum_q b_lq . grad_x a_q = f_l,
//! b_lq = int_Y ( Psi_q x conj(Q^{-1} Phi_l) - Q^{-1} Phi_q x conj(Psi_l) ) dy.
//! ```
//!
//! The coefficient family is Hermitian in `(l, q)` — `b_lq = conj(b_ql)` —
//! so for each macroscopic Fourier mode `kappa` the matrix
//! `C(kappa)_lq = b_lq . kappa` is Hermitian and the generator `-i C` is
//! skew-Hermitian: amplitudes evolve unitarily (this is the microscopic
//! face of energy conservation). Macroscopic profiles are Fourier series on
//! the unit torus; with time-independent forcing profiles the Duhamel
//! integral is evaluated in closed form per `kappa` through the
//! eigendecomposition of `C(kappa)`.

use std::collections::BTreeMap;

use faer::{c64, Mat};
use num_complex::Complex64;

use crate::bloch::ModeGroup;
use crate::error::{Error, Result};
use crate::field::{vector_trig_to_field, FieldPair};
use crate::grid::TWO_PI;
use crate::material::{EnergyProduct, MaterialTensor};
use crate::trigap::{Rank, TrigPoly};

const B_CONSISTENCY_TOL: f64 = 1e-10;
/// Matching window for resonant fast-time frequencies.
const LAMBDA_MATCH_TOL: f64 = 1e-9;

/// Macroscopic modulation: map from the integer wavevector `n`
/// (`kappa = 2 pi n`) to a vector polynomial in the fast variables.
/// `dim = 3` polynomials describe initial data `(x, y)`; `dim = 4`
/// polynomials describe forcing densities `(x, s, y)` with no slow-time
/// dependence.
#[derive(Clone, Debug, Default)]
pub struct MacroModulated {
    pub terms: BTreeMap<[i64; 3], TrigPoly>,
}

impl MacroModulated {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, n: [i64; 3], poly: TrigPoly) {
        match self.terms.get_mut(&n) {
            Some(p) => *p = p.add(&poly).expect("incompatible polynomial"),
            None => {
                self.terms.insert(n, poly);
            }
        }
    }

    pub fn kappas(&self) -> impl Iterator<Item = [i64; 3]> + '_ {
        self.terms.keys().copied()
    }

    /// All reduced-zone classes present across the modulation.
    pub fn classes(&self) -> Result<Vec<[f64; 3]>> {
        let mut out: Vec<[f64; 3]> = Vec::new();
        for poly in self.terms.values() {
            for xi in poly.classes()? {
                if !out
                    .iter()
                    .any(|r| (0..3).all(|j| (r[j] - xi[j]).abs() < 1e-9))
                {
                    out.push(xi);
                }
            }
        }
        Ok(out)
    }
}

pub type BMatrix = Vec<Vec<[Complex64; 3]>>;

/// Coefficient vectors `b_lq` of one mode group, by collocation quadrature.
///
/// Fails loudly if the computed family is not Hermitian in `(l, q)` within
/// `1e-10`, since that breaks the skew-Hermitian structure of `i C(kappa)`
/// that norm conservation rests on.
pub fn transport_coefficients(group: &ModeGroup, q: &MaterialTensor) -> Result<BMatrix> {
    let m = group.multiplicity();
    let grid = q.grid;
    let n = grid.len();
    // precompute values of Psi_l and Q^{-1} Phi_l
    let mut psi_vals = Vec::with_capacity(m);
    let mut qinv_phi_vals = Vec::with_capacity(m);
    for pair in &group.pairs {
        psi_vals.push(pair.v.values());
        let mut u = pair.u.values();
        q.apply_inv_values(&mut u);
        qinv_phi_vals.push(u);
    }
    let cross =
        |a: [Complex64; 3], b: [Complex64; 3]| -> [Complex64; 3] {
            [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ]
        };
    let mut b: BMatrix = vec![vec![[Complex64::ZERO; 3]; m]; m];
    for l in 0..m {
        for qi in 0..m {
            let mut acc = [Complex64::ZERO; 3];
            for g in 0..n {
                let psi_q = [psi_vals[qi][0][g], psi_vals[qi][1][g], psi_vals[qi][2][g]];
                let qphi_l = [
                    qinv_phi_vals[l][0][g].conj(),
                    qinv_phi_vals[l][1][g].conj(),
                    qinv_phi_vals[l][2][g].conj(),
                ];
                let qphi_q = [
                    qinv_phi_vals[qi][0][g],
                    qinv_phi_vals[qi][1][g],
                    qinv_phi_vals[qi][2][g],
                ];
                let psi_l = [
                    psi_vals[l][0][g].conj(),
                    psi_vals[l][1][g].conj(),
                    psi_vals[l][2][g].conj(),
                ];
                let t1 = cross(psi_q, qphi_l);
                let t2 = cross(qphi_q, psi_l);
                for i in 0..3 {
                    acc[i] += t1[i] - t2[i];
                }
            }
            for i in 0..3 {
                b[l][qi][i] = acc[i] / n as f64;
            }
        }
    }
    // consistency: b_lq = conj(b_ql)
    let mut dev: f64 = 0.0;
    for l in 0..m {
        for qi in 0..m {
            for i in 0..3 {
                dev = dev.max((b[l][qi][i] - b[qi][l][i].conj()).norm());
            }
        }
    }
    if dev > B_CONSISTENCY_TOL {
        return Err(Error::TransportInconsistent {
            deviation: dev,
            tol: B_CONSISTENCY_TOL,
        });
    }
    Ok(b)
}

/// Initial-amplitude coefficients of one mode group: for every macroscopic
/// wavevector of the data, the weighted cell product of the data's
/// `xi`-quasiperiodic part against each mode.
pub fn project_initial_data(
    b0: &MacroModulated,
    e0: &MacroModulated,
    xi: [f64; 3],
    group: &ModeGroup,
    p: &MaterialTensor,
    q: &MaterialTensor,
) -> Result<BTreeMap<[i64; 3], Vec<Complex64>>> {
    let grid = q.grid;
    let ip = EnergyProduct::new(p, q);
    let m = group.multiplicity();
    let mut out = BTreeMap::new();
    let mut kappas: Vec<[i64; 3]> = b0.kappas().chain(e0.kappas()).collect();
    kappas.sort_unstable();
    kappas.dedup();
    for n in kappas {
        let zero = TrigPoly::zero(3, Rank::Vector3);
        let bp = b0.terms.get(&n).unwrap_or(&zero).gelfand(&xi)?;
        let ep = e0.terms.get(&n).unwrap_or(&zero).gelfand(&xi)?;
        if bp.is_zero() && ep.is_zero() {
            continue;
        }
        let pair = FieldPair {
            u: vector_trig_to_field(&bp, grid)?,
            v: vector_trig_to_field(&ep, grid)?,
        };
        let mut alphas = Vec::with_capacity(m);
        for mode in &group.pairs {
            alphas.push(ip.inner(&pair, mode));
        }
        if alphas.iter().any(|a| a.norm() > 0.0) {
            out.insert(n, alphas);
        }
    }
    Ok(out)
}

/// Weighted norm squared of the data restricted to one quasimomentum class,
/// summed over macroscopic wavevectors (for Parseval/tail accounting).
pub fn data_class_energy(
    b0: &MacroModulated,
    e0: &MacroModulated,
    xi: [f64; 3],
    p: &MaterialTensor,
    q: &MaterialTensor,
) -> Result<f64> {
    let grid = q.grid;
    let ip = EnergyProduct::new(p, q);
    let mut total = 0.0;
    let mut kappas: Vec<[i64; 3]> = b0.kappas().chain(e0.kappas()).collect();
    kappas.sort_unstable();
    kappas.dedup();
    for n in kappas {
        let zero = TrigPoly::zero(3, Rank::Vector3);
        let bp = b0.terms.get(&n).unwrap_or(&zero).gelfand(&xi)?;
        let ep = e0.terms.get(&n).unwrap_or(&zero).gelfand(&xi)?;
        if bp.is_zero() && ep.is_zero() {
            continue;
        }
        let pair = FieldPair {
            u: vector_trig_to_field(&bp, grid)?,
            v: vector_trig_to_field(&ep, grid)?,
        };
        total += ip.inner(&pair, &pair).re;
    }
    Ok(total)
}

/// Forcing projections `f_l(kappa)` of one mode group: the
/// `(lambda_j, xi)`-resonant component of the forcing densities tested
/// against each mode. `f_hat` pairs with `Q^{-1}` against `Phi`, `g_hat`
/// pairs plainly against `Psi`.
pub fn project_forcing(
    f_hat: Option<&MacroModulated>,
    g_hat: Option<&MacroModulated>,
    xi: [f64; 3],
    group: &ModeGroup,
    q: &MaterialTensor,
) -> Result<BTreeMap<[i64; 3], Vec<Complex64>>> {
    let grid = q.grid;
    let n_pts = grid.len();
    let m = group.multiplicity();
    let mut out: BTreeMap<[i64; 3], Vec<Complex64>> = BTreeMap::new();
    let mut kappas: Vec<[i64; 3]> = Vec::new();
    if let Some(f) = f_hat {
        kappas.extend(f.kappas());
    }
    if let Some(g) = g_hat {
        kappas.extend(g.kappas());
    }
    kappas.sort_unstable();
    kappas.dedup();

    for n in kappas {
        // resonant slice: fast-time frequency lambda_j, quasimomentum xi
        let f_part = f_hat
            .and_then(|f| f.terms.get(&n))
            .map(|p| resonant_slice(p, group.lambda, &xi))
            .transpose()?;
        let g_part = g_hat
            .and_then(|g| g.terms.get(&n))
            .map(|p| resonant_slice(p, group.lambda, &xi))
            .transpose()?;
        if f_part.as_ref().map_or(true, |p| p.is_zero())
            && g_part.as_ref().map_or(true, |p| p.is_zero())
        {
            continue;
        }
        let f_vals = match &f_part {
            Some(p) if !p.is_zero() => {
                let mut vals = vector_trig_to_field(p, grid)?.values();
                q.apply_inv_values(&mut vals);
                Some(vals)
            }
            _ => None,
        };
        let g_vals = match &g_part {
            Some(p) if !p.is_zero() => Some(vector_trig_to_field(p, grid)?.values()),
            _ => None,
        };
        let mut coeffs = Vec::with_capacity(m);
        for mode in &group.pairs {
            let phi = mode.u.values();
            let psi = mode.v.values();
            let mut acc = Complex64::ZERO;
            for g in 0..n_pts {
                if let Some(fv) = &f_vals {
                    for i in 0..3 {
                        acc += fv[i][g] * phi[i][g].conj();
                    }
                }
                if let Some(gv) = &g_vals {
                    for i in 0..3 {
                        acc += gv[i][g] * psi[i][g].conj();
                    }
                }
            }
            coeffs.push(acc / n_pts as f64);
        }
        if coeffs.iter().any(|c| c.norm() > 0.0) {
            out.insert(n, coeffs);
        }
    }
    Ok(out)
}

/// Extract the `lambda`-resonant fast-time slice of a `(s, y)` polynomial as
/// a `y`-only polynomial, restricted to the `xi` class.
fn resonant_slice(p: &TrigPoly, lambda: f64, xi: &[f64; 3]) -> Result<TrigPoly> {
    if p.dim() != 4 {
        return Err(Error::DimensionMismatch(
            "forcing densities must be polynomials in (s, y)".into(),
        ));
    }
    let mut sliced = TrigPoly::zero(3, Rank::Vector3);
    for (key, c) in p.terms() {
        let s_freq = crate::trigap::freq_from_key(key[0]);
        if (s_freq - lambda).abs() > LAMBDA_MATCH_TOL {
            continue;
        }
        let f = [
            crate::trigap::freq_from_key(key[1]),
            crate::trigap::freq_from_key(key[2]),
            crate::trigap::freq_from_key(key[3]),
        ];
        sliced = sliced.add(&TrigPoly::vector_term(3, &f, *c))?;
    }
    sliced.gelfand(xi)
}

/// One group's amplitude system, with everything needed for the closed-form
/// solution.
#[derive(Clone, Debug)]
pub struct AmplitudeSystem {
    pub xi: [f64; 3],
    pub lambda: f64,
    pub m: usize,
    pub b: BMatrix,
    pub a0: BTreeMap<[i64; 3], Vec<Complex64>>,
    pub forcing: BTreeMap<[i64; 3], Vec<Complex64>>,
}

impl AmplitudeSystem {
    /// Skew-structure check: for a real wavevector the matrix
    /// `C(kappa)_lq = b_lq . kappa` must be Hermitian so that `-i C`
    /// generates a unitary flow.
    pub fn generator(&self, kappa: [f64; 3]) -> Mat<c64> {
        let m = self.m;
        Mat::from_fn(m, m, |l, q| {
            let mut acc = Complex64::ZERO;
            for i in 0..3 {
                acc += self.b[l][q][i] * kappa[i];
            }
            acc
        })
    }
}

/// Closed-form evolution of one amplitude system.
pub struct AmplitudeSolution {
    pub xi: [f64; 3],
    pub lambda: f64,
    pub m: usize,
    /// per wavevector: eigenvalues of C(kappa), eigenvectors, and the
    /// initial data / forcing rotated into the eigenbasis
    modes: BTreeMap<[i64; 3], KappaBlock>,
}

struct KappaBlock {
    eigvals: Vec<f64>,
    eigvecs: Mat<c64>,
    a0_t: Vec<Complex64>,
    f_t: Vec<Complex64>,
}

pub fn solve_amplitude_system(sys: &AmplitudeSystem) -> Result<AmplitudeSolution> {
    let m = sys.m;
    let mut kappas: Vec<[i64; 3]> = sys.a0.keys().chain(sys.forcing.keys()).copied().collect();
    kappas.sort_unstable();
    kappas.dedup();
    let mut modes = BTreeMap::new();
    for n in kappas {
        let kappa = [
            TWO_PI * n[0] as f64,
            TWO_PI * n[1] as f64,
            TWO_PI * n[2] as f64,
        ];
        let c = sys.generator(kappa);
        let (vals, vecs) = crate::linalg::hermitian_eig(&c)?;
        let zero = vec![Complex64::ZERO; m];
        let a0 = sys.a0.get(&n).unwrap_or(&zero);
        let f = sys.forcing.get(&n).unwrap_or(&zero);
        let rotate = |v: &[Complex64]| -> Vec<Complex64> {
            (0..m)
                .map(|i| {
                    let mut acc = Complex64::ZERO;
                    for l in 0..m {
                        acc += vecs[(l, i)].conj() * v[l];
                    }
                    acc
                })
                .collect()
        };
        let a0_t = rotate(a0);
        let f_t = rotate(f);
        modes.insert(
            n,
            KappaBlock {
                eigvals: vals,
                eigvecs: vecs,
                a0_t,
                f_t,
            },
        );
    }
    Ok(AmplitudeSolution {
        xi: sys.xi,
        lambda: sys.lambda,
        m,
        modes,
    })
}

impl AmplitudeSolution {
    /// Amplitudes `a_l(t)` per macroscopic wavevector.
    ///
    /// In the eigenbasis of `C(kappa)` each component evolves as
    /// `a(t) = e^{-i mu t} a0 + phi_mu(t) f` with
    /// `phi_mu(t) = (1 - e^{-i mu t}) / (i mu)` and the zero-eigenvalue
    /// branch `phi_0(t) = t`.
    pub fn eval(&self, t: f64) -> BTreeMap<[i64; 3], Vec<Complex64>> {
        let mut out = BTreeMap::new();
        for (n, block) in &self.modes {
            let m = self.m;
            let mut in_basis = Vec::with_capacity(m);
            for i in 0..m {
                let mu = block.eigvals[i];
                let prop = Complex64::new(0.0, -mu * t).exp();
                let phi = if mu.abs() * t.abs() < 1e-10 {
                    Complex64::new(t, 0.0)
                } else {
                    (Complex64::new(1.0, 0.0) - prop) / Complex64::new(0.0, mu)
                };
                in_basis.push(prop * block.a0_t[i] + phi * block.f_t[i]);
            }
            let mut a = vec![Complex64::ZERO; m];
            for l in 0..m {
                for i in 0..m {
                    a[l] += block.eigvecs[(l, i)] * in_basis[i];
                }
            }
            out.insert(*n, a);
        }
        out
    }

    /// Total squared amplitude norm at time `t`.
    pub fn norm_sq(&self, t: f64) -> f64 {
        self.eval(t)
            .values()
            .map(|a| a.iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum()
    }

    pub fn kappas(&self) -> impl Iterator<Item = &[i64; 3]> {
        self.modes.keys()
    }
}
