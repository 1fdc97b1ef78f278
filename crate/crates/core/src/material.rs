//! Hermitian material tensors on the unit cell.
//!
//! A [`MaterialTensor`] holds the nine scalar entry fields of a pointwise
//! Hermitian, uniformly elliptic 3x3 tensor (permittivity or permeability
//! pattern), both as plane-wave coefficients and as cached collocation
//! values together with the pointwise inverse. Construction validates the
//! Hermitian and ellipticity invariants on the grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::trigap::{Rank, TrigPoly};

const HERMITIAN_TOL: f64 = 1e-12;
const ELLIPTICITY_SLACK: f64 = 1e-10;

type Mat3 = [[Complex64; 3]; 3];

#[derive(Clone, Debug)]
pub struct MaterialTensor {
    pub grid: Grid,
    /// Plane-wave coefficients of each entry.
    pub entries: [[ScalarField; 3]; 3],
    /// Collocation values, one 3x3 matrix per grid point.
    values: Vec<Mat3>,
    /// Pointwise inverse at each grid point.
    inv_values: Vec<Mat3>,
    pub alpha: f64,
    pub real: bool,
}

fn mat_vec(m: &Mat3, v: [Complex64; 3]) -> [Complex64; 3] {
    let mut out = [Complex64::ZERO; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i] += m[i][j] * v[j];
        }
    }
    out
}

fn inv3(m: &Mat3) -> Option<Mat3> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.norm() < 1e-300 {
        return None;
    }
    let inv_det = det.inv();
    let mut adj = [[Complex64::ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let a = m[(j + 1) % 3][(i + 1) % 3] * m[(j + 2) % 3][(i + 2) % 3]
                - m[(j + 1) % 3][(i + 2) % 3] * m[(j + 2) % 3][(i + 1) % 3];
            adj[i][j] = a * inv_det;
        }
    }
    Some(adj)
}

/// Smallest eigenvalue of a Hermitian 3x3 matrix (trigonometric formula).
fn min_eig_hermitian(m: &Mat3) -> f64 {
    let p1 = m[0][1].norm_sqr() + m[0][2].norm_sqr() + m[1][2].norm_sqr();
    let tr = (m[0][0] + m[1][1] + m[2][2]).re;
    if p1 < 1e-30 {
        return m[0][0].re.min(m[1][1].re).min(m[2][2].re);
    }
    let q = tr / 3.0;
    let p2 = (m[0][0].re - q).powi(2) + (m[1][1].re - q).powi(2) + (m[2][2].re - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = *m;
    for i in 0..3 {
        b[i][i] -= Complex64::new(q, 0.0);
        for j in 0..3 {
            b[i][j] /= p;
        }
    }
    let detb = (b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]))
        .re;
    let r = (detb / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    // smallest of the three roots
    q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos()
}

impl MaterialTensor {
    /// Build from entry coefficient fields, validating the invariants.
    pub fn from_entries(grid: Grid, entries: [[ScalarField; 3]; 3], alpha: f64) -> Result<Self> {
        let n = grid.len();
        let vals: Vec<Vec<Complex64>> = entries
            .iter()
            .flat_map(|row| row.iter().map(|e| e.values()))
            .collect();
        let mut values = Vec::with_capacity(n);
        let mut real = true;
        for g in 0..n {
            let mut m = [[Complex64::ZERO; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] = vals[3 * i + j][g];
                    if m[i][j].im.abs() > HERMITIAN_TOL {
                        real = false;
                    }
                }
            }
            values.push(m);
        }
        // Hermitian check
        for (g, m) in values.iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    let d = (m[i][j] - m[j][i].conj()).norm();
                    if d > HERMITIAN_TOL {
                        return Err(Error::NotHermitian {
                            deviation: d,
                            index: g,
                        });
                    }
                }
            }
        }
        // symmetrize roundoff and check ellipticity
        let mut min_eig = f64::INFINITY;
        let mut inv_values = Vec::with_capacity(n);
        let mut sym = Vec::with_capacity(n);
        for m in &values {
            let mut h = [[Complex64::ZERO; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    h[i][j] = (m[i][j] + m[j][i].conj()) * 0.5;
                }
            }
            min_eig = min_eig.min(min_eig_hermitian(&h));
            inv_values.push(inv3(&h).ok_or(Error::EllipticityViolation {
                min_eig: 0.0,
                alpha,
            })?);
            sym.push(h);
        }
        if min_eig < alpha - ELLIPTICITY_SLACK {
            return Err(Error::EllipticityViolation { min_eig, alpha });
        }
        Ok(MaterialTensor {
            grid,
            entries,
            values: sym,
            inv_values,
            alpha,
            real,
        })
    }

    pub fn identity(grid: Grid) -> Self {
        Self::scaled_identity(grid, 1.0)
    }

    pub fn scaled_identity(grid: Grid, c: f64) -> Self {
        let mut entries: [[ScalarField; 3]; 3] = std::array::from_fn(|_| {
            std::array::from_fn(|_| ScalarField::zeros(grid))
        });
        for i in 0..3 {
            entries[i][i].coeffs[0] = Complex64::new(c, 0.0);
        }
        Self::from_entries(grid, entries, c).expect("constant identity is valid")
    }

    /// Scalar isotropic laminate `(a + b cos(2 pi y1)) I`.
    pub fn laminate(grid: Grid, a: f64, b: f64) -> Result<Self> {
        if a - b.abs() <= 0.0 {
            return Err(Error::Config(format!(
                "laminate a={a}, b={b} is not elliptic"
            )));
        }
        if grid.dims[0] < 4 && grid.dims[0] != 1 {
            return Err(Error::Config("laminate needs at least 4 points along y1".into()));
        }
        let mut entries: [[ScalarField; 3]; 3] = std::array::from_fn(|_| {
            std::array::from_fn(|_| ScalarField::zeros(grid))
        });
        let plus = grid.flat([grid.index_of_k(0, 1).unwrap(), 0, 0]);
        let minus = grid.flat([grid.index_of_k(0, -1).unwrap(), 0, 0]);
        for i in 0..3 {
            entries[i][i].coeffs[0] = Complex64::new(a, 0.0);
            entries[i][i].coeffs[plus] = Complex64::new(b / 2.0, 0.0);
            entries[i][i].coeffs[minus] = Complex64::new(b / 2.0, 0.0);
        }
        Self::from_entries(grid, entries, a - b.abs())
    }

    /// Diagonal tensor with `a + b cos(2 pi y_i)` in slot `i` (constant along
    /// degenerate axes).
    pub fn separable_trig(grid: Grid, a: f64, b: f64) -> Result<Self> {
        if a - b.abs() <= 0.0 {
            return Err(Error::Config(format!(
                "separable-trig a={a}, b={b} is not elliptic"
            )));
        }
        let mut entries: [[ScalarField; 3]; 3] = std::array::from_fn(|_| {
            std::array::from_fn(|_| ScalarField::zeros(grid))
        });
        for i in 0..3 {
            entries[i][i].coeffs[0] = Complex64::new(a, 0.0);
            if grid.dims[i] > 1 {
                let mut ip = [0usize; 3];
                let mut im = [0usize; 3];
                ip[i] = grid.index_of_k(i, 1).unwrap();
                im[i] = grid.index_of_k(i, -1).unwrap();
                entries[i][i].coeffs[grid.flat(ip)] = Complex64::new(b / 2.0, 0.0);
                entries[i][i].coeffs[grid.flat(im)] = Complex64::new(b / 2.0, 0.0);
            }
        }
        Self::from_entries(grid, entries, a - b.abs())
    }

    /// Apply the tensor pointwise to vector values (in place).
    pub fn apply_values(&self, v: &mut [Vec<Complex64>; 3]) {
        self.apply_mats(&self.values, v)
    }

    /// Apply the pointwise inverse to vector values (in place).
    pub fn apply_inv_values(&self, v: &mut [Vec<Complex64>; 3]) {
        self.apply_mats(&self.inv_values, v)
    }

    fn apply_mats(&self, mats: &[Mat3], v: &mut [Vec<Complex64>; 3]) {
        for g in 0..self.grid.len() {
            let x = [v[0][g], v[1][g], v[2][g]];
            let y = mat_vec(&mats[g], x);
            v[0][g] = y[0];
            v[1][g] = y[1];
            v[2][g] = y[2];
        }
    }

    /// Tensor times field, collocation product, returned in coefficients.
    pub fn apply_field(&self, f: &VectorField) -> VectorField {
        let mut vals = f.values();
        self.apply_values(&mut vals);
        VectorField::from_values(self.grid, &vals)
    }

    /// Pointwise inverse times field, in coefficients.
    pub fn apply_inv_field(&self, f: &VectorField) -> VectorField {
        let mut vals = f.values();
        self.apply_inv_values(&mut vals);
        VectorField::from_values(self.grid, &vals)
    }

    pub fn value_at(&self, g: usize) -> &Mat3 {
        &self.values[g]
    }

    pub fn inv_value_at(&self, g: usize) -> &Mat3 {
        &self.inv_values[g]
    }

    /// Entry fields as exact trigonometric polynomials.
    pub fn as_trig(&self) -> [[TrigPoly; 3]; 3] {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut p = TrigPoly::zero(3, Rank::Scalar);
                for (flat, k) in self.grid.iter_k() {
                    let c = self.entries[i][j].coeffs[flat];
                    if c.norm() < 1e-300 {
                        continue;
                    }
                    let t = TrigPoly::quasi_wave(
                        3,
                        0.0,
                        &[0.0; 3],
                        &[k[0], k[1], k[2]],
                        [c, Complex64::ZERO, Complex64::ZERO],
                    );
                    p = p.add(&t.component(0)).unwrap();
                }
                p
            })
        })
    }

    /// Resample onto another (finer or equal) cell grid.
    pub fn resample(&self, grid: Grid) -> Result<Self> {
        let mut entries: [[ScalarField; 3]; 3] = std::array::from_fn(|_| {
            std::array::from_fn(|_| ScalarField::zeros(grid))
        });
        for i in 0..3 {
            for j in 0..3 {
                for (flat, k) in self.grid.iter_k() {
                    let c = self.entries[i][j].coeffs[flat];
                    if c.norm() < 1e-300 {
                        continue;
                    }
                    let idx = [
                        grid.index_of_k(0, k[0]).ok_or_else(|| Error::GridMisaligned(
                            "target grid too coarse for material".into(),
                        ))?,
                        grid.index_of_k(1, k[1]).ok_or_else(|| Error::GridMisaligned(
                            "target grid too coarse for material".into(),
                        ))?,
                        grid.index_of_k(2, k[2]).ok_or_else(|| Error::GridMisaligned(
                            "target grid too coarse for material".into(),
                        ))?,
                    ];
                    entries[i][j].coeffs[grid.flat(idx)] = c;
                }
            }
        }
        Self::from_entries(grid, entries, self.alpha)
    }
}

/// The weighted energy inner product on `(U, V)` pairs:
/// `(1/n) sum_g [ Q^{-1} U_a . conj(U_b) + P V_a . conj(V_b) ]`.
pub struct EnergyProduct<'a> {
    pub p: &'a MaterialTensor,
    pub q: &'a MaterialTensor,
}

impl<'a> EnergyProduct<'a> {
    pub fn new(p: &'a MaterialTensor, q: &'a MaterialTensor) -> Self {
        EnergyProduct { p, q }
    }

    pub fn inner(&self, a: &crate::field::FieldPair, b: &crate::field::FieldPair) -> Complex64 {
        let grid = self.q.grid;
        let ua = a.u.values();
        let ub = b.u.values();
        let va = a.v.values();
        let vb = b.v.values();
        let mut acc = Complex64::ZERO;
        for g in 0..grid.len() {
            let qinv_ua = mat_vec(self.q.inv_value_at(g), [ua[0][g], ua[1][g], ua[2][g]]);
            let p_va = mat_vec(self.p.value_at(g), [va[0][g], va[1][g], va[2][g]]);
            for i in 0..3 {
                acc += qinv_ua[i] * ub[i][g].conj() + p_va[i] * vb[i][g].conj();
            }
        }
        acc / grid.len() as f64
    }

    pub fn norm(&self, a: &crate::field::FieldPair) -> f64 {
        self.inner(a, a).re.max(0.0).sqrt()
    }

    /// Apply the metric `(U, V) -> (Q^{-1} U, P V)` in coefficient space.
    pub fn apply_metric(&self, a: &crate::field::FieldPair) -> crate::field::FieldPair {
        crate::field::FieldPair {
            u: self.q.apply_inv_field(&a.u),
            v: self.p.apply_field(&a.v),
        }
    }
}

// -- input schema ------------------------------------------------------------

#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(untagged)]
pub enum MaterialSpec {
    Preset {
        preset: String,
        #[serde(default)]
        params: std::collections::BTreeMap<String, f64>,
    },
    Explicit {
        alpha: f64,
        /// Nine entry coefficient lists in row-major order.
        entries: Vec<Vec<EntryCoeff>>,
    },
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct EntryCoeff {
    pub k: [i64; 3],
    pub re: f64,
    pub im: f64,
}

impl MaterialSpec {
    pub fn build(&self, grid: Grid) -> Result<MaterialTensor> {
        match self {
            MaterialSpec::Preset { preset, params } => {
                let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
                match preset.as_str() {
                    "identity" => Ok(MaterialTensor::scaled_identity(grid, get("scale", 1.0))),
                    "laminate" => MaterialTensor::laminate(grid, get("a", 2.0), get("b", 1.0)),
                    "separable-trig" => {
                        MaterialTensor::separable_trig(grid, get("a", 2.0), get("b", 0.5))
                    }
                    other => Err(Error::Config(format!("unknown material preset '{other}'"))),
                }
            }
            MaterialSpec::Explicit { alpha, entries } => {
                if entries.len() != 9 {
                    return Err(Error::Config(format!(
                        "explicit material needs 9 entry lists, got {}",
                        entries.len()
                    )));
                }
                let mut fields: [[ScalarField; 3]; 3] = std::array::from_fn(|_| {
                    std::array::from_fn(|_| ScalarField::zeros(grid))
                });
                for (n, list) in entries.iter().enumerate() {
                    let (i, j) = (n / 3, n % 3);
                    for t in list {
                        let idx = [
                            grid.index_of_k(0, t.k[0]),
                            grid.index_of_k(1, t.k[1]),
                            grid.index_of_k(2, t.k[2]),
                        ];
                        match (idx[0], idx[1], idx[2]) {
                            (Some(a), Some(b), Some(c)) => {
                                fields[i][j].coeffs[grid.flat([a, b, c])] +=
                                    Complex64::new(t.re, t.im);
                            }
                            _ => {
                                return Err(Error::GridMisaligned(format!(
                                    "material coefficient k={:?} outside grid {:?}",
                                    t.k, grid.dims
                                )))
                            }
                        }
                    }
                }
                MaterialTensor::from_entries(grid, fields, *alpha)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laminate_matches_analytic_values() {
        let grid = Grid::new([8, 1, 1]).unwrap();
        let m = MaterialTensor::laminate(grid, 2.0, 1.0).unwrap();
        for g in 0..grid.len() {
            let y = grid.point(g)[0];
            let expect = 2.0 + (crate::grid::TWO_PI * y).cos();
            assert!((m.value_at(g)[0][0].re - expect).abs() < 1e-12);
            assert!((m.inv_value_at(g)[0][0].re - 1.0 / expect).abs() < 1e-12);
        }
        assert!(m.real);
    }

    #[test]
    fn hermitian_violation_is_rejected() {
        let grid = Grid::new([2, 1, 1]).unwrap();
        let mut entries: [[ScalarField; 3]; 3] = std::array::from_fn(|_| {
            std::array::from_fn(|_| ScalarField::zeros(grid))
        });
        for i in 0..3 {
            entries[i][i].coeffs[0] = Complex64::new(1.0, 0.0);
        }
        entries[0][1].coeffs[0] = Complex64::new(0.5, 0.2);
        entries[1][0].coeffs[0] = Complex64::new(0.5, 0.2); // should be the conjugate
        let err = MaterialTensor::from_entries(grid, entries, 0.1).unwrap_err();
        assert!(matches!(err, Error::NotHermitian { .. }));
    }

    #[test]
    fn ellipticity_violation_is_rejected() {
        let grid = Grid::new([4, 1, 1]).unwrap();
        let err = MaterialTensor::laminate(grid, 1.0, 1.5).unwrap_err();
        assert!(matches!(err, Error::Config(_)));

        // explicit indefinite tensor
        let mut entries: [[ScalarField; 3]; 3] = std::array::from_fn(|_| {
            std::array::from_fn(|_| ScalarField::zeros(grid))
        });
        entries[0][0].coeffs[0] = Complex64::new(-1.0, 0.0);
        entries[1][1].coeffs[0] = Complex64::new(1.0, 0.0);
        entries[2][2].coeffs[0] = Complex64::new(1.0, 0.0);
        let err = MaterialTensor::from_entries(grid, entries, 0.5).unwrap_err();
        assert!(matches!(err, Error::EllipticityViolation { .. }));
    }

    #[test]
    fn min_eig_formula_on_known_matrix() {
        let m: Mat3 = [
            [Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0), Complex64::ZERO],
            [Complex64::new(0.0, -1.0), Complex64::new(2.0, 0.0), Complex64::ZERO],
            [Complex64::ZERO, Complex64::ZERO, Complex64::new(5.0, 0.0)],
        ];
        // eigenvalues of the 2x2 block: 2 +- 1
        assert!((min_eig_hermitian(&m) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn inverse_is_pointwise_inverse() {
        let grid = Grid::new([4, 4, 1]).unwrap();
        let m = MaterialTensor::separable_trig(grid, 2.0, 0.7).unwrap();
        for g in 0..grid.len() {
            let a = m.value_at(g);
            let b = m.inv_value_at(g);
            for i in 0..3 {
                for j in 0..3 {
                    let mut s = Complex64::ZERO;
                    for l in 0..3 {
                        s += a[i][l] * b[l][j];
                    }
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((s - Complex64::new(expect, 0.0)).norm() < 1e-12);
                }
            }
        }
    }
}
