//! Periodic fields on the unit cell, stored as plane-wave coefficients.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, TWO_PI};
use crate::trigap::{Rank, TrigPoly};

/// Scalar periodic field in coefficient representation.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Grid,
    pub coeffs: Vec<Complex64>,
}

/// Complex 3-vector periodic field in coefficient representation.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub grid: Grid,
    pub comp: [Vec<Complex64>; 3],
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            coeffs: vec![Complex64::ZERO; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: &[Complex64]) -> Self {
        ScalarField {
            grid,
            coeffs: grid.coeffs_of(values),
        }
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.grid.values_of(&self.coeffs)
    }

    pub fn mean(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn set_mean_zero(&mut self) {
        self.coeffs[0] = Complex64::ZERO;
    }

    /// Spectral gradient (multiplication by `2 pi i k`).
    pub fn gradient(&self) -> VectorField {
        let mut out = VectorField::zeros(self.grid);
        for (flat, k) in self.grid.iter_k() {
            let c = self.coeffs[flat];
            for j in 0..3 {
                out.comp[j][flat] = Complex64::new(0.0, TWO_PI * k[j] as f64) * c;
            }
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        VectorField {
            grid,
            comp: [
                vec![Complex64::ZERO; n],
                vec![Complex64::ZERO; n],
                vec![Complex64::ZERO; n],
            ],
        }
    }

    pub fn from_values(grid: Grid, values: &[Vec<Complex64>; 3]) -> Self {
        VectorField {
            grid,
            comp: [
                grid.coeffs_of(&values[0]),
                grid.coeffs_of(&values[1]),
                grid.coeffs_of(&values[2]),
            ],
        }
    }

    pub fn values(&self) -> [Vec<Complex64>; 3] {
        [
            self.grid.values_of(&self.comp[0]),
            self.grid.values_of(&self.comp[1]),
            self.grid.values_of(&self.comp[2]),
        ]
    }

    pub fn constant(grid: Grid, v: [Complex64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..3 {
            out.comp[j][0] = v[j];
        }
        out
    }

    pub fn mean(&self) -> [Complex64; 3] {
        [self.comp[0][0], self.comp[1][0], self.comp[2][0]]
    }

    /// Shifted curl: multiplication by `i (xi + 2 pi k) x`.
    pub fn curl_shifted(&self, xi: [f64; 3]) -> VectorField {
        let mut out = VectorField::zeros(self.grid);
        for (flat, k) in self.grid.iter_k() {
            let a = [
                xi[0] + TWO_PI * k[0] as f64,
                xi[1] + TWO_PI * k[1] as f64,
                xi[2] + TWO_PI * k[2] as f64,
            ];
            let v = [self.comp[0][flat], self.comp[1][flat], self.comp[2][flat]];
            let i = Complex64::new(0.0, 1.0);
            out.comp[0][flat] = i * (a[1] * v[2] - a[2] * v[1]);
            out.comp[1][flat] = i * (a[2] * v[0] - a[0] * v[2]);
            out.comp[2][flat] = i * (a[0] * v[1] - a[1] * v[0]);
        }
        out
    }

    pub fn curl(&self) -> VectorField {
        self.curl_shifted([0.0; 3])
    }

    /// Shifted divergence: `i (xi + 2 pi k) . v`.
    pub fn div_shifted(&self, xi: [f64; 3]) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid);
        for (flat, k) in self.grid.iter_k() {
            let mut s = Complex64::ZERO;
            for j in 0..3 {
                let a = xi[j] + TWO_PI * k[j] as f64;
                s += Complex64::new(0.0, a) * self.comp[j][flat];
            }
            out.coeffs[flat] = s;
        }
        out
    }

    pub fn divergence(&self) -> ScalarField {
        self.div_shifted([0.0; 3])
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for j in 0..3 {
            for (a, b) in out.comp[j].iter_mut().zip(&other.comp[j]) {
                *a += b;
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for j in 0..3 {
            for (a, b) in out.comp[j].iter_mut().zip(&other.comp[j]) {
                *a -= b;
            }
        }
        out
    }

    pub fn scale(&self, a: Complex64) -> Self {
        let mut out = self.clone();
        for j in 0..3 {
            for c in out.comp[j].iter_mut() {
                *c *= a;
            }
        }
        out
    }

    pub fn axpy(&mut self, a: Complex64, other: &Self) {
        for j in 0..3 {
            for (x, y) in self.comp[j].iter_mut().zip(&other.comp[j]) {
                *x += a * y;
            }
        }
    }

    /// Plain (unweighted) L2 inner product via Parseval.
    pub fn inner(&self, other: &Self) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for j in 0..3 {
            for (a, b) in self.comp[j].iter().zip(&other.comp[j]) {
                acc += a * b.conj();
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    /// Coefficient map of the complex conjugate field (`k -> -k mod grid`).
    pub fn conj_field(&self) -> Self {
        let mut out = Self::zeros(self.grid);
        for (flat, k) in self.grid.iter_k() {
            let neg = [
                self.grid.index_of_k_mod(0, -k[0]),
                self.grid.index_of_k_mod(1, -k[1]),
                self.grid.index_of_k_mod(2, -k[2]),
            ];
            let nf = self.grid.flat(neg);
            for j in 0..3 {
                out.comp[j][nf] = self.comp[j][flat].conj();
            }
        }
        out
    }

    /// Interpolating trigonometric polynomial (frequencies `2 pi k`).
    pub fn to_trig(&self) -> TrigPoly {
        let mut p = TrigPoly::zero(3, Rank::Vector3);
        for (flat, k) in self.grid.iter_k() {
            let c = [self.comp[0][flat], self.comp[1][flat], self.comp[2][flat]];
            if c.iter().all(|z| z.norm() < 1e-300) {
                continue;
            }
            p = p
                .add(&TrigPoly::quasi_wave(3, 0.0, &[0.0; 3], &[k[0], k[1], k[2]], c))
                .unwrap();
        }
        p
    }
}

/// Sample a lattice-periodic vector polynomial onto a grid.
///
/// Every frequency must be `2 pi k` with `k` inside the grid's lattice.
pub fn vector_trig_to_field(p: &TrigPoly, grid: Grid) -> Result<VectorField> {
    if p.rank() != Rank::Vector3 || p.dim() != 3 {
        return Err(Error::RankMismatch(
            "expected a 3-variable vector polynomial".into(),
        ));
    }
    let mut out = VectorField::zeros(grid);
    for (key, c) in p.terms() {
        let mut idx = [0usize; 3];
        for j in 0..3 {
            let f = crate::trigap::freq_from_key(key[j]);
            let k = (f / TWO_PI).round() as i64;
            if (f - TWO_PI * k as f64).abs() > 1e-9 {
                return Err(Error::OffLattice {
                    freq: [
                        crate::trigap::freq_from_key(key[0]),
                        crate::trigap::freq_from_key(key[1]),
                        crate::trigap::freq_from_key(key[2]),
                    ],
                    tol: 1e-9,
                });
            }
            idx[j] = grid.index_of_k(j, k).ok_or_else(|| {
                Error::GridMisaligned(format!(
                    "lattice frequency k={k} exceeds grid axis {j} of size {}",
                    grid.dims[j]
                ))
            })?;
        }
        let flat = grid.flat(idx);
        for j in 0..3 {
            out.comp[j][flat] += c[j];
        }
    }
    Ok(out)
}

/// A `(U, V)` pair of vector fields, the state of one Bloch fiber.
#[derive(Clone, Debug)]
pub struct FieldPair {
    pub u: VectorField,
    pub v: VectorField,
}

impl FieldPair {
    pub fn zeros(grid: Grid) -> Self {
        FieldPair {
            u: VectorField::zeros(grid),
            v: VectorField::zeros(grid),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        FieldPair {
            u: self.u.add(&other.u),
            v: self.v.add(&other.v),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        FieldPair {
            u: self.u.sub(&other.u),
            v: self.v.sub(&other.v),
        }
    }

    pub fn scale(&self, a: Complex64) -> Self {
        FieldPair {
            u: self.u.scale(a),
            v: self.v.scale(a),
        }
    }
}

/// Serialized form of a vector field: dims plus packed coefficients.
#[derive(Serialize, Deserialize)]
pub struct VectorFieldJson {
    pub dims: [usize; 3],
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&VectorField> for VectorFieldJson {
    fn from(f: &VectorField) -> Self {
        VectorFieldJson {
            dims: f.grid.dims,
            re: f.comp.iter().map(|c| c.iter().map(|z| z.re).collect()).collect(),
            im: f.comp.iter().map(|c| c.iter().map(|z| z.im).collect()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn div_of_curl_vanishes_exactly() {
        let grid = Grid::new([4, 4, 4]).unwrap();
        let mut f = VectorField::zeros(grid);
        for (flat, _) in grid.iter_k() {
            for j in 0..3 {
                f.comp[j][flat] = Complex64::new((flat % 7) as f64 - 3.0, (flat % 3) as f64);
            }
        }
        let xi = [0.4, -0.2, 1.0];
        let d = f.curl_shifted(xi).div_shifted(xi);
        assert!(d.norm() < 1e-12);
    }

    #[test]
    fn gradient_has_zero_curl() {
        let grid = Grid::new([4, 4, 2]).unwrap();
        let mut s = ScalarField::zeros(grid);
        for (flat, _) in grid.iter_k() {
            s.coeffs[flat] = Complex64::new(flat as f64 * 0.1, -(flat as f64) * 0.05);
        }
        let c = s.gradient().curl();
        assert!(c.comp.iter().all(|cc| cc.iter().all(|z| z.norm() < 1e-10)));
    }

    #[test]
    fn conj_field_matches_pointwise_conjugate() {
        let grid = Grid::new([4, 1, 1]).unwrap();
        let mut f = VectorField::zeros(grid);
        for (flat, _) in grid.iter_k() {
            f.comp[0][flat] = Complex64::new(flat as f64, 1.0 - flat as f64);
        }
        let g = f.conj_field();
        let fv = f.values();
        let gv = g.values();
        for i in 0..grid.len() {
            assert!((gv[0][i] - fv[0][i].conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn trig_sampling_round_trip() {
        let grid = Grid::new([8, 1, 1]).unwrap();
        let p = TrigPoly::quasi_wave(
            3,
            0.0,
            &[0.0; 3],
            &[2, 0, 0],
            [Complex64::new(1.0, 0.5), Complex64::ZERO, Complex64::ZERO],
        );
        let f = vector_trig_to_field(&p, grid).unwrap();
        let back = f.to_trig();
        assert!(p.approx_eq(&back, 1e-13));
    }
}
