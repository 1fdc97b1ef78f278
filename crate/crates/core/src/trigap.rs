//! Exact algebra for trigonometric polynomials in up to four variables.
//!
//! A [`TrigPoly`] is a finite sum of plane waves `c * exp(i f . z)` with real
//! frequency vectors `f`, the computable stand-in for almost-periodic
//! functions in quadratic mean. Variables are ordered `(s, y1, y2, y3)` for
//! `dim = 4`, `(y1, y2, y3)` for `dim = 3`, and a single variable for
//! `dim = 1`.
//!
//! Frequencies are canonicalized on a `1e-12` grid and stored as integer
//! keys, so all frequency bookkeeping (products, means, quasi-periodic
//! classification) is exact integer arithmetic. Keys within two grid units
//! of the dual lattice `2 pi Z` are snapped onto it, which keeps
//! lattice-periodic frequencies exactly commensurate under repeated
//! products.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients with modulus below this are dropped.
pub const PRUNE_EPS: f64 = 1e-14;
/// Frequencies are canonicalized to multiples of `1e-12`.
pub const KEY_SCALE: f64 = 1e12;
/// `round(2 pi * 1e12)`: the dual-lattice step in key units.
pub const TWO_PI_KEY: i64 = 6_283_185_307_180;
/// Tolerance (in key units) for snapping onto the dual lattice.
const LATTICE_SNAP: i64 = 2;

type Key = [i64; 4];

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Rank {
    Scalar,
    Vector3,
}

/// Finite trigonometric polynomial with scalar or 3-vector coefficients.
#[derive(Clone, Debug)]
pub struct TrigPoly {
    dim: usize,
    rank: Rank,
    // coefficient slots beyond the rank stay zero
    terms: BTreeMap<Key, [Complex64; 3]>,
}

fn key_component(f: f64) -> i64 {
    let mut k = (f * KEY_SCALE).round() as i64;
    // snap onto the 2 pi lattice when within the merge tolerance
    let q = (k as f64 / TWO_PI_KEY as f64).round() as i64;
    let r = k - q * TWO_PI_KEY;
    if r.abs() <= LATTICE_SNAP {
        k = q * TWO_PI_KEY;
    }
    k
}

pub(crate) fn freq_from_key(k: i64) -> f64 {
    k as f64 / KEY_SCALE
}

fn coeff_norm(c: &[Complex64; 3]) -> f64 {
    (c[0].norm_sqr() + c[1].norm_sqr() + c[2].norm_sqr()).sqrt()
}

impl TrigPoly {
    pub fn zero(dim: usize, rank: Rank) -> Self {
        assert!(matches!(dim, 1 | 3 | 4), "TrigPoly dim must be 1, 3 or 4");
        TrigPoly {
            dim,
            rank,
            terms: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    fn key_from_freq(dim: usize, freq: &[f64]) -> Key {
        assert_eq!(freq.len(), dim);
        let mut key = [0i64; 4];
        for (i, &f) in freq.iter().enumerate() {
            key[i] = key_component(f);
        }
        key
    }

    /// Frequency vector of a stored key (length = `dim`).
    pub fn freq_of(key: &Key, dim: usize) -> Vec<f64> {
        key[..dim].iter().map(|&k| freq_from_key(k)).collect()
    }

    pub fn scalar_term(dim: usize, freq: &[f64], c: Complex64) -> Self {
        let mut p = TrigPoly::zero(dim, Rank::Scalar);
        p.add_term_key(Self::key_from_freq(dim, freq), [c, Complex64::ZERO, Complex64::ZERO]);
        p
    }

    pub fn vector_term(dim: usize, freq: &[f64], c: [Complex64; 3]) -> Self {
        let mut p = TrigPoly::zero(dim, Rank::Vector3);
        p.add_term_key(Self::key_from_freq(dim, freq), c);
        p
    }

    pub fn constant_scalar(dim: usize, c: Complex64) -> Self {
        Self::scalar_term(dim, &vec![0.0; dim], c)
    }

    pub fn constant_vector(dim: usize, c: [Complex64; 3]) -> Self {
        Self::vector_term(dim, &vec![0.0; dim], c)
    }

    /// Term at the quasi-periodic frequency `xi + 2 pi k` (spatial axes).
    ///
    /// The key is assembled by integer arithmetic, so class membership of the
    /// resulting term is exact. For `dim = 4` the first component of `freq_s`
    /// carries the fast-time frequency and `k` indexes the spatial lattice.
    pub fn quasi_wave(dim: usize, lambda: f64, xi: &[f64; 3], k: &[i64; 3], c: [Complex64; 3]) -> Self {
        let mut key = [0i64; 4];
        let off = match dim {
            3 => 0,
            4 => {
                key[0] = key_component(lambda);
                1
            }
            _ => panic!("quasi_wave requires dim 3 or 4"),
        };
        for i in 0..3 {
            key[off + i] = key_component(xi[i]) + k[i] * TWO_PI_KEY;
        }
        let mut p = TrigPoly::zero(dim, Rank::Vector3);
        p.add_term_key(key, c);
        p
    }

    fn add_term_key(&mut self, key: Key, c: [Complex64; 3]) {
        let slot = self.terms.entry(key).or_insert([Complex64::ZERO; 3]);
        for i in 0..3 {
            slot[i] += c[i];
        }
        if coeff_norm(slot) < PRUNE_EPS {
            self.terms.remove(&key);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Key, &[Complex64; 3])> {
        self.terms.iter()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "TrigPoly dims {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        if self.rank != other.rank {
            return Err(Error::RankMismatch("add requires equal ranks".into()));
        }
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term_key(*k, *c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, a: Complex64) -> Self {
        let mut out = TrigPoly::zero(self.dim, self.rank);
        for (k, c) in &self.terms {
            out.add_term_key(*k, [c[0] * a, c[1] * a, c[2] * a]);
        }
        out
    }

    /// Complex conjugate: coefficients conjugated, frequencies negated.
    pub fn conj(&self) -> Self {
        let mut out = TrigPoly::zero(self.dim, self.rank);
        for (k, c) in &self.terms {
            let nk = [-k[0], -k[1], -k[2], -k[3]];
            out.add_term_key(nk, [c[0].conj(), c[1].conj(), c[2].conj()]);
        }
        out
    }

    fn convolve<F>(&self, other: &Self, rank: Rank, f: F) -> Self
    where
        F: Fn(&[Complex64; 3], &[Complex64; 3]) -> [Complex64; 3],
    {
        let mut out = TrigPoly::zero(self.dim, rank);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let key = [ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2], ka[3] + kb[3]];
                out.add_term_key(key, f(ca, cb));
            }
        }
        out
    }

    /// Pointwise product; at least one operand must be scalar-valued.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        match (self.rank, other.rank) {
            (Rank::Scalar, r) => Ok(self.convolve(other, r, |a, b| {
                [a[0] * b[0], a[0] * b[1], a[0] * b[2]]
            })),
            (Rank::Vector3, Rank::Scalar) => Ok(other.mul(self)?),
            _ => Err(Error::RankMismatch(
                "product of two vector polynomials needs dot or cross".into(),
            )),
        }
    }

    /// Unconjugated dot product `u . v = sum_j u_j v_j` of two vector polynomials.
    pub fn dot(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        if self.rank != Rank::Vector3 || other.rank != Rank::Vector3 {
            return Err(Error::RankMismatch("dot requires two vector polynomials".into()));
        }
        Ok(self.convolve(other, Rank::Scalar, |a, b| {
            [a[0] * b[0] + a[1] * b[1] + a[2] * b[2], Complex64::ZERO, Complex64::ZERO]
        }))
    }

    pub fn cross(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        if self.rank != Rank::Vector3 || other.rank != Rank::Vector3 {
            return Err(Error::RankMismatch("cross requires two vector polynomials".into()));
        }
        Ok(self.convolve(other, Rank::Vector3, |a, b| {
            [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ]
        }))
    }

    /// Mean value over the selected axes: keeps exactly the terms whose
    /// frequency vanishes on every selected axis.
    pub fn mean(&self, axes: &[usize]) -> Self {
        debug_assert!(!axes.is_empty(), "mean over an empty axis set");
        debug_assert!(axes.iter().all(|&a| a < self.dim));
        let mut out = TrigPoly::zero(self.dim, self.rank);
        'term: for (k, c) in &self.terms {
            for &a in axes {
                if k[a] != 0 {
                    continue 'term;
                }
            }
            out.add_term_key(*k, *c);
        }
        out
    }

    /// Full mean value `M(u)`: the zero-frequency coefficient.
    pub fn mean_full(&self) -> [Complex64; 3] {
        self.terms.get(&[0; 4]).copied().unwrap_or([Complex64::ZERO; 3])
    }

    pub fn mean_full_scalar(&self) -> Complex64 {
        self.mean_full()[0]
    }

    /// Termwise multiplication by `i * f_axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        assert!(axis < self.dim);
        let mut out = TrigPoly::zero(self.dim, self.rank);
        for (k, c) in &self.terms {
            let m = Complex64::new(0.0, freq_from_key(k[axis]));
            out.add_term_key(*k, [c[0] * m, c[1] * m, c[2] * m]);
        }
        out
    }

    /// Divergence of a vector polynomial over the spatial axes.
    ///
    /// For `dim = 3` the spatial axes are `0..3`; for `dim = 4` they are
    /// `1..4` (axis 0 is the fast time).
    pub fn divergence(&self) -> Result<Self> {
        if self.rank != Rank::Vector3 {
            return Err(Error::RankMismatch("divergence requires a vector polynomial".into()));
        }
        let off = match self.dim {
            3 => 0,
            4 => 1,
            _ => return Err(Error::DimensionMismatch("divergence needs dim 3 or 4".into())),
        };
        let mut out = TrigPoly::zero(self.dim, Rank::Scalar);
        for (k, c) in &self.terms {
            let mut s = Complex64::ZERO;
            for j in 0..3 {
                s += Complex64::new(0.0, freq_from_key(k[off + j])) * c[j];
            }
            out.add_term_key(*k, [s, Complex64::ZERO, Complex64::ZERO]);
        }
        Ok(out)
    }

    fn spatial_offset(&self) -> Result<usize> {
        match self.dim {
            3 => Ok(0),
            4 => Ok(1),
            _ => Err(Error::DimensionMismatch(
                "quasi-periodic classification needs dim 3 or 4".into(),
            )),
        }
    }

    /// Gelfand transform `T_xi`: the periodic part of the `xi` class.
    ///
    /// Selects the terms whose spatial frequency is congruent to `xi` modulo
    /// the dual lattice `2 pi Z^3` and shifts them back to lattice
    /// frequencies. Fast-time frequencies (`dim = 4`) pass through.
    pub fn gelfand(&self, xi: &[f64; 3]) -> Result<Self> {
        let off = self.spatial_offset()?;
        check_reduced_zone(xi)?;
        let xi_key = [key_component(xi[0]), key_component(xi[1]), key_component(xi[2])];
        let mut out = TrigPoly::zero(self.dim, self.rank);
        'term: for (k, c) in &self.terms {
            let mut shifted = *k;
            for j in 0..3 {
                let d = k[off + j] - xi_key[j];
                let q = (d as f64 / TWO_PI_KEY as f64).round() as i64;
                if (d - q * TWO_PI_KEY).abs() > 1000 {
                    // more than 1e-9 away from the class: not this fiber
                    continue 'term;
                }
                shifted[off + j] = q * TWO_PI_KEY;
            }
            out.add_term_key(shifted, *c);
        }
        Ok(out)
    }

    /// Multiply by the single wave `exp(i xi . y)` on the spatial axes.
    pub fn shift_by(&self, xi: &[f64; 3]) -> Self {
        let off = self.spatial_offset().expect("shift_by needs dim 3 or 4");
        let xi_key = [key_component(xi[0]), key_component(xi[1]), key_component(xi[2])];
        let mut out = TrigPoly::zero(self.dim, self.rank);
        for (k, c) in &self.terms {
            let mut nk = *k;
            for j in 0..3 {
                nk[off + j] += xi_key[j];
            }
            out.add_term_key(nk, *c);
        }
        out
    }

    /// Distinct reduced-zone classes present among the spatial frequencies.
    pub fn classes(&self) -> Result<Vec<[f64; 3]>> {
        let off = self.spatial_offset()?;
        let mut reps: Vec<[i64; 3]> = Vec::new();
        for (k, _) in &self.terms {
            let mut xi = [0i64; 3];
            for j in 0..3 {
                let q = (k[off + j] as f64 / TWO_PI_KEY as f64).round() as i64;
                xi[j] = k[off + j] - q * TWO_PI_KEY;
            }
            if !reps.iter().any(|r| {
                (0..3).all(|j| (r[j] - xi[j]).abs() <= 2 * LATTICE_SNAP)
            }) {
                reps.push(xi);
            }
        }
        Ok(reps
            .into_iter()
            .map(|r| [freq_from_key(r[0]), freq_from_key(r[1]), freq_from_key(r[2])])
            .collect())
    }

    /// Besicovitch inner product with weight exponent `m`.
    ///
    /// `w_0 = 1`; `w_m(f) = (1 + |f|)^{2m}` for `m > 0`; `|f|^{2m}` for
    /// `m < 0` with the zero-frequency term excluded.
    pub fn besicovitch_inner(&self, other: &Self, m: i32) -> Result<Complex64> {
        self.check_compatible(other)?;
        if self.rank != other.rank {
            return Err(Error::RankMismatch("inner product requires equal ranks".into()));
        }
        let mut acc = Complex64::ZERO;
        for (k, a) in &self.terms {
            if let Some(b) = other.terms.get(k) {
                let mut dot = Complex64::ZERO;
                for i in 0..3 {
                    dot += a[i] * b[i].conj();
                }
                let w = if m == 0 {
                    1.0
                } else {
                    let norm = k[..self.dim]
                        .iter()
                        .map(|&ki| freq_from_key(ki).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    if m > 0 {
                        (1.0 + norm).powi(2 * m)
                    } else {
                        if norm == 0.0 {
                            continue;
                        }
                        norm.powi(2 * m)
                    }
                };
                acc += dot * w;
            }
        }
        Ok(acc)
    }

    pub fn norm_b2(&self) -> f64 {
        self.terms.values().map(|c| coeff_norm(c).powi(2)).sum::<f64>().sqrt()
    }

    /// Evaluate at a point (length `dim`).
    pub fn eval(&self, z: &[f64]) -> [Complex64; 3] {
        let mut acc = [Complex64::ZERO; 3];
        for (k, c) in &self.terms {
            let mut phase = 0.0;
            for j in 0..self.dim {
                phase += freq_from_key(k[j]) * z[j];
            }
            let w = Complex64::new(0.0, phase).exp();
            for i in 0..3 {
                acc[i] += c[i] * w;
            }
        }
        acc
    }

    /// Coefficient comparison up to key tolerance (a few canonicalization
    /// grid units) and `tol` on coefficients.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.dim != other.dim || self.rank != other.rank {
            return false;
        }
        let close = |a: &Key, b: &Key| (0..4).all(|i| (a[i] - b[i]).abs() <= 2 * LATTICE_SNAP);
        let covered = |p: &Self, q: &Self| {
            p.terms.iter().all(|(k, c)| {
                let mut matched = q.terms.get(k).copied();
                if matched.is_none() {
                    matched = q
                        .terms
                        .iter()
                        .find(|(kq, _)| close(k, kq))
                        .map(|(_, cq)| *cq);
                }
                match matched {
                    Some(cq) => {
                        let d = [c[0] - cq[0], c[1] - cq[1], c[2] - cq[2]];
                        coeff_norm(&d) <= tol
                    }
                    None => coeff_norm(c) <= tol,
                }
            })
        };
        covered(self, other) && covered(other, self)
    }

    /// Apply a 3x3 matrix of scalar polynomials to a vector polynomial.
    pub fn apply_matrix(rows: &[[TrigPoly; 3]; 3], v: &TrigPoly) -> Result<TrigPoly> {
        if v.rank != Rank::Vector3 {
            return Err(Error::RankMismatch("apply_matrix requires a vector operand".into()));
        }
        let mut out = TrigPoly::zero(v.dim, Rank::Vector3);
        for (i, row) in rows.iter().enumerate() {
            for (j, entry) in row.iter().enumerate() {
                if entry.is_zero() {
                    continue;
                }
                let vj = v.component(j);
                let prod = entry.mul(&vj)?;
                for (k, c) in &prod.terms {
                    let mut add = [Complex64::ZERO; 3];
                    add[i] = c[0];
                    out.add_term_key(*k, add);
                }
            }
        }
        Ok(out)
    }

    /// Extract one component of a vector polynomial as a scalar polynomial.
    pub fn component(&self, i: usize) -> TrigPoly {
        let mut out = TrigPoly::zero(self.dim, Rank::Scalar);
        for (k, c) in &self.terms {
            out.add_term_key(*k, [c[i], Complex64::ZERO, Complex64::ZERO]);
        }
        out
    }

    /// Assemble a vector polynomial from three scalar components.
    pub fn from_components(comps: [&TrigPoly; 3]) -> Result<TrigPoly> {
        let dim = comps[0].dim;
        let mut out = TrigPoly::zero(dim, Rank::Vector3);
        for (i, p) in comps.iter().enumerate() {
            if p.dim != dim {
                return Err(Error::DimensionMismatch("components with mixed dims".into()));
            }
            for (k, c) in &p.terms {
                let mut add = [Complex64::ZERO; 3];
                add[i] = c[0];
                out.add_term_key(*k, add);
            }
        }
        Ok(out)
    }
}

pub fn check_reduced_zone(xi: &[f64; 3]) -> Result<()> {
    if xi.iter().any(|&x| x.abs() > PI + 1e-9) {
        return Err(Error::OutsideReducedZone { xi: *xi });
    }
    Ok(())
}

// -- serialization ----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TermJson {
    frequency: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TrigPolyJson {
    dim: usize,
    rank: Rank,
    terms: Vec<TermJson>,
}

impl Serialize for TrigPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = if self.rank == Rank::Scalar { 1 } else { 3 };
        let terms = self
            .terms
            .iter()
            .map(|(k, c)| TermJson {
                frequency: Self::freq_of(k, self.dim),
                re: c[..n].iter().map(|z| z.re).collect(),
                im: c[..n].iter().map(|z| z.im).collect(),
            })
            .collect();
        TrigPolyJson {
            dim: self.dim,
            rank: self.rank,
            terms,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TrigPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = TrigPolyJson::deserialize(d)?;
        let mut p = TrigPoly::zero(raw.dim, raw.rank);
        for t in raw.terms {
            if t.frequency.len() != raw.dim || t.re.len() != t.im.len() {
                return Err(serde::de::Error::custom("malformed TrigPoly term"));
            }
            let mut c = [Complex64::ZERO; 3];
            for i in 0..t.re.len().min(3) {
                c[i] = Complex64::new(t.re[i], t.im[i]);
            }
            p.add_term_key(Self::key_from_freq(raw.dim, &t.frequency), c);
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const TWO_PI: f64 = 2.0 * PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn wave1(f: f64) -> TrigPoly {
        TrigPoly::scalar_term(3, &[f, 0.0, 0.0], c(1.0, 0.0))
    }

    #[test]
    fn product_conjugate_pair_is_constant() {
        let u = wave1(1.0);
        let v = wave1(-1.0);
        let p = u.mul(&v).unwrap();
        assert_eq!(p.num_terms(), 1);
        assert!((p.mean_full_scalar() - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn product_single_terms() {
        let u = TrigPoly::scalar_term(3, &[1.0, 0.0, 0.0], c(2.0, 0.0));
        let v = TrigPoly::scalar_term(3, &[0.0, 1.0, 0.0], c(3.0, 0.0));
        let p = u.mul(&v).unwrap();
        assert_eq!(p.num_terms(), 1);
        let (k, coeff) = p.terms().next().unwrap();
        assert_eq!(TrigPoly::freq_of(k, 3), vec![1.0, 1.0, 0.0]);
        assert!((coeff[0] - c(6.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn square_of_cosine_pair() {
        // (e^{iy1} + e^{-iy1})^2 = e^{2iy1} + 2 + e^{-2iy1}; oracle: brute-force convolution
        let u = wave1(1.0).add(&wave1(-1.0)).unwrap();
        let p = u.mul(&u).unwrap();
        let mut expected = TrigPoly::scalar_term(3, &[2.0, 0.0, 0.0], c(1.0, 0.0));
        expected = expected.add(&TrigPoly::constant_scalar(3, c(2.0, 0.0))).unwrap();
        expected = expected
            .add(&TrigPoly::scalar_term(3, &[-2.0, 0.0, 0.0], c(1.0, 0.0)))
            .unwrap();
        assert!(p.approx_eq(&expected, 1e-13));
    }

    #[test]
    fn mean_values() {
        // M(e^{i y.xi}) = 0 for xi != 0
        let u = TrigPoly::scalar_term(3, &[0.3, 0.0, 0.0], c(1.0, 0.0));
        assert!(u.mean(&[0, 1, 2]).is_zero());

        // M(3 + e^{iy1}) = 3
        let u = TrigPoly::constant_scalar(3, c(3.0, 0.0)).add(&wave1(1.0)).unwrap();
        let m = u.mean(&[0, 1, 2]);
        assert!((m.mean_full_scalar() - c(3.0, 0.0)).norm() < 1e-15);

        // M_s(e^{i(2s + y1)} + 5 e^{i y2}) = 5 e^{i y2}
        let a = TrigPoly::scalar_term(4, &[2.0, 1.0, 0.0, 0.0], c(1.0, 0.0));
        let b = TrigPoly::scalar_term(4, &[0.0, 0.0, 1.0, 0.0], c(5.0, 0.0));
        let u = a.add(&b).unwrap();
        let ms = u.mean(&[0]);
        assert!(ms.approx_eq(&b, 1e-14));
    }

    #[test]
    fn derivatives() {
        let u = wave1(1.0);
        let d = u.derivative(0);
        assert!((d.terms().next().unwrap().1[0] - c(0.0, 1.0)).norm() < 1e-15);

        assert!(TrigPoly::constant_scalar(3, c(4.0, 0.0)).derivative(1).is_zero());

        // d/dy1 (e^{i(y1+y2)} + e^{2i y1}) = i e^{i(y1+y2)} + 2i e^{2i y1}
        let u = TrigPoly::scalar_term(3, &[1.0, 1.0, 0.0], c(1.0, 0.0))
            .add(&TrigPoly::scalar_term(3, &[2.0, 0.0, 0.0], c(1.0, 0.0)))
            .unwrap();
        let d = u.derivative(0);
        let expected = TrigPoly::scalar_term(3, &[1.0, 1.0, 0.0], c(0.0, 1.0))
            .add(&TrigPoly::scalar_term(3, &[2.0, 0.0, 0.0], c(0.0, 2.0)))
            .unwrap();
        assert!(d.approx_eq(&expected, 1e-13));
    }

    #[test]
    fn gelfand_classification() {
        // T_0(3 + e^{i 2 pi y1}) keeps everything
        let u = TrigPoly::constant_scalar(3, c(3.0, 0.0))
            .add(&wave1(TWO_PI))
            .unwrap();
        let t = u.gelfand(&[0.0, 0.0, 0.0]).unwrap();
        assert!(t.approx_eq(&u, 1e-14));

        // single quasi-periodic term shifts back to the lattice
        let u = TrigPoly::scalar_term(3, &[0.3 + TWO_PI, 0.0, 0.0], c(1.0, 0.0));
        let t = u.gelfand(&[0.3, 0.0, 0.0]).unwrap();
        let expected = wave1(TWO_PI);
        assert!(t.approx_eq(&expected, 1e-14));

        // mixed classes: only the 0.3 class survives
        let u = wave1(0.3)
            .add(&wave1(0.3 + TWO_PI))
            .unwrap()
            .add(&TrigPoly::scalar_term(3, &[0.0, 1.0, 0.0], c(1.0, 0.0)))
            .unwrap();
        let t = u.gelfand(&[0.3, 0.0, 0.0]).unwrap();
        let expected = TrigPoly::constant_scalar(3, c(1.0, 0.0)).add(&wave1(TWO_PI)).unwrap();
        assert!(t.approx_eq(&expected, 1e-14));

        assert!(u.gelfand(&[4.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn besicovitch_weights() {
        let u = wave1(1.0);
        let v = TrigPoly::scalar_term(3, &[0.0, 1.0, 0.0], c(1.0, 0.0));
        assert!(u.besicovitch_inner(&v, 0).unwrap().norm() < 1e-15);

        let u2 = wave1(1.0).scale(c(2.0, 0.0));
        let ip = u2.besicovitch_inner(&u2, 0).unwrap();
        assert!((ip - c(4.0, 0.0)).norm() < 1e-15);

        // weight (1 + |f|)^2 with |f| = 1
        let ip = u.besicovitch_inner(&u, 1).unwrap();
        assert!((ip - c(4.0, 0.0)).norm() < 1e-12);

        // m < 0 excludes the mean
        let w = TrigPoly::constant_scalar(3, c(5.0, 0.0)).add(&wave1(2.0)).unwrap();
        let ip = w.besicovitch_inner(&w, -1).unwrap();
        assert!((ip - c(0.25, 0.0)).norm() < 1e-12);
    }

    fn random_poly(rng: &mut ChaCha8Rng, dim: usize, lattice_only: bool) -> TrigPoly {
        // frequencies from a commensurate family: quasimomenta in (pi/2) Z^3
        // on top of the 2 pi lattice, assembled with exact key arithmetic
        let mut p = TrigPoly::zero(dim, Rank::Scalar);
        let nterms = rng.gen_range(1..6);
        for _ in 0..nterms {
            let mut f = vec![0.0; dim];
            let off = if dim == 4 { 1 } else { 0 };
            if dim == 4 {
                f[0] = rng.gen_range(-2..3) as f64 * 0.7;
            }
            for j in 0..3.min(dim) {
                f[off + j] = rng.gen_range(-2..3) as f64 * TWO_PI;
            }
            let coeff = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let mut term = TrigPoly::scalar_term(dim, &f, coeff);
            if !lattice_only && dim >= 3 {
                let xi = [
                    rng.gen_range(-1..2) as f64 * (PI / 2.0),
                    rng.gen_range(-1..2) as f64 * (PI / 2.0),
                    rng.gen_range(-1..2) as f64 * (PI / 2.0),
                ];
                term = term.shift_by(&xi);
            }
            p = p.add(&term).unwrap();
        }
        p
    }

    #[test]
    fn identity_comtp_gelfand_commutes_with_periodic_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let u = random_poly(&mut rng, 3, false);
            let v = random_poly(&mut rng, 3, true);
            for xi in u.classes().unwrap() {
                let lhs = u.mul(&v).unwrap().gelfand(&xi).unwrap();
                let rhs = u.gelfand(&xi).unwrap().mul(&v).unwrap();
                assert!(lhs.approx_eq(&rhs, 1e-12), "comtp failed at xi={xi:?}");
            }
        }
    }

    #[test]
    fn identity_compde_gelfand_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let u = random_poly(&mut rng, 3, false);
            for xi in u.classes().unwrap() {
                for j in 0..3 {
                    let lhs = u.derivative(j).gelfand(&xi).unwrap();
                    let t = u.gelfand(&xi).unwrap();
                    let rhs = t.scale(c(0.0, xi[j])).add(&t.derivative(j)).unwrap();
                    assert!(lhs.approx_eq(&rhs, 1e-12), "compde failed at xi={xi:?} axis {j}");
                }
            }
        }
    }

    #[test]
    fn identity_desob_class_sum_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let u = random_poly(&mut rng, 3, false);
            let mut sum = TrigPoly::zero(3, Rank::Scalar);
            for xi in u.classes().unwrap() {
                let part = u.gelfand(&xi).unwrap().shift_by(&xi);
                sum = sum.add(&part).unwrap();
            }
            assert!(sum.approx_eq(&u, 1e-12));
        }
    }

    #[test]
    fn parseval_mean_of_product_matches_inner() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let u = random_poly(&mut rng, 3, false);
            let ip = u.besicovitch_inner(&u, 0).unwrap();
            let mean = u.mul(&u.conj()).unwrap().mean(&[0, 1, 2]).mean_full_scalar();
            assert!((ip - mean).norm() < 1e-12);
            assert!((ip.re - u.norm_b2().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn product_rule_for_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let u = random_poly(&mut rng, 3, false);
            let v = random_poly(&mut rng, 3, false);
            for j in 0..3 {
                let lhs = u.mul(&v).unwrap().derivative(j);
                let rhs = u.derivative(j).mul(&v).unwrap().add(&u.mul(&v.derivative(j)).unwrap()).unwrap();
                assert!(lhs.approx_eq(&rhs, 1e-11));
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let u = TrigPoly::vector_term(3, &[0.3, TWO_PI, 0.0], [c(1.0, -2.0), c(0.5, 0.0), c(0.0, 0.0)]);
        let s = serde_json::to_string(&u).unwrap();
        let v: TrigPoly = serde_json::from_str(&s).unwrap();
        assert!(u.approx_eq(&v, 1e-13));
    }

    #[test]
    fn prune_threshold_drops_dust() {
        let u = TrigPoly::scalar_term(3, &[1.0, 0.0, 0.0], c(1e-15, 0.0));
        assert!(u.is_zero());
    }
}
