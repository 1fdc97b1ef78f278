//! Spectral grids on the unit torus.
//!
//! A grid stores `dims = [d0, d1, d2]` points per axis (each axis either even
//! or the degenerate size 1) with C-order flat layout, axis 2 contiguous.
//! Plane-wave coefficients live on the integer lattice `k_i` in
//! `{-d_i/2, ..., d_i/2 - 1}` with physical frequency `2 pi k`. Fields are
//! `u(y) = sum_k c(k) exp(2 pi i k . y)`, and the forward transform divides
//! by the point count so `c(0)` is the mean.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

fn plan(len: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry((len, dir == FftDirection::Forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            planner.plan_fft(len, dir)
        })
        .clone()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Grid {
    pub dims: [usize; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3]) -> Result<Self> {
        for &d in &dims {
            if d == 0 || (d > 1 && d % 2 != 0) {
                return Err(Error::Config(format!(
                    "grid axis sizes must be even (or 1 for a constant axis), got {dims:?}"
                )));
            }
        }
        Ok(Grid { dims })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn flat(&self, i: [usize; 3]) -> usize {
        (i[0] * self.dims[1] + i[1]) * self.dims[2] + i[2]
    }

    /// Signed lattice index along one axis from the storage index.
    #[inline]
    pub fn k_of_index(&self, axis: usize, i: usize) -> i64 {
        let d = self.dims[axis];
        if d == 1 {
            return 0;
        }
        if i < d / 2 {
            i as i64
        } else {
            i as i64 - d as i64
        }
    }

    /// Storage index of a signed lattice index (must be in range).
    #[inline]
    pub fn index_of_k(&self, axis: usize, k: i64) -> Option<usize> {
        let d = self.dims[axis] as i64;
        if d == 1 {
            return if k == 0 { Some(0) } else { None };
        }
        if k >= -d / 2 && k < d / 2 {
            Some(k.rem_euclid(d) as usize)
        } else {
            None
        }
    }

    /// Storage index with wrap-around (aliasing onto the grid).
    #[inline]
    pub fn index_of_k_mod(&self, axis: usize, k: i64) -> usize {
        k.rem_euclid(self.dims[axis] as i64) as usize
    }

    /// Iterate `(flat, [k0,k1,k2])` over the whole lattice.
    pub fn iter_k(&self) -> impl Iterator<Item = (usize, [i64; 3])> + '_ {
        let [d0, d1, d2] = self.dims;
        (0..d0).flat_map(move |i0| {
            (0..d1).flat_map(move |i1| {
                (0..d2).map(move |i2| {
                    (
                        self.flat([i0, i1, i2]),
                        [
                            self.k_of_index(0, i0),
                            self.k_of_index(1, i1),
                            self.k_of_index(2, i2),
                        ],
                    )
                })
            })
        })
    }

    /// Grid point coordinates `y = i / d` of a flat index.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let [_, d1, d2] = self.dims;
        let i2 = flat % d2;
        let i1 = (flat / d2) % d1;
        let i0 = flat / (d1 * d2);
        [
            i0 as f64 / self.dims[0] as f64,
            i1 as f64 / self.dims[1] as f64,
            i2 as f64 / self.dims[2] as f64,
        ]
    }

    fn fft_axis(&self, data: &mut [Complex64], axis: usize, dir: FftDirection) {
        let d = self.dims[axis];
        if d == 1 {
            return;
        }
        let fft = plan(d, dir);
        match axis {
            2 => {
                for row in data.chunks_exact_mut(d) {
                    fft.process(row);
                }
            }
            _ => {
                let [d0, d1, d2] = self.dims;
                let (outer, stride, inner) = if axis == 1 {
                    (d0, d2, d1)
                } else {
                    (1, d1 * d2, d0)
                };
                let block = stride * inner;
                let mut line = vec![Complex64::ZERO; inner];
                for o in 0..outer {
                    for s in 0..stride {
                        let base = o * block + s;
                        for j in 0..inner {
                            line[j] = data[base + j * stride];
                        }
                        fft.process(&mut line);
                        for j in 0..inner {
                            data[base + j * stride] = line[j];
                        }
                    }
                }
            }
        }
    }

    /// In-place values -> coefficients (includes the 1/n normalization).
    pub fn forward(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        for axis in 0..3 {
            self.fft_axis(data, axis, FftDirection::Forward);
        }
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// In-place coefficients -> values.
    pub fn inverse(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        for axis in 0..3 {
            self.fft_axis(data, axis, FftDirection::Inverse);
        }
    }

    pub fn values_of(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut v = coeffs.to_vec();
        self.inverse(&mut v);
        v
    }

    pub fn coeffs_of(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut v = values.to_vec();
        self.forward(&mut v);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_round_trip() {
        let g = Grid::new([4, 2, 6]).unwrap();
        let vals: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new(i as f64 * 0.3 - 1.0, (i % 5) as f64))
            .collect();
        let coeffs = g.coeffs_of(&vals);
        let back = g.values_of(&coeffs);
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_wave_has_single_coefficient() {
        let g = Grid::new([8, 1, 1]).unwrap();
        let vals: Vec<Complex64> = (0..8)
            .map(|i| Complex64::new(0.0, TWO_PI * 3.0 * i as f64 / 8.0).exp())
            .collect();
        let coeffs = g.coeffs_of(&vals);
        for (flat, k) in g.iter_k() {
            let expect = if k[0] == 3 { 1.0 } else { 0.0 };
            assert!((coeffs[flat].norm() - expect).abs() < 1e-12, "k={k:?}");
        }
    }

    #[test]
    fn degenerate_axes_pass_through() {
        let g = Grid::new([1, 1, 1]).unwrap();
        let coeffs = g.coeffs_of(&[Complex64::new(2.0, 1.0)]);
        assert!((coeffs[0] - Complex64::new(2.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn nyquist_index_maps_to_negative_k() {
        let g = Grid::new([8, 1, 1]).unwrap();
        assert_eq!(g.k_of_index(0, 4), -4);
        assert_eq!(g.index_of_k(0, -4), Some(4));
        assert_eq!(g.index_of_k(0, 4), None);
        assert_eq!(g.index_of_k(0, 3), Some(3));
    }
}
