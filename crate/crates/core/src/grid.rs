//! Discrete geometry of the waveguide supercell.
//!
//! The `m` Euclidean directions are modelled by a box of side `2πL`, the `n`
//! periodic directions by the unit torus `[0, 2π)`. Every axis carries an even
//! number of points; the frequency lattice is `(1/L)Z` along Euclidean axes and
//! `Z` along periodic ones.
//!
//! Normalisation (used everywhere in the crate):
//!
//! * physical samples `f(z_j)` and spectral coefficients `F(ξ)` are related by
//!   `f(z) = Σ_ξ F(ξ) e^{iξ·z}`, so `F` are Fourier-series coefficients and the
//!   forward transform carries the factor `1 / #points` (equivalently
//!   `1 / volume` against the quadrature weight `dV = volume / #points`);
//! * Parseval reads `Σ_j |f(z_j)|² dV = volume · Σ_ξ |F(ξ)|²`.
//!
//! Along each axis the DFT index `i` maps to the integer wavenumber `i` when
//! `i < N/2` and `i - N` otherwise, so the Nyquist mode sits on the negative side.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Supercell grid for `R^m x T^n`.
pub struct WaveguideGrid {
    m: usize,
    n: usize,
    supercell: usize,
    points: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
    /// Signed integer wavenumber per axis and DFT index.
    wavenumbers: Vec<Vec<i64>>,
    /// `L² |ξ|²`, an integer on the lattice.
    scaled_xi2: Vec<u64>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl WaveguideGrid {
    /// Builds a grid with `m` Euclidean and `n` periodic directions.
    ///
    /// `points` lists the number of samples per axis, Euclidean axes first.
    pub fn new(m: usize, n: usize, supercell: usize, points: &[usize]) -> Result<Arc<Self>> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidGrid(format!(
                "need m >= 1 and n >= 1, got m = {m}, n = {n}"
            )));
        }
        if supercell == 0 {
            return Err(Error::InvalidGrid("supercell multiplier L must be >= 1".into()));
        }
        if points.len() != m + n {
            return Err(Error::InvalidGrid(format!(
                "expected {} point counts, got {}",
                m + n,
                points.len()
            )));
        }
        if let Some((axis, &p)) = points
            .iter()
            .enumerate()
            .find(|(_, &p)| p < 4 || p % 2 != 0)
        {
            return Err(Error::InvalidGrid(format!(
                "axis {axis} has {p} points; every axis needs an even count >= 4"
            )));
        }

        let d = m + n;
        let mut strides = vec![1usize; d];
        for a in (0..d.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * points[a + 1];
        }
        let total = points.iter().product();

        let wavenumbers: Vec<Vec<i64>> = points
            .iter()
            .map(|&p| {
                let p = p as i64;
                (0..p).map(|i| if i < p / 2 { i } else { i - p }).collect()
            })
            .collect();

        let l2 = (supercell * supercell) as u64;
        let mut scaled_xi2 = vec![0u64; total];
        for (idx, slot) in scaled_xi2.iter_mut().enumerate() {
            let mut acc = 0u64;
            let mut rem = idx;
            for a in (0..d).rev() {
                let i = rem % points[a];
                rem /= points[a];
                let k = wavenumbers[a][i];
                let k2 = (k * k) as u64;
                acc += if a < m { k2 } else { l2 * k2 };
            }
            *slot = acc;
        }

        let mut planner = FftPlanner::<f64>::new();
        let forward = points.iter().map(|&p| planner.plan_fft_forward(p)).collect();
        let inverse = points.iter().map(|&p| planner.plan_fft_inverse(p)).collect();

        Ok(Arc::new(WaveguideGrid {
            m,
            n,
            supercell,
            points: points.to_vec(),
            strides,
            total,
            wavenumbers,
            scaled_xi2,
            forward,
            inverse,
        }))
    }

    /// Same grid with every axis carrying `points` samples.
    pub fn uniform(m: usize, n: usize, supercell: usize, points: usize) -> Result<Arc<Self>> {
        Self::new(m, n, supercell, &vec![points; m + n])
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total dimension `d = m + n`.
    pub fn dim(&self) -> usize {
        self.m + self.n
    }

    /// Supercell multiplier `L`.
    pub fn supercell(&self) -> usize {
        self.supercell
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn is_euclidean(&self, axis: usize) -> bool {
        axis < self.m
    }

    /// Length of the axis: `2πL` for Euclidean axes, `2π` otherwise.
    pub fn period(&self, axis: usize) -> f64 {
        if self.is_euclidean(axis) {
            2.0 * PI * self.supercell as f64
        } else {
            2.0 * PI
        }
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.period(axis) / self.points[axis] as f64
    }

    /// Lattice spacing of the frequency variable along `axis`.
    pub fn frequency_step(&self, axis: usize) -> f64 {
        if self.is_euclidean(axis) {
            1.0 / self.supercell as f64
        } else {
            1.0
        }
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.period(a)).product()
    }

    /// Quadrature weight of a single grid point.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.total as f64
    }

    /// Signed integer wavenumber of DFT index `i` along `axis`.
    pub fn wavenumber(&self, axis: usize, i: usize) -> i64 {
        self.wavenumbers[axis][i]
    }

    pub fn wavenumbers(&self, axis: usize) -> &[i64] {
        &self.wavenumbers[axis]
    }

    /// Physical frequency `ξ_a` of DFT index `i` along `axis`.
    pub fn frequency(&self, axis: usize, i: usize) -> f64 {
        self.wavenumbers[axis][i] as f64 * self.frequency_step(axis)
    }

    /// Physical coordinate of sample `i` along `axis`.
    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        i as f64 * self.spacing(axis)
    }

    /// Splits a flat (row-major, last axis fastest) index into per-axis indices.
    pub fn unflatten(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.dim()).rev() {
            out[a] = idx % self.points[a];
            idx /= self.points[a];
        }
    }

    pub fn flatten(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.strides)
            .map(|(&i, &s)| i * s)
            .sum()
    }

    /// Flat index of the signed lattice vector `k`, wrapping per axis.
    pub fn index_of_wavenumbers(&self, k: &[i64]) -> usize {
        k.iter()
            .enumerate()
            .map(|(a, &ka)| {
                let p = self.points[a] as i64;
                (ka.rem_euclid(p) as usize) * self.strides[a]
            })
            .sum()
    }

    /// Frequency vector of a flat spectral index.
    pub fn frequency_vector(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for a in (0..self.dim()).rev() {
            let i = rem % self.points[a];
            rem /= self.points[a];
            out[a] = self.frequency(a, i);
        }
    }

    /// Coordinates of a flat physical index.
    pub fn point(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for a in (0..self.dim()).rev() {
            let i = rem % self.points[a];
            rem /= self.points[a];
            out[a] = self.coordinate(a, i);
        }
    }

    /// `L² |ξ|²` for every spectral index; integer-valued on the lattice.
    pub fn scaled_xi2(&self) -> &[u64] {
        &self.scaled_xi2
    }

    /// `|ξ|²` of a flat spectral index.
    pub fn xi2(&self, idx: usize) -> f64 {
        self.scaled_xi2[idx] as f64 / (self.supercell * self.supercell) as f64
    }

    /// Largest value of `L² |ξ|²` on the lattice.
    pub fn max_scaled_xi2(&self) -> u64 {
        self.scaled_xi2.iter().copied().max().unwrap_or(0)
    }

    /// The `1/L²` factor turning `scaled_xi2` into `|ξ|²`.
    pub fn xi2_unit(&self) -> f64 {
        1.0 / (self.supercell * self.supercell) as f64
    }

    /// Table `e^{-i t |ξ|²}` indexed by `L²|ξ|²`.
    pub fn free_phase_table(&self, t: f64) -> Vec<Complex64> {
        let unit = self.xi2_unit();
        (0..=self.max_scaled_xi2())
            .map(|q| Complex64::from_polar(1.0, -t * q as f64 * unit))
            .collect()
    }

    /// In-place forward transform: physical samples to Fourier coefficients.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.total, "buffer does not match grid");
        for axis in 0..self.dim() {
            self.transform_axis(data, axis, &self.forward[axis]);
        }
        let scale = 1.0 / self.total as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    /// In-place inverse transform: Fourier coefficients to physical samples.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.total, "buffer does not match grid");
        for axis in 0..self.dim() {
            self.transform_axis(data, axis, &self.inverse[axis]);
        }
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, plan: &Arc<dyn Fft<f64>>) {
        let len = self.points[axis];
        let stride = self.strides[axis];
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        if stride == 1 {
            plan.process_with_scratch(data, &mut scratch);
            return;
        }
        let block = len * stride;
        let mut tmp = vec![Complex64::default(); block];
        for chunk in data.chunks_exact_mut(block) {
            for i in 0..len {
                for j in 0..stride {
                    tmp[j * len + i] = chunk[i * stride + j];
                }
            }
            plan.process_with_scratch(&mut tmp, &mut scratch);
            for i in 0..len {
                for j in 0..stride {
                    chunk[i * stride + j] = tmp[j * len + i];
                }
            }
        }
    }
}

impl PartialEq for WaveguideGrid {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
            && self.n == other.n
            && self.supercell == other.supercell
            && self.points == other.points
    }
}

impl fmt::Debug for WaveguideGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WaveguideGrid")
            .field("m", &self.m)
            .field("n", &self.n)
            .field("supercell", &self.supercell)
            .field("points", &self.points)
            .finish()
    }
}

pub(crate) fn same_grid(a: &Arc<WaveguideGrid>, b: &Arc<WaveguideGrid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_geometry() {
        assert!(WaveguideGrid::new(0, 1, 1, &[8]).is_err());
        assert!(WaveguideGrid::new(1, 0, 1, &[8]).is_err());
        assert!(WaveguideGrid::new(1, 1, 0, &[8, 8]).is_err());
        assert!(WaveguideGrid::new(1, 1, 1, &[8, 6, 4]).is_err());
        assert!(WaveguideGrid::new(1, 1, 1, &[7, 8]).is_err());
        assert!(WaveguideGrid::new(1, 1, 1, &[2, 8]).is_err());
        assert!(WaveguideGrid::new(1, 1, 2, &[8, 4]).is_ok());
    }

    #[test]
    fn nyquist_is_negative() {
        let g = WaveguideGrid::new(1, 1, 2, &[8, 4]).unwrap();
        assert_eq!(g.wavenumbers(0), &[0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.wavenumbers(1), &[0, 1, -2, -1]);
        assert_eq!(g.frequency(0, 1), 0.5);
        assert_eq!(g.frequency(1, 1), 1.0);
    }

    #[test]
    fn lattice_norms_are_integers() {
        let g = WaveguideGrid::new(1, 1, 2, &[8, 4]).unwrap();
        let idx = g.index_of_wavenumbers(&[3, -1]);
        // |ξ|² = (3/2)² + 1
        assert_eq!(g.scaled_xi2()[idx], 9 + 4);
        assert!((g.xi2(idx) - 3.25).abs() < 1e-15);
        assert_eq!(g.dim(), 2);
        assert!((g.volume() - 8.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn flatten_roundtrip() {
        let g = WaveguideGrid::new(2, 1, 1, &[4, 6, 8]).unwrap();
        let mut multi = [0usize; 3];
        for idx in 0..g.len() {
            g.unflatten(idx, &mut multi);
            assert_eq!(g.flatten(&multi), idx);
        }
    }
}
