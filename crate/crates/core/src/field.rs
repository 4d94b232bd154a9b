//! Complex scalar fields on a [`WaveguideGrid`] and the exact Fourier-multiplier
//! calculus built on them.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{same_grid, WaveguideGrid};
use crate::numerics::{pairwise_sum_by, pairwise_sum_complex};

/// Which basis the values of a [`Field`] are expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Physical,
    Spectral,
}

/// Regularity exponent `s` of the Sobolev scale `H^s`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct SobolevIndex(f64);

impl SobolevIndex {
    pub const L2: SobolevIndex = SobolevIndex(0.0);

    /// Panics on a non-finite exponent; use [`SobolevIndex::try_new`] for input data.
    pub fn new(s: f64) -> Self {
        Self::try_new(s).expect("Sobolev index must be finite")
    }

    pub fn try_new(s: f64) -> Result<Self> {
        if s.is_finite() {
            Ok(SobolevIndex(s))
        } else {
            Err(Error::InvalidParameter(format!("Sobolev index {s} is not finite")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The Japanese-bracket weight `(1 + |ξ|²)^{s}`, i.e. `⟨ξ⟩^{2s}`.
    pub fn weight(self, xi2: f64) -> f64 {
        (1.0 + xi2).powf(self.0)
    }
}

impl std::ops::Neg for SobolevIndex {
    type Output = SobolevIndex;
    fn neg(self) -> SobolevIndex {
        SobolevIndex(-self.0)
    }
}

/// A complex field sampled on the grid, or its Fourier coefficients.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<WaveguideGrid>,
    repr: Representation,
    values: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: &Arc<WaveguideGrid>, repr: Representation) -> Field {
        Field {
            grid: grid.clone(),
            repr,
            values: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn from_values(
        grid: &Arc<WaveguideGrid>,
        repr: Representation,
        values: Vec<Complex64>,
    ) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::Contract(format!(
                "{} values supplied for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field {
            grid: grid.clone(),
            repr,
            values,
        })
    }

    pub fn physical(grid: &Arc<WaveguideGrid>, values: Vec<Complex64>) -> Result<Field> {
        Self::from_values(grid, Representation::Physical, values)
    }

    pub fn spectral(grid: &Arc<WaveguideGrid>, values: Vec<Complex64>) -> Result<Field> {
        Self::from_values(grid, Representation::Spectral, values)
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: &Arc<WaveguideGrid>, f: impl Fn(&[f64]) -> Complex64) -> Field {
        let mut z = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|idx| {
                grid.point(idx, &mut z);
                f(&z)
            })
            .collect();
        Field {
            grid: grid.clone(),
            repr: Representation::Physical,
            values,
        }
    }

    /// The plane wave `e^{iξ·z}` with `ξ` the lattice vector of signed wavenumbers `k`,
    /// returned in spectral form (a single unit coefficient).
    pub fn plane_wave(grid: &Arc<WaveguideGrid>, k: &[i64]) -> Field {
        let mut f = Field::zeros(grid, Representation::Spectral);
        f.values[grid.index_of_wavenumbers(k)] = Complex64::new(1.0, 0.0);
        f
    }

    /// Random spectral field with coefficients `N(0,1) + iN(0,1)` damped by
    /// `⟨ξ⟩^{-decay}`; `decay = 0` is white noise.
    pub fn random<R: Rng + ?Sized>(grid: &Arc<WaveguideGrid>, rng: &mut R, decay: f64) -> Field {
        let values = (0..grid.len())
            .map(|idx| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * (1.0 + grid.xi2(idx)).powf(-decay / 2.0)
            })
            .collect();
        Field {
            grid: grid.clone(),
            repr: Representation::Spectral,
            values,
        }
    }

    /// Random field supported on wavenumbers with `|k_a| <= band[a]` (in lattice units).
    pub fn random_band_limited<R: Rng + ?Sized>(
        grid: &Arc<WaveguideGrid>,
        rng: &mut R,
        band: &[i64],
    ) -> Field {
        let mut multi = vec![0usize; grid.dim()];
        let values = (0..grid.len())
            .map(|idx| {
                grid.unflatten(idx, &mut multi);
                let inside = multi
                    .iter()
                    .enumerate()
                    .all(|(a, &i)| grid.wavenumber(a, i).abs() <= band[a]);
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                if inside {
                    Complex64::new(re, im)
                } else {
                    Complex64::default()
                }
            })
            .collect();
        Field {
            grid: grid.clone(),
            repr: Representation::Spectral,
            values,
        }
    }

    pub fn grid(&self) -> &Arc<WaveguideGrid> {
        &self.grid
    }

    pub fn repr(&self) -> Representation {
        self.repr
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Forward transform. Errors if the field is already spectral.
    pub fn to_spectral(&self) -> Result<Field> {
        if self.repr != Representation::Physical {
            return Err(Error::Contract(
                "to_spectral expects a physical-space field".into(),
            ));
        }
        let mut values = self.values.clone();
        self.grid.forward_in_place(&mut values);
        Ok(Field {
            grid: self.grid.clone(),
            repr: Representation::Spectral,
            values,
        })
    }

    /// Inverse transform. Errors if the field is already physical.
    pub fn to_physical(&self) -> Result<Field> {
        if self.repr != Representation::Spectral {
            return Err(Error::Contract(
                "to_physical expects a spectral field".into(),
            ));
        }
        let mut values = self.values.clone();
        self.grid.inverse_in_place(&mut values);
        Ok(Field {
            grid: self.grid.clone(),
            repr: Representation::Physical,
            values,
        })
    }

    /// Converts to spectral form if needed.
    pub fn into_spectral(mut self) -> Field {
        if self.repr == Representation::Physical {
            self.grid.forward_in_place(&mut self.values);
            self.repr = Representation::Spectral;
        }
        self
    }

    /// Converts to physical form if needed.
    pub fn into_physical(mut self) -> Field {
        if self.repr == Representation::Spectral {
            self.grid.inverse_in_place(&mut self.values);
            self.repr = Representation::Physical;
        }
        self
    }

    pub fn as_spectral(&self) -> Field {
        self.clone().into_spectral()
    }

    pub fn as_physical(&self) -> Field {
        self.clone().into_physical()
    }

    fn check_compatible(&self, other: &Field) -> Result<()> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Multiplies the Fourier coefficients by `symbol(ξ)`.
    ///
    /// Physical inputs are transformed, multiplied and transformed back, so the
    /// output has the representation of the input.
    pub fn apply_multiplier(&self, symbol: impl Fn(&[f64]) -> Complex64) -> Result<Field> {
        let repr = self.repr;
        let mut out = self.as_spectral();
        let mut xi = vec![0.0; self.grid.dim()];
        for (idx, v) in out.values.iter_mut().enumerate() {
            self.grid.frequency_vector(idx, &mut xi);
            let m = symbol(&xi);
            if !(m.re.is_finite() && m.im.is_finite()) {
                return Err(Error::NonFiniteSymbol {
                    frequency: xi.clone(),
                });
            }
            *v *= m;
        }
        Ok(match repr {
            Representation::Physical => out.into_physical(),
            Representation::Spectral => out,
        })
    }

    /// Multiplier given as a function of the flat spectral index; no finiteness check.
    pub(crate) fn apply_indexed_multiplier(&self, symbol: impl Fn(usize) -> Complex64) -> Field {
        let repr = self.repr;
        let mut out = self.as_spectral();
        out.values
            .iter_mut()
            .enumerate()
            .for_each(|(idx, v)| *v *= symbol(idx));
        match repr {
            Representation::Physical => out.into_physical(),
            Representation::Spectral => out,
        }
    }

    /// `‖f‖_{H^s}` with `‖f‖² = volume · Σ ⟨ξ⟩^{2s} |F(ξ)|²`.
    pub fn sobolev_norm(&self, s: SobolevIndex) -> f64 {
        let spec = self.as_spectral();
        let g = &self.grid;
        let sum = pairwise_sum_by(0..g.len(), |idx| {
            s.weight(g.xi2(idx)) * spec.values[idx].norm_sqr()
        });
        (g.volume() * sum).sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(SobolevIndex::L2)
    }

    /// Sesquilinear `⟨f, g⟩_{H^s} = volume · Σ ⟨ξ⟩^{2s} F(ξ) conj(G(ξ))`.
    ///
    /// With `s = 0` this is the `L²` pairing, which is also the `H^s`–`H^{-s}`
    /// duality pairing.
    pub fn sobolev_inner(&self, other: &Field, s: SobolevIndex) -> Result<Complex64> {
        self.check_compatible(other)?;
        let a = self.as_spectral();
        let b = other.as_spectral();
        let g = &self.grid;
        let sum = pairwise_sum_complex(0..g.len(), |idx| {
            a.values[idx] * b.values[idx].conj() * s.weight(g.xi2(idx))
        });
        Ok(sum * g.volume())
    }

    pub fn l2_inner(&self, other: &Field) -> Result<Complex64> {
        self.sobolev_inner(other, SobolevIndex::L2)
    }

    /// Physical-quadrature `L²` norm `(Σ_j |f(z_j)|² dV)^{1/2}`.
    pub fn quadrature_l2_norm(&self) -> f64 {
        let phys = self.as_physical();
        let sum = pairwise_sum_by(0..self.grid.len(), |i| phys.values[i].norm_sqr());
        (sum * self.grid.cell_volume()).sqrt()
    }

    /// `L²` norm weighted by a real nonnegative field `w`: `(Σ w_j |f_j|² dV)^{1/2}`.
    pub fn weighted_l2_norm(&self, weight: &[f64]) -> f64 {
        let phys = self.as_physical();
        let sum = pairwise_sum_by(0..self.grid.len(), |i| weight[i] * phys.values[i].norm_sqr());
        (sum * self.grid.cell_volume()).sqrt()
    }

    /// Translation `τ_θ f(z) = f(z + θ)`, exact for the trigonometric interpolant.
    pub fn translate(&self, theta: &[f64]) -> Result<Field> {
        if theta.len() != self.grid.dim() {
            return Err(Error::Contract(format!(
                "translation vector has length {}, grid dimension is {}",
                theta.len(),
                self.grid.dim()
            )));
        }
        self.apply_multiplier(|xi| {
            let phase: f64 = xi.iter().zip(theta).map(|(x, t)| x * t).sum();
            Complex64::from_polar(1.0, phase)
        })
    }

    /// Bessel potential `(1 - Δ)^{σ/2}`.
    pub fn bessel_potential(&self, sigma: f64) -> Field {
        let g = self.grid.clone();
        self.apply_indexed_multiplier(|idx| Complex64::new((1.0 + g.xi2(idx)).powf(sigma / 2.0), 0.0))
    }

    /// Pointwise complex conjugate (in the field's own representation).
    pub fn conj(&self) -> Field {
        match self.repr {
            Representation::Physical => Field {
                grid: self.grid.clone(),
                repr: self.repr,
                values: self.values.iter().map(|v| v.conj()).collect(),
            },
            Representation::Spectral => {
                // conj(f) has coefficients conj(F(-ξ)).
                let g = &self.grid;
                let mut multi = vec![0usize; g.dim()];
                let mut k = vec![0i64; g.dim()];
                let values = (0..g.len())
                    .map(|idx| {
                        g.unflatten(idx, &mut multi);
                        for a in 0..g.dim() {
                            k[a] = -g.wavenumber(a, multi[a]);
                        }
                        self.values[g.index_of_wavenumbers(&k)].conj()
                    })
                    .collect();
                Field {
                    grid: self.grid.clone(),
                    repr: self.repr,
                    values,
                }
            }
        }
    }

    fn zip_with(&self, other: &Field, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Field> {
        self.check_compatible(other)?;
        let other = match (self.repr, other.repr) {
            (a, b) if a == b => std::borrow::Cow::Borrowed(other),
            (Representation::Spectral, _) => std::borrow::Cow::Owned(other.as_spectral()),
            (Representation::Physical, _) => std::borrow::Cow::Owned(other.as_physical()),
        };
        Ok(Field {
            grid: self.grid.clone(),
            repr: self.repr,
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: Complex64) -> Field {
        Field {
            grid: self.grid.clone(),
            repr: self.repr,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Pointwise product with a real physical-space weight; result is physical.
    pub fn multiply_real(&self, weight: &[f64]) -> Field {
        let mut out = self.as_physical();
        out.values
            .iter_mut()
            .zip(weight)
            .for_each(|(v, w)| *v *= *w);
        out
    }

    /// Pointwise product of two fields; result is physical.
    pub fn multiply(&self, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        let a = self.as_physical();
        let b = other.as_physical();
        Ok(Field {
            grid: self.grid.clone(),
            repr: Representation::Physical,
            values: a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.as_physical()
            .values
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Largest coefficient-wise difference, comparing in this field's representation.
    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        let d = self.sub(other)?;
        Ok(d.values.iter().map(|v| v.norm()).fold(0.0, f64::max))
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }
}
