//! Discrete Bourgain spaces `X^{s,b}` on a periodic space-time grid.
//!
//! A [`SpaceTimeField`] holds samples `u(t_j, z)` on `t_j = origin + j·T_per/Nt`.
//! Its coefficients follow the convention
//!
//! ```text
//! u(t, z) = Σ_{ξ,τ} ũ(ξ, τ) e^{i(ξ·z − τ t)},   τ ∈ (2π/T_per)·Z,
//! ```
//!
//! so free waves `e^{itΔ}e^{iξ·z}` sit on the paraboloid `τ = |ξ|²`, and
//!
//! ```text
//! ‖u‖²_{X^{s,b}} = vol · T_per · Σ ⟨τ − |ξ|²⟩^{2b} ⟨ξ⟩^{2s} |ũ|².
//! ```
//!
//! Besides the norm the module stress-tests the standard trilinear and
//! gain-of-integration estimates. Those inequalities have unknown constants,
//! so only ratio statistics are reported; what is exact is the evaluation
//! of both sides, which tests compare against brute-force convolutions.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::WaveguideGrid;
use crate::numerics::{loglog_slope, pairwise_sum_by, smooth_ramp};
use crate::propagators::linear_propagate;

type C64 = Complex64;

/// Coefficients smaller than this fraction of the largest one are treated
/// as zero when measuring spectral support.
const SUPPORT_THRESHOLD: f64 = 1e-11;

/// Space-time samples over one time period, stored time-major.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    grid: Arc<WaveguideGrid>,
    period: f64,
    origin: f64,
    nt: usize,
    values: Vec<C64>,
}

fn check_time_grid(period: f64, nt: usize) -> Result<()> {
    if nt < 8 || nt % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "time samples must be even and >= 8, got {nt}"
        )));
    }
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidParameter(format!("bad time period {period}")));
    }
    Ok(())
}

/// Signed lattice index of time-frequency slot `k`.
fn time_index(nt: usize, k: usize) -> i64 {
    if k < nt / 2 {
        k as i64
    } else {
        k as i64 - nt as i64
    }
}

impl SpaceTimeField {
    pub fn zeros(grid: &Arc<WaveguideGrid>, period: f64, nt: usize) -> Result<Self> {
        check_time_grid(period, nt)?;
        Ok(SpaceTimeField {
            grid: grid.clone(),
            period,
            origin: 0.0,
            nt,
            values: vec![C64::default(); nt * grid.len()],
        })
    }

    /// Samples `f(t, z)` on the grid, starting at `t = origin`.
    pub fn from_fn(
        grid: &Arc<WaveguideGrid>,
        period: f64,
        origin: f64,
        nt: usize,
        f: impl Fn(f64, &[f64]) -> C64 + Sync,
    ) -> Result<Self> {
        check_time_grid(period, nt)?;
        let space = grid.len();
        let dt = period / nt as f64;
        let mut values = vec![C64::default(); nt * space];
        values
            .par_chunks_mut(space)
            .enumerate()
            .for_each(|(j, slice)| {
                let t = origin + j as f64 * dt;
                let mut z = vec![0.0; grid.dim()];
                for (idx, v) in slice.iter_mut().enumerate() {
                    grid.point(idx, &mut z);
                    *v = f(t, &z);
                }
            });
        Ok(SpaceTimeField {
            grid: grid.clone(),
            period,
            origin,
            nt,
            values,
        })
    }

    /// Stacks spatial fields taken at `origin + j·period/nt`.
    pub fn from_slices(slices: &[Field], period: f64, origin: f64) -> Result<Self> {
        let nt = slices.len();
        check_time_grid(period, nt)?;
        let grid = slices[0].grid().clone();
        let mut values = Vec::with_capacity(nt * grid.len());
        for s in slices {
            if s.grid() != &grid {
                return Err(Error::GridMismatch);
            }
            values.extend_from_slice(s.as_physical().values());
        }
        Ok(SpaceTimeField {
            grid,
            period,
            origin,
            nt,
            values,
        })
    }

    /// Builds a field from coefficients laid out as `[τ slot][ξ slot]`,
    /// time slots in FFT order.
    pub fn from_spectrum(
        grid: &Arc<WaveguideGrid>,
        period: f64,
        origin: f64,
        nt: usize,
        coefficients: Vec<C64>,
    ) -> Result<Self> {
        check_time_grid(period, nt)?;
        if coefficients.len() != nt * grid.len() {
            return Err(Error::Contract(format!(
                "expected {} coefficients, got {}",
                nt * grid.len(),
                coefficients.len()
            )));
        }
        let mut data = coefficients;
        let tau_step = 2.0 * PI / period;
        let space = grid.len();
        for (k, slab) in data.chunks_mut(space).enumerate() {
            let phase = C64::from_polar(1.0, -tau_step * time_index(nt, k) as f64 * origin);
            slab.iter_mut().for_each(|v| *v *= phase);
        }
        time_transform(&mut data, nt, space, false);
        data.par_chunks_mut(space)
            .for_each(|slab| grid.inverse_in_place(slab));
        Ok(SpaceTimeField {
            grid: grid.clone(),
            period,
            origin,
            nt,
            values: data,
        })
    }

    pub fn grid(&self) -> &Arc<WaveguideGrid> {
        &self.grid
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn dt(&self) -> f64 {
        self.period / self.nt as f64
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Frequency `τ` of time slot `k`.
    pub fn tau(&self, k: usize) -> f64 {
        2.0 * PI / self.period * time_index(self.nt, k) as f64
    }

    /// Space-time coefficients `ũ(ξ, τ)`, laid out as `[τ slot][ξ slot]`.
    pub fn spectrum(&self) -> Vec<C64> {
        let space = self.grid.len();
        let mut data = self.values.clone();
        data.par_chunks_mut(space)
            .for_each(|slab| self.grid.forward_in_place(slab));
        time_transform(&mut data, self.nt, space, true);
        let scale = 1.0 / self.nt as f64;
        for (k, slab) in data.chunks_mut(space).enumerate() {
            let phase = C64::from_polar(scale, self.tau(k) * self.origin);
            slab.iter_mut().for_each(|v| *v *= phase);
        }
        data
    }

    /// `Σ_j Σ_z |u|² dV dt`, the physical-side `L²` norm squared.
    pub fn quadrature_norm_sqr(&self) -> f64 {
        let w = self.grid.cell_volume() * self.dt();
        w * pairwise_sum_by(0..self.values.len(), |i| self.values[i].norm_sqr())
    }

    fn same_layout(&self, other: &SpaceTimeField) -> Result<()> {
        if self.grid != other.grid || self.nt != other.nt || self.period != other.period {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn zip_with(&self, other: &SpaceTimeField, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        self.same_layout(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(SpaceTimeField {
            values,
            ..self.clone()
        })
    }

    pub fn add(&self, other: &SpaceTimeField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SpaceTimeField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: C64) -> Self {
        SpaceTimeField {
            values: self.values.iter().map(|&v| v * c).collect(),
            ..self.clone()
        }
    }

    /// Largest `|k_a|` per space axis and largest `|τ index|` (last entry)
    /// carrying a non-negligible coefficient. `None` for the zero field.
    pub fn spectral_extent(&self) -> Option<Vec<usize>> {
        let spec = self.spectrum();
        let peak = spec.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return None;
        }
        let space = self.grid.len();
        let dim = self.grid.dim();
        let mut extent = vec![0usize; dim + 1];
        let mut multi = vec![0usize; dim];
        for (i, v) in spec.iter().enumerate() {
            if v.norm() <= SUPPORT_THRESHOLD * peak {
                continue;
            }
            let (k, idx) = (i / space, i % space);
            self.grid.unflatten(idx, &mut multi);
            for a in 0..dim {
                extent[a] = extent[a].max(self.grid.wavenumber(a, multi[a]).unsigned_abs() as usize);
            }
            extent[dim] = extent[dim].max(time_index(self.nt, k).unsigned_abs() as usize);
        }
        Some(extent)
    }
}

/// Length-`nt` DFT along the time axis of a `[time][space]` array.
/// `inverse` selects the `e^{+2πi jk/nt}` sign; no normalization.
fn time_transform(data: &mut [C64], nt: usize, space: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(nt)
    } else {
        planner.plan_fft_forward(nt)
    };
    // Transpose to space-major, transform contiguous columns, transpose back.
    let mut cols = vec![C64::default(); data.len()];
    for j in 0..nt {
        for x in 0..space {
            cols[x * nt + j] = data[j * space + x];
        }
    }
    cols.par_chunks_mut(nt).for_each(|col| plan.process(col));
    for j in 0..nt {
        for x in 0..space {
            data[j * space + x] = cols[x * nt + j];
        }
    }
}

/// Per-mode weight `⟨τ − |ξ|²⟩^b ⟨ξ⟩^s`, written as one exponential so that
/// it is exactly log-linear in `(s, b)`.
pub fn mode_weight(xi2: f64, tau: f64, s: f64, b: f64) -> f64 {
    let dev = tau - xi2;
    (0.5 * b * (1.0 + dev * dev).ln() + 0.5 * s * (1.0 + xi2).ln()).exp()
}

/// `‖u‖_{X^{s,b}}`.
pub fn xsb_norm(u: &SpaceTimeField, s: f64, b: f64) -> f64 {
    let spec = u.spectrum();
    norm_from_spectrum(u, &spec, s, b)
}

fn norm_from_spectrum(u: &SpaceTimeField, spec: &[C64], s: f64, b: f64) -> f64 {
    let space = u.grid.len();
    let sum = pairwise_sum_by(0..spec.len(), |i| {
        let w = mode_weight(u.grid.xi2(i % space), u.tau(i / space), s, b);
        w * w * spec[i].norm_sqr()
    });
    (u.grid.volume() * u.period * sum).sqrt()
}

/// Exponents used by the estimate checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct XsbParams {
    pub s: f64,
    pub b: f64,
    pub b_prime: f64,
    pub r: f64,
}

impl Default for XsbParams {
    fn default() -> Self {
        XsbParams {
            s: 1.0,
            b: 0.55,
            b_prime: 0.35,
            r: 1.0,
        }
    }
}

impl XsbParams {
    /// Requires `0 < b' < 1/2 < b`, `b + b' ≤ 1` and `r ≥ s`.
    pub fn validate(&self) -> Result<()> {
        let ok = self.b_prime > 0.0
            && self.b_prime < 0.5
            && self.b > 0.5
            && self.b + self.b_prime <= 1.0
            && self.r >= self.s;
        if ok && [self.s, self.b, self.b_prime, self.r].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "need 0 < b' < 1/2 < b, b + b' <= 1 and r >= s, got {self:?}"
            )))
        }
    }
}

/// The five trilinear estimates that are stress-tested.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TrilinearEstimate {
    /// `‖|u|²u‖_{X^{r,-b'}} ≤ C ‖u‖²_{X^{s,b'}} ‖u‖_{X^{r,b'}}`
    Cubic,
    /// `‖|u|²v‖_{X^{r,-b'}} ≤ C ‖u‖_{X^{s,b'}} ‖u‖_{X^{r,b'}} ‖v‖_{X^{r,b'}}`
    CubicMixed,
    /// `‖|u|²u − |v|²v‖_{X^{s,-b'}} ≤ C (‖u‖² + ‖v‖²)_{X^{s,b'}} ‖u − v‖_{X^{s,b'}}`
    CubicLipschitz,
    /// `‖a ā' u‖_{X^{s,-b'}} ≤ C ‖a‖_{X^{1,b'}} ‖a'‖_{X^{1,b'}} ‖u‖_{X^{s,b'}}`
    PotentialPair,
    /// `‖|a|²u‖_{X^{s,-b'}} ≤ C ‖a‖_{X^{1,b'}} ‖a‖_{X^{r,b'}} ‖u‖_{X^{s,b'}}`
    PotentialModulus,
}

impl TrilinearEstimate {
    pub const ALL: [TrilinearEstimate; 5] = [
        TrilinearEstimate::Cubic,
        TrilinearEstimate::CubicMixed,
        TrilinearEstimate::CubicLipschitz,
        TrilinearEstimate::PotentialPair,
        TrilinearEstimate::PotentialModulus,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TrilinearEstimate::Cubic => "cubic",
            TrilinearEstimate::CubicMixed => "cubic-mixed",
            TrilinearEstimate::CubicLipschitz => "cubic-lipschitz",
            TrilinearEstimate::PotentialPair => "potential-pair",
            TrilinearEstimate::PotentialModulus => "potential-modulus",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.label() == label)
    }

    /// Number of input fields.
    pub fn arity(self) -> usize {
        match self {
            TrilinearEstimate::Cubic => 1,
            TrilinearEstimate::PotentialPair => 3,
            _ => 2,
        }
    }

    /// Left- and right-hand sides of the estimate for the given inputs.
    /// `None` when the right-hand side vanishes.
    pub fn sides(self, inputs: &[SpaceTimeField], p: &XsbParams) -> Result<Option<(f64, f64)>> {
        if inputs.len() < self.arity() {
            return Err(Error::Contract(format!(
                "{} needs {} inputs, got {}",
                self.label(),
                self.arity(),
                inputs.len()
            )));
        }
        let bp = p.b_prime;
        let n = |u: &SpaceTimeField, s: f64| xsb_norm(u, s, bp);
        let (product, lhs_s, rhs) = match self {
            TrilinearEstimate::Cubic => {
                let u = &inputs[0];
                check_aliasing(&[u, u, u])?;
                let nu = n(u, p.s);
                (cubic(u, u, u)?, p.r, nu * nu * n(u, p.r))
            }
            TrilinearEstimate::CubicMixed => {
                let (u, v) = (&inputs[0], &inputs[1]);
                check_aliasing(&[u, u, v])?;
                (cubic(u, u, v)?, p.r, n(u, p.s) * n(u, p.r) * n(v, p.r))
            }
            TrilinearEstimate::CubicLipschitz => {
                let (u, v) = (&inputs[0], &inputs[1]);
                check_aliasing(&[u, u, u])?;
                check_aliasing(&[v, v, v])?;
                let (nu, nv) = (n(u, p.s), n(v, p.s));
                let diff = cubic(u, u, u)?.sub(&cubic(v, v, v)?)?;
                (diff, p.s, (nu * nu + nv * nv) * n(&u.sub(v)?, p.s))
            }
            TrilinearEstimate::PotentialPair => {
                let (a1, a2, u) = (&inputs[0], &inputs[1], &inputs[2]);
                check_aliasing(&[a1, a2, u])?;
                (cubic(a1, a2, u)?, p.s, n(a1, 1.0) * n(a2, 1.0) * n(u, p.s))
            }
            TrilinearEstimate::PotentialModulus => {
                let (a, u) = (&inputs[0], &inputs[1]);
                check_aliasing(&[a, a, u])?;
                (cubic(a, a, u)?, p.s, n(a, 1.0) * n(a, p.r) * n(u, p.s))
            }
        };
        if rhs == 0.0 {
            return Ok(None);
        }
        Ok(Some((xsb_norm(&product, lhs_s, -bp), rhs)))
    }
}

/// Pointwise `a · conj(b) · c`.
fn cubic(a: &SpaceTimeField, b: &SpaceTimeField, c: &SpaceTimeField) -> Result<SpaceTimeField> {
    a.same_layout(b)?;
    a.same_layout(c)?;
    let values = (0..a.values.len())
        .map(|i| a.values[i] * b.values[i].conj() * c.values[i])
        .collect();
    Ok(SpaceTimeField {
        values,
        ..a.clone()
    })
}

/// A product of three factors is exact on the grid when the summed spectral
/// extents stay inside the representable range on every axis.
fn check_aliasing(factors: &[&SpaceTimeField]) -> Result<()> {
    let extents: Vec<Vec<usize>> = match factors.iter().map(|f| f.spectral_extent()).collect() {
        Some(e) => e,
        None => return Ok(()),
    };
    let grid = &factors[0].grid;
    let dim = grid.dim();
    for axis in 0..=dim {
        let points = if axis < dim {
            grid.points()[axis]
        } else {
            factors[0].nt
        };
        let band: usize = extents.iter().map(|e| e[axis]).sum();
        if band >= points / 2 {
            return Err(Error::Aliasing { axis, band, points });
        }
    }
    Ok(())
}

/// Random field with coefficients on `|k_a| ≤ band` and time slots within
/// `modulation` lattice steps of the paraboloid `τ = |ξ|²`.
pub fn random_near_paraboloid<R: Rng + ?Sized>(
    grid: &Arc<WaveguideGrid>,
    period: f64,
    nt: usize,
    band: usize,
    modulation: usize,
    rng: &mut R,
) -> Result<SpaceTimeField> {
    check_time_grid(period, nt)?;
    let space = grid.len();
    let tau_step = 2.0 * PI / period;
    let mut coeffs = vec![C64::default(); nt * space];
    let mut multi = vec![0usize; grid.dim()];
    for idx in 0..space {
        grid.unflatten(idx, &mut multi);
        let inside = multi
            .iter()
            .enumerate()
            .all(|(a, &i)| grid.wavenumber(a, i).unsigned_abs() as usize <= band);
        if !inside {
            continue;
        }
        let centre = (grid.xi2(idx) / tau_step).round() as i64;
        let m = modulation as i64;
        for k in (centre - m)..=(centre + m) {
            if k.unsigned_abs() as usize >= nt / 2 {
                return Err(Error::Aliasing {
                    axis: grid.dim(),
                    band: k.unsigned_abs() as usize,
                    points: nt,
                });
            }
            let slot = k.rem_euclid(nt as i64) as usize;
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            coeffs[slot * space + idx] = C64::new(re, im);
        }
    }
    SpaceTimeField::from_spectrum(grid, period, 0.0, nt, coeffs)
}

/// Setup for [`trilinear_ratio`].
#[derive(Clone, Debug)]
pub struct TrilinearConfig {
    pub grid: Arc<WaveguideGrid>,
    pub period: f64,
    pub nt: usize,
    pub bands: Vec<usize>,
    pub samples: usize,
    pub modulation: usize,
    pub params: XsbParams,
    pub estimates: Vec<TrilinearEstimate>,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrilinearSample {
    pub estimate: TrilinearEstimate,
    pub sample: usize,
    pub band: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrilinearSummary {
    pub estimate: TrilinearEstimate,
    pub band: usize,
    pub count: usize,
    pub degenerate: usize,
    pub max: f64,
    pub median: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrilinearReport {
    pub samples: Vec<TrilinearSample>,
    pub summaries: Vec<TrilinearSummary>,
}

impl TrilinearReport {
    /// Ratios of the maximum ratio between consecutive bands.
    pub fn trend(&self, estimate: TrilinearEstimate) -> Vec<f64> {
        let maxima: Vec<f64> = self
            .summaries
            .iter()
            .filter(|s| s.estimate == estimate)
            .map(|s| s.max)
            .collect();
        maxima.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// CSV `sample,band,lhs,rhs,ratio` for one estimate.
    pub fn write_csv<W: Write>(&self, estimate: TrilinearEstimate, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sample", "band", "lhs", "rhs", "ratio"])?;
        for s in self.samples.iter().filter(|s| s.estimate == estimate) {
            w.write_record([
                s.sample.to_string(),
                s.band.to_string(),
                format!("{:e}", s.lhs),
                format!("{:e}", s.rhs),
                format!("{:e}", s.ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates each configured estimate on seeded random samples at every band.
pub fn trilinear_ratio(cfg: &TrilinearConfig) -> Result<TrilinearReport> {
    cfg.params.validate()?;
    check_time_grid(cfg.period, cfg.nt)?;
    let mut samples = Vec::new();
    let mut summaries = Vec::new();
    for &band in &cfg.bands {
        let per_sample: Vec<Result<Vec<Option<(f64, f64)>>>> = (0..cfg.samples)
            .into_par_iter()
            .map(|id| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(((band as u64) << 32) | id as u64);
                let mut draw = || {
                    random_near_paraboloid(&cfg.grid, cfg.period, cfg.nt, band, cfg.modulation, &mut rng)
                };
                let u = draw()?;
                let v = draw()?;
                let w = draw()?;
                cfg.estimates
                    .iter()
                    .map(|&e| {
                        let inputs = match e {
                            // Lipschitz form: a nearby pair.
                            TrilinearEstimate::CubicLipschitz => {
                                vec![u.clone(), u.add(&v.scale(C64::new(0.1, 0.0)))?]
                            }
                            _ => vec![u.clone(), v.clone(), w.clone()],
                        };
                        e.sides(&inputs, &cfg.params)
                    })
                    .collect()
            })
            .collect();
        let per_sample: Vec<Vec<Option<(f64, f64)>>> = per_sample.into_iter().collect::<Result<_>>()?;
        for (ei, &estimate) in cfg.estimates.iter().enumerate() {
            let mut ratios = Vec::new();
            let mut degenerate = 0;
            for (id, row) in per_sample.iter().enumerate() {
                match row[ei] {
                    Some((lhs, rhs)) => {
                        ratios.push(lhs / rhs);
                        samples.push(TrilinearSample {
                            estimate,
                            sample: id,
                            band,
                            lhs,
                            rhs,
                            ratio: lhs / rhs,
                        });
                    }
                    None => degenerate += 1,
                }
            }
            summaries.push(summarize(estimate, band, ratios, degenerate));
        }
    }
    samples.sort_by_key(|s| (estimate_order(s.estimate), s.band, s.sample));
    summaries.sort_by_key(|s| (estimate_order(s.estimate), s.band));
    Ok(TrilinearReport { samples, summaries })
}

fn estimate_order(e: TrilinearEstimate) -> usize {
    TrilinearEstimate::ALL.iter().position(|&x| x == e).unwrap_or(usize::MAX)
}

fn summarize(estimate: TrilinearEstimate, band: usize, mut ratios: Vec<f64>, degenerate: usize) -> TrilinearSummary {
    ratios.sort_by(|a, b| a.total_cmp(b));
    let count = ratios.len();
    let median = match count {
        0 => f64::NAN,
        c if c % 2 == 1 => ratios[c / 2],
        c => 0.5 * (ratios[c / 2 - 1] + ratios[c / 2]),
    };
    TrilinearSummary {
        estimate,
        band,
        count,
        degenerate,
        max: ratios.last().copied().unwrap_or(f64::NAN),
        median,
    }
}

/// `‖g‖_{H^σ}` of `period`-periodic samples, `T_per Σ ⟨τ⟩^{2σ} |ĝ|²`.
pub fn time_sobolev_norm(samples: &[C64], period: f64, sigma: f64) -> f64 {
    let nt = samples.len();
    let mut data = samples.to_vec();
    FftPlanner::new().plan_fft_inverse(nt).process(&mut data);
    let step = 2.0 * PI / period;
    let scale = 1.0 / nt as f64;
    let sum = pairwise_sum_by(0..nt, |k| {
        let tau = step * time_index(nt, k) as f64;
        (1.0 + tau * tau).powf(sigma) * (data[k] * scale).norm_sqr()
    });
    (period * sum).sqrt()
}

/// Time cutoff `Ψ`: one on `[-1, 1]`, zero outside `[-2, 2]`.
pub fn plateau_cutoff(s: f64) -> f64 {
    smooth_ramp(2.0 - s.abs())
}

/// Sample times `-T_per/2 + j·T_per/nt` of the centred gain grid.
pub fn centred_times(period: f64, nt: usize) -> Vec<f64> {
    let dt = period / nt as f64;
    (0..nt).map(|j| -0.5 * period + j as f64 * dt).collect()
}

/// `F(t) = Ψ(t/T) ∫_0^t f` on the centred grid, by the cumulative
/// trapezoid rule from `t = 0` in both directions.
pub fn cutoff_primitive(f: &[C64], horizon: f64, period: f64) -> Vec<C64> {
    let nt = f.len();
    let dt = period / nt as f64;
    let zero = nt / 2;
    let mut prim = vec![C64::default(); nt];
    for j in zero + 1..nt {
        prim[j] = prim[j - 1] + (f[j - 1] + f[j]) * (0.5 * dt);
    }
    for j in (0..zero).rev() {
        prim[j] = prim[j + 1] - (f[j + 1] + f[j]) * (0.5 * dt);
    }
    centred_times(period, nt)
        .iter()
        .zip(prim)
        .map(|(&t, p)| p * plateau_cutoff(t / horizon))
        .collect()
}

/// Setup for [`gain_integration_scaling`].
#[derive(Clone, Debug)]
pub struct GainConfig {
    pub params: XsbParams,
    pub period: f64,
    pub nt: usize,
    pub horizons: Vec<f64>,
    /// Probe frequencies `ω`; probes oscillate like `e^{iωt/T}`.
    pub frequencies: Vec<f64>,
}

impl Default for GainConfig {
    fn default() -> Self {
        GainConfig {
            params: XsbParams::default(),
            period: 8.0,
            nt: 8192,
            horizons: (0..6).map(|k| 0.5f64.powi(k)).collect(),
            frequencies: vec![0.0, 1.0, 2.0, 4.0],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GainRow {
    pub horizon: f64,
    pub frequency: f64,
    pub source_norm: f64,
    pub primitive_norm: f64,
    pub ratio: f64,
    /// `ratio / T^{1-b-b'}`.
    pub normalized: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GainReport {
    pub rows: Vec<GainRow>,
    /// Worst normalized ratio per horizon, in sweep order.
    pub worst: Vec<f64>,
    /// Log-log slope of the worst raw ratio against `T`.
    pub slope: f64,
    /// Largest worst-normalized value divided by the one at the first horizon.
    pub growth: f64,
}

/// Sweeps `T` over probes `f(t) = g(t/T) e^{iωt/T}` and records
/// `‖F‖_{H^b} / ‖f‖_{H^{-b'}}` against the predicted `T^{1-b-b'}`.
pub fn gain_integration_scaling(profile: impl Fn(f64) -> C64 + Sync, cfg: &GainConfig) -> Result<GainReport> {
    cfg.params.validate()?;
    check_time_grid(cfg.period, cfg.nt)?;
    if cfg.horizons.is_empty()
        || cfg.horizons.iter().any(|&t| !(t > 0.0 && t <= 1.0 && 4.0 * t <= cfg.period))
    {
        return Err(Error::InvalidParameter(
            "horizons must lie in (0, 1] with 4T <= period".into(),
        ));
    }
    let XsbParams { b, b_prime, .. } = cfg.params;
    let times = centred_times(cfg.period, cfg.nt);
    let jobs: Vec<(f64, f64)> = cfg
        .horizons
        .iter()
        .flat_map(|&t| cfg.frequencies.iter().map(move |&w| (t, w)))
        .collect();
    let rows: Vec<GainRow> = jobs
        .par_iter()
        .map(|&(horizon, frequency)| {
            let f: Vec<C64> = times
                .iter()
                .map(|&t| profile(t / horizon) * C64::from_polar(1.0, frequency * t / horizon))
                .collect();
            let big_f = cutoff_primitive(&f, horizon, cfg.period);
            let source_norm = time_sobolev_norm(&f, cfg.period, -b_prime);
            let primitive_norm = time_sobolev_norm(&big_f, cfg.period, b);
            let ratio = if source_norm > 0.0 {
                primitive_norm / source_norm
            } else {
                0.0
            };
            GainRow {
                horizon,
                frequency,
                source_norm,
                primitive_norm,
                ratio,
                normalized: ratio / horizon.powf(1.0 - b - b_prime),
            }
        })
        .collect();
    let per_horizon = |pick: fn(&GainRow) -> f64| -> Vec<f64> {
        cfg.horizons
            .iter()
            .map(|&h| {
                rows.iter()
                    .filter(|r| r.horizon == h)
                    .map(pick)
                    .fold(0.0, f64::max)
            })
            .collect()
    };
    let worst = per_horizon(|r| r.normalized);
    let worst_raw = per_horizon(|r| r.ratio);
    let slope = if cfg.horizons.len() >= 2 && worst_raw.iter().all(|&v| v > 0.0) {
        loglog_slope(&cfg.horizons, &worst_raw)
    } else {
        f64::NAN
    };
    let growth = if worst[0] > 0.0 {
        worst.iter().fold(0.0, |a: f64, &v| a.max(v)) / worst[0]
    } else {
        f64::NAN
    };
    Ok(GainReport {
        rows,
        worst,
        slope,
        growth,
    })
}

/// How a field known on `[0, T]` is continued to the whole time period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ExtensionProfile {
    /// Free continuation with no cutoff.
    One,
    /// Free continuation damped to zero within `width` of the window.
    Smooth { width: f64 },
}

impl ExtensionProfile {
    fn weight(self, t: f64, horizon: f64) -> f64 {
        match self {
            ExtensionProfile::One => 1.0,
            ExtensionProfile::Smooth { width } => {
                let dist = if t < 0.0 {
                    -t
                } else if t > horizon {
                    t - horizon
                } else {
                    0.0
                };
                smooth_ramp(1.0 - dist / width)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RestrictionEstimate {
    pub per_profile: Vec<(ExtensionProfile, f64)>,
    /// Smallest of the per-profile norms. An upper bound for the restriction
    /// norm, never the infimum itself.
    pub bound: f64,
}

/// Upper bounds for `‖u‖_{X^{s,b}_T}` from explicit extensions.
///
/// `u` is queried only on `[0, T]`. Outside, the field continues freely from
/// `u(0)` and `u(T)`, is multiplied by the profile, and lives on the
/// period `[0, T_per)` with `nt` samples.
pub fn restriction_norm_estimate(
    u: impl Fn(f64) -> Field + Sync,
    horizon: f64,
    period: f64,
    nt: usize,
    s: f64,
    b: f64,
    profiles: &[ExtensionProfile],
) -> Result<RestrictionEstimate> {
    check_time_grid(period, nt)?;
    if !(horizon > 0.0 && horizon < period) || profiles.is_empty() {
        return Err(Error::InvalidParameter(
            "need 0 < T < period and at least one profile".into(),
        ));
    }
    for p in profiles {
        if let ExtensionProfile::Smooth { width } = *p {
            if !(width > 0.0 && horizon + 2.0 * width <= period) {
                return Err(Error::InvalidParameter(format!(
                    "extension width {width} does not fit in period {period}"
                )));
            }
        }
    }
    let dt = period / nt as f64;
    let start = u(0.0);
    let end = u(horizon);
    let turn = 0.5 * (horizon + period);
    // Signed time of each slot: [0, T] is the window, then forward, then backward.
    let slots: Vec<(f64, Field)> = (0..nt)
        .into_par_iter()
        .map(|j| {
            let t = j as f64 * dt;
            if t <= horizon {
                (t, u(t))
            } else if t < turn {
                (t, linear_propagate(&end, t - horizon))
            } else {
                (t - period, linear_propagate(&start, t - period))
            }
        })
        .collect();
    let per_profile = profiles
        .iter()
        .map(|&p| {
            let slices: Vec<Field> = slots
                .iter()
                .map(|(t, f)| f.scale(C64::new(p.weight(*t, horizon), 0.0)))
                .collect();
            let field = SpaceTimeField::from_slices(&slices, period, 0.0)?;
            Ok((p, xsb_norm(&field, s, b)))
        })
        .collect::<Result<Vec<_>>>()?;
    let bound = per_profile.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    Ok(RestrictionEstimate { per_profile, bound })
}

/// The free solution `e^{itΔ}u0` sampled over one period.
pub fn free_solution(u0: &Field, period: f64, nt: usize) -> Result<SpaceTimeField> {
    check_time_grid(period, nt)?;
    let dt = period / nt as f64;
    let slices: Vec<Field> = (0..nt)
        .into_par_iter()
        .map(|j| linear_propagate(u0, j as f64 * dt))
        .collect();
    SpaceTimeField::from_slices(&slices, period, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(n: usize) -> Arc<WaveguideGrid> {
        WaveguideGrid::new(1, 1, 1, &[n, n]).unwrap()
    }

    #[test]
    fn single_mode_norm_closed_form() {
        let g = grid2(16);
        let period = 2.0 * PI;
        let tau0 = 3.0;
        let u = SpaceTimeField::from_fn(&g, period, 0.0, 16, |t, z| {
            C64::from_polar(1.0, z[1] - tau0 * t)
        })
        .unwrap();
        for &(s, b) in &[(0.0, 0.0), (1.0, 0.5), (2.0, -0.35), (0.5, 0.55)] {
            let expect = (1.0 + 4.0f64).powf(b / 2.0) * 2f64.powf(s / 2.0) * (g.volume() * period).sqrt();
            let got = xsb_norm(&u, s, b);
            assert!((got - expect).abs() < 1e-12 * expect, "{s} {b}: {got} vs {expect}");
        }
    }

    #[test]
    fn parseval_and_round_trip() {
        let g = grid2(8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_near_paraboloid(&g, 2.0 * PI, 32, 2, 1, &mut rng).unwrap();
        let spec_norm = xsb_norm(&u, 0.0, 0.0);
        assert!((spec_norm * spec_norm - u.quadrature_norm_sqr()).abs() < 1e-12 * spec_norm * spec_norm);
        let shifted = SpaceTimeField::from_spectrum(&g, 2.0 * PI, 0.7, 32, u.spectrum()).unwrap();
        let back = shifted.spectrum();
        let orig = u.spectrum();
        let err = back.iter().zip(&orig).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn free_wave_sits_on_the_paraboloid() {
        let g = grid2(8);
        let u0 = Field::plane_wave(&g, &[0, 1]);
        let u = free_solution(&u0, 2.0 * PI, 16).unwrap();
        assert!((xsb_norm(&u, 0.0, 0.8) - xsb_norm(&u, 0.0, 0.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_inputs_are_degenerate() {
        let g = grid2(8);
        let z = SpaceTimeField::zeros(&g, 2.0 * PI, 8).unwrap();
        for e in TrilinearEstimate::ALL {
            let inputs = vec![z.clone(), z.clone(), z.clone()];
            assert!(e.sides(&inputs, &XsbParams::default()).unwrap().is_none());
        }
    }

    #[test]
    fn aliasing_is_refused() {
        let g = grid2(8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_near_paraboloid(&g, 2.0 * PI, 32, 2, 0, &mut rng).unwrap();
        let err = TrilinearEstimate::Cubic.sides(&[u], &XsbParams::default());
        assert!(matches!(err, Err(Error::Aliasing { .. })));
    }

    #[test]
    fn params_validation() {
        assert!(XsbParams::default().validate().is_ok());
        let bad = XsbParams {
            b: 0.7,
            b_prime: 0.4,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_source_has_zero_primitive() {
        let f = vec![C64::default(); 64];
        assert!(cutoff_primitive(&f, 0.5, 8.0).iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn restriction_of_zero_is_zero() {
        let g = grid2(8);
        let zero = Field::zeros(&g, crate::field::Representation::Physical);
        let est = restriction_norm_estimate(
            |_| zero.clone(),
            0.5,
            2.0 * PI,
            16,
            1.0,
            0.55,
            &[ExtensionProfile::One, ExtensionProfile::Smooth { width: 0.5 }],
        )
        .unwrap();
        assert_eq!(est.bound, 0.0);
    }
}
