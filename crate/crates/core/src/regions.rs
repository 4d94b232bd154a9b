//! Control regions `Ω = Ω1 x Ω2` built from boxes, and the smooth cutoffs
//! `χ` (space) and `φ_T` (time).
//!
//! `Ω1` is given by boxes in the fundamental cell `[0, 2π)^m` and repeated
//! `2π`-periodically, so it tiles the supercell. Each box edge is smoothed by
//! the exponential ramp over a transition layer of width `margin`: the cutoff
//! equals 1 on the boxes shrunk by `margin` and vanishes outside the boxes.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, SobolevIndex};
use crate::grid::WaveguideGrid;
use crate::numerics::smooth_ramp;

const TWO_PI: f64 = 2.0 * PI;

/// Open interval `(lo, hi)` of a circle of length `2π`. Endpoints may lie
/// outside `[0, 2π)`; the interval is read modulo `2π`. A length of at least
/// `2π` means the whole circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn full() -> Self {
        Interval { lo: 0.0, hi: TWO_PI }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_full(&self) -> bool {
        self.len() >= TWO_PI
    }

    /// Is `x` (mod 2π) inside `(lo + inset, hi - inset)`?
    fn contains_shrunk(&self, x: f64, inset: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let lo = self.lo + inset;
        let hi = self.hi - inset;
        let x = (x - lo).rem_euclid(TWO_PI) + lo;
        x > lo && x < hi
    }

    fn on_shrunk_closure(&self, x: f64, inset: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let lo = self.lo + inset;
        let hi = self.hi - inset;
        let x = (x - lo).rem_euclid(TWO_PI) + lo;
        x >= lo && x <= hi
    }

    /// Smooth profile: 1 on `[lo + width, hi - width]`, 0 off `(lo, hi)`.
    fn profile(&self, x: f64, width: f64) -> f64 {
        if self.is_full() {
            return 1.0;
        }
        let x = (x - self.lo).rem_euclid(TWO_PI) + self.lo;
        if width == 0.0 {
            return if x > self.lo && x < self.hi { 1.0 } else { 0.0 };
        }
        smooth_ramp((x - self.lo) / width) * smooth_ramp((self.hi - x) / width)
    }

    /// Sharp indicator with weight 1/2 on the endpoints.
    fn indicator(&self, x: f64) -> f64 {
        if self.is_full() {
            return 1.0;
        }
        let x = (x - self.lo).rem_euclid(TWO_PI) + self.lo;
        let tol = 1e-12;
        if (x - self.lo).abs() < tol || (x - self.hi).abs() < tol {
            0.5
        } else if x > self.lo && x < self.hi {
            1.0
        } else {
            0.0
        }
    }
}

/// An axis-aligned box: one interval per direction.
pub type BoxSpec = Vec<Interval>;

/// `Ω = Ω1 x Ω2` with `Ω1` a union of boxes in `[0,2π)^m` (periodically
/// extended) and `Ω2` a union of boxes in `T^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlRegion {
    pub boxes1: Vec<BoxSpec>,
    pub boxes2: Vec<BoxSpec>,
    /// Width of the smoothing layer; `Ω'` is every box shrunk by this amount.
    pub margin: f64,
}

impl ControlRegion {
    pub fn new(boxes1: Vec<BoxSpec>, boxes2: Vec<BoxSpec>, margin: f64) -> Result<Self> {
        let r = ControlRegion {
            boxes1,
            boxes2,
            margin,
        };
        r.validate()?;
        Ok(r)
    }

    /// The whole domain with zero margin (`χ ≡ 1`).
    pub fn full(m: usize, n: usize) -> Self {
        ControlRegion {
            boxes1: vec![vec![Interval::full(); m]],
            boxes2: vec![vec![Interval::full(); n]],
            margin: 0.0,
        }
    }

    /// A single box `Ω1 x Ω2`.
    pub fn product(omega1: BoxSpec, omega2: BoxSpec, margin: f64) -> Result<Self> {
        Self::new(vec![omega1], vec![omega2], margin)
    }

    /// Random single-box region; each side is an interval of length in
    /// `[min_len, 2π)` whose margin fits.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize, margin: f64) -> Self {
        let min_len = 3.0 * margin;
        let side = |rng: &mut R| {
            let len = rng.gen_range(min_len..TWO_PI * 0.9);
            let lo = rng.gen_range(0.0..TWO_PI);
            Interval::new(lo, lo + len)
        };
        let b1 = (0..m).map(|_| side(rng)).collect();
        let b2 = (0..n).map(|_| side(rng)).collect();
        ControlRegion {
            boxes1: vec![b1],
            boxes2: vec![b2],
            margin,
        }
    }

    pub fn m(&self) -> usize {
        self.boxes1.first().map_or(0, |b| b.len())
    }

    pub fn n(&self) -> usize {
        self.boxes2.first().map_or(0, |b| b.len())
    }

    pub fn is_full(&self) -> bool {
        let full = |boxes: &[BoxSpec]| boxes.iter().any(|b| b.iter().all(|i| i.is_full()));
        full(&self.boxes1) && full(&self.boxes2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.boxes1.is_empty() || self.boxes2.is_empty() {
            return Err(Error::InvalidRegion("both Ω1 and Ω2 need at least one box".into()));
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(Error::InvalidRegion(format!("margin {} must be finite and >= 0", self.margin)));
        }
        let m = self.boxes1[0].len();
        let n = self.boxes2[0].len();
        for (label, boxes, dim) in [("Ω1", &self.boxes1, m), ("Ω2", &self.boxes2, n)] {
            for (b, bx) in boxes.iter().enumerate() {
                if bx.len() != dim || dim == 0 {
                    return Err(Error::InvalidRegion(format!(
                        "{label} box {b} has {} sides, expected {dim}",
                        bx.len()
                    )));
                }
                for (a, iv) in bx.iter().enumerate() {
                    if !(iv.lo.is_finite() && iv.hi.is_finite()) || iv.len() <= 0.0 {
                        return Err(Error::InvalidRegion(format!(
                            "{label} box {b} side {a} is empty: ({}, {})",
                            iv.lo, iv.hi
                        )));
                    }
                    if !iv.is_full() && iv.len() <= 2.0 * self.margin {
                        return Err(Error::InvalidRegion(format!(
                            "{label} box {b} side {a} of length {} leaves nothing after shrinking by margin {}",
                            iv.len(),
                            self.margin
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn split<'a>(&self, z: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        z.split_at(self.m())
    }

    /// Point of `Ω1 x Ω2`.
    pub fn contains(&self, z: &[f64]) -> bool {
        let (x, y) = self.split(z);
        let inside = |boxes: &[BoxSpec], p: &[f64]| {
            boxes
                .iter()
                .any(|b| b.iter().zip(p).all(|(iv, &c)| iv.contains_shrunk(c, 0.0)))
        };
        inside(&self.boxes1, x) && inside(&self.boxes2, y)
    }

    /// Point of the closed shrunk region `Ω' x Ω2'` on which `χ = 1`.
    pub fn contains_core(&self, z: &[f64]) -> bool {
        let (x, y) = self.split(z);
        let inset = self.margin;
        let inside = |boxes: &[BoxSpec], p: &[f64]| {
            boxes
                .iter()
                .any(|b| b.iter().zip(p).all(|(iv, &c)| iv.on_shrunk_closure(c, inset)))
        };
        inside(&self.boxes1, x) && inside(&self.boxes2, y)
    }

    fn union_value(boxes: &[BoxSpec], p: &[f64], side: impl Fn(&Interval, f64) -> f64) -> f64 {
        let miss: f64 = boxes
            .iter()
            .map(|b| 1.0 - b.iter().zip(p).map(|(iv, &c)| side(iv, c)).product::<f64>())
            .product();
        1.0 - miss
    }

    /// Smooth cutoff value at a point.
    pub fn chi_at(&self, z: &[f64]) -> f64 {
        let (x, y) = self.split(z);
        let w = self.margin;
        Self::union_value(&self.boxes1, x, |iv, c| iv.profile(c, w))
            * Self::union_value(&self.boxes2, y, |iv, c| iv.profile(c, w))
    }

    /// Sharp indicator of `Ω1 x Ω2` (boundary points weighted 1/2).
    pub fn indicator_at(&self, z: &[f64]) -> f64 {
        let (x, y) = self.split(z);
        Self::union_value(&self.boxes1, x, |iv, c| iv.indicator(c))
            * Self::union_value(&self.boxes2, y, |iv, c| iv.indicator(c))
    }
}

fn check_region_grid(region: &ControlRegion, grid: &WaveguideGrid) -> Result<()> {
    region.validate()?;
    if region.m() != grid.m() || region.n() != grid.n() {
        return Err(Error::InvalidRegion(format!(
            "region is for m = {}, n = {} but the grid has m = {}, n = {}",
            region.m(),
            region.n(),
            grid.m(),
            grid.n()
        )));
    }
    for a in 0..grid.m() {
        if grid.points()[a] % grid.supercell() != 0 {
            return Err(Error::InvalidGrid(format!(
                "axis {a}: {} points are not divisible by L = {}",
                grid.points()[a],
                grid.supercell()
            )));
        }
    }
    Ok(())
}

/// Per-axis coordinates used for cutoff sampling. Euclidean axes use the
/// cell-local index so every supercell copy sees bit-identical inputs.
fn cell_coordinate(grid: &WaveguideGrid, axis: usize, i: usize) -> f64 {
    if grid.is_euclidean(axis) {
        let per_cell = grid.points()[axis] / grid.supercell();
        (i % per_cell) as f64 * grid.spacing(axis)
    } else {
        grid.coordinate(axis, i)
    }
}

fn sample_on_grid(grid: &WaveguideGrid, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut multi = vec![0usize; grid.dim()];
    let mut z = vec![0.0; grid.dim()];
    (0..grid.len())
        .map(|idx| {
            grid.unflatten(idx, &mut multi);
            for a in 0..grid.dim() {
                z[a] = cell_coordinate(grid, a, multi[a]);
            }
            f(&z)
        })
        .collect()
}

/// Sharp indicator of `Ω1 x Ω2` on `grid`, with weight 1/2 on boundary points.
pub fn sharp_indicator(region: &ControlRegion, grid: &WaveguideGrid) -> Result<Vec<f64>> {
    check_region_grid(region, grid)?;
    Ok(sample_on_grid(grid, |z| region.indicator_at(z)))
}

/// Sampled spatial cutoff `χ_Ω`.
#[derive(Clone, Debug)]
pub struct CutoffChi {
    region: Option<ControlRegion>,
    grid: Arc<WaveguideGrid>,
    values: Vec<f64>,
}

/// Builds `χ_Ω` on `grid`, sampling the analytic tensor-product profile.
pub fn build_chi(region: &ControlRegion, grid: &Arc<WaveguideGrid>) -> Result<CutoffChi> {
    check_region_grid(region, grid)?;
    if region.is_full() {
        return Ok(CutoffChi {
            region: Some(region.clone()),
            grid: grid.clone(),
            values: vec![1.0; grid.len()],
        });
    }
    // Three samples across every transition layer.
    for a in 0..grid.dim() {
        let h = grid.spacing(a);
        let smoothed = if a < grid.m() {
            region.boxes1.iter().any(|b| !b[a].is_full())
        } else {
            region.boxes2.iter().any(|b| !b[a - grid.m()].is_full())
        };
        if smoothed && region.margin < 2.0 * h * (1.0 - 1e-12) {
            let min_points = if region.margin > 0.0 {
                let need = (2.0 * grid.period(a) / region.margin).ceil() as usize;
                let step = if grid.is_euclidean(a) {
                    2 * grid.supercell() / gcd(2, grid.supercell())
                } else {
                    2
                };
                need.div_ceil(step) * step
            } else {
                usize::MAX
            };
            return Err(Error::Unresolved {
                axis: a,
                margin: region.margin,
                min_points,
            });
        }
    }
    Ok(CutoffChi {
        region: Some(region.clone()),
        grid: grid.clone(),
        values: sample_on_grid(grid, |z| region.chi_at(z)),
    })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl CutoffChi {
    /// `χ ≡ 1`.
    pub fn full(grid: &Arc<WaveguideGrid>) -> CutoffChi {
        CutoffChi {
            region: Some(ControlRegion::full(grid.m(), grid.n())),
            grid: grid.clone(),
            values: vec![1.0; grid.len()],
        }
    }

    /// A cutoff given directly by samples in `[0, 1]`, with no region attached.
    pub fn from_samples(grid: &Arc<WaveguideGrid>, values: Vec<f64>) -> Result<CutoffChi> {
        if values.len() != grid.len() {
            return Err(Error::Contract(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidRegion(format!("cutoff sample {v} outside [0, 1]")));
        }
        Ok(CutoffChi {
            region: None,
            grid: grid.clone(),
            values,
        })
    }

    pub fn region(&self) -> Option<&ControlRegion> {
        self.region.as_ref()
    }

    pub fn grid(&self) -> &Arc<WaveguideGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Width of the transition layer (the region margin).
    pub fn smoothness(&self) -> Option<f64> {
        self.region.as_ref().map(|r| r.margin)
    }

    pub fn is_identity(&self) -> bool {
        self.values.iter().all(|&v| v == 1.0)
    }

    pub fn field(&self) -> Field {
        Field::physical(
            &self.grid,
            self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
        .expect("cutoff samples match their grid")
    }

    /// Sharp indicator of the attached region (half weight on boundary points).
    pub fn sharp_indicator(&self) -> Option<Vec<f64>> {
        self.region
            .as_ref()
            .and_then(|r| sharp_indicator(r, &self.grid).ok())
    }

    /// `χ²` samples.
    pub fn squared(&self) -> Vec<f64> {
        self.values.iter().map(|v| v * v).collect()
    }
}

/// `[χ, (1-Δ)^{s/2}] f = χ (1-Δ)^{s/2} f - (1-Δ)^{s/2} (χ f)`, in physical form.
pub fn commutator_apply(chi: &CutoffChi, s: SobolevIndex, f: &Field) -> Field {
    let sigma = s.value();
    let a = f.bessel_potential(sigma).multiply_real(chi.values());
    let b = f.multiply_real(chi.values()).bessel_potential(sigma);
    a.sub(&b).expect("same grid")
}

/// `⟨[χ, A] f, g⟩ + ⟨f, [χ, A] g⟩` relative to `‖f‖ ‖g‖`, with `A = (1-Δ)^{s/2}`.
/// The commutator of two self-adjoint operators is skew, so this vanishes.
pub fn commutator_skew_residual(chi: &CutoffChi, s: SobolevIndex, f: &Field, g: &Field) -> Result<f64> {
    let cf = commutator_apply(chi, s, f);
    let cg = commutator_apply(chi, s, g);
    let sum = cf.l2_inner(g)? + f.l2_inner(&cg)?;
    Ok(sum.norm() / (f.l2_norm() * g.l2_norm()))
}

/// Growth of `‖[χ, (1-Δ)^{s/2}] e_k‖ / ‖e_k‖` along a sweep of plane waves.
#[derive(Clone, Debug, Serialize)]
pub struct CommutatorSweep {
    pub s: f64,
    pub frequencies: Vec<f64>,
    pub norms: Vec<f64>,
    /// Log-log slope of `norms` against `frequencies`; the commutator has
    /// order `s - 1`.
    pub slope: f64,
}

/// Applies the commutator to plane waves `e^{i k z_axis}` for each
/// wavenumber in `wavenumbers` and fits the growth exponent.
pub fn commutator_order_sweep(
    chi: &CutoffChi,
    s: SobolevIndex,
    axis: usize,
    wavenumbers: &[i64],
) -> Result<CommutatorSweep> {
    let grid = chi.grid();
    if axis >= grid.dim() || wavenumbers.len() < 2 {
        return Err(Error::InvalidParameter(
            "need a valid axis and at least two wavenumbers".into(),
        ));
    }
    let limit = grid.points()[axis] as i64 / 2;
    let mut frequencies = Vec::with_capacity(wavenumbers.len());
    let mut norms = Vec::with_capacity(wavenumbers.len());
    for &k in wavenumbers {
        if k <= 0 || k >= limit {
            return Err(Error::InvalidParameter(format!(
                "wavenumber {k} outside (0, {limit}) on axis {axis}"
            )));
        }
        let mut kv = vec![0i64; grid.dim()];
        kv[axis] = k;
        let e = Field::plane_wave(grid, &kv);
        norms.push(commutator_apply(chi, s, &e).l2_norm() / e.l2_norm());
        frequencies.push(k as f64 * grid.frequency_step(axis));
    }
    let slope = crate::numerics::loglog_slope(&frequencies, &norms);
    Ok(CommutatorSweep {
        s: s.value(),
        frequencies,
        norms,
        slope,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PhiProfile {
    Smooth,
    One,
}

/// Temporal cutoff `φ_T(t) = φ1(t / T)` with `φ1 = 1` on `t <= 1/2`,
/// `φ1 = 0` on `t >= 3/4`.
#[derive(Clone, Debug)]
pub struct TimeCutoff {
    horizon: f64,
    profile: PhiProfile,
    nodes: Vec<f64>,
    node_values: Vec<f64>,
}

/// `φ1` evaluated at a scaled time.
pub fn phi1(t: f64) -> f64 {
    1.0 - smooth_ramp((t - 0.5) / 0.25)
}

pub fn build_phi(horizon: f64, nodes: &[f64]) -> Result<TimeCutoff> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon T = {horizon} must be positive")));
    }
    let node_values = nodes.iter().map(|&t| phi1(t / horizon)).collect();
    Ok(TimeCutoff {
        horizon,
        profile: PhiProfile::Smooth,
        nodes: nodes.to_vec(),
        node_values,
    })
}

impl TimeCutoff {
    /// `φ ≡ 1` on the horizon.
    pub fn one(horizon: f64, nodes: &[f64]) -> Result<TimeCutoff> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon T = {horizon} must be positive")));
        }
        Ok(TimeCutoff {
            horizon,
            profile: PhiProfile::One,
            nodes: nodes.to_vec(),
            node_values: vec![1.0; nodes.len()],
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_one(&self) -> bool {
        self.profile == PhiProfile::One
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.profile {
            PhiProfile::Smooth => phi1(t / self.horizon),
            PhiProfile::One => 1.0,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node_values(&self) -> &[f64] {
        &self.node_values
    }

    /// Same profile resampled at other nodes.
    pub fn with_nodes(&self, nodes: &[f64]) -> TimeCutoff {
        TimeCutoff {
            horizon: self.horizon,
            profile: self.profile,
            nodes: nodes.to_vec(),
            node_values: nodes.iter().map(|&t| self.eval(t)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_region_gives_constant_one() {
        let g = WaveguideGrid::uniform(1, 1, 2, 16).unwrap();
        let chi = build_chi(&ControlRegion::full(1, 1), &g).unwrap();
        assert!(chi.values().iter().all(|&v| v == 1.0));
        assert!(chi.is_identity());
    }

    #[test]
    fn half_cell_plateau_and_zero() {
        let g = WaveguideGrid::new(1, 1, 1, &[32, 8]).unwrap();
        let region = ControlRegion::product(
            vec![Interval::new(0.0, PI)],
            vec![Interval::full()],
            PI / 8.0,
        )
        .unwrap();
        let chi = build_chi(&region, &g).unwrap();
        for j in 0..8 {
            assert_eq!(chi.values()[g.flatten(&[8, j])], 1.0); // x = π/2
            assert_eq!(chi.values()[g.flatten(&[24, j])], 0.0); // x = 3π/2
        }
    }

    #[test]
    fn sandwich_on_random_regions() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let g = WaveguideGrid::new(1, 1, 2, &[64, 32]).unwrap();
        for _ in 0..10 {
            let region = ControlRegion::random(&mut rng, 1, 1, 0.5);
            let chi = build_chi(&region, &g).unwrap();
            let mut z = [0.0; 2];
            for idx in 0..g.len() {
                g.point(idx, &mut z);
                let v = chi.values()[idx];
                assert!((0.0..=1.0).contains(&v));
                // independent indicator oracles on the raw intervals
                let inside = |iv: &Interval, x: f64, inset: f64, closed: bool| {
                    let lo = iv.lo + inset;
                    let hi = iv.hi - inset;
                    (-2..=2).any(|k| {
                        let xs = x + TWO_PI * k as f64;
                        if closed {
                            xs >= lo && xs <= hi
                        } else {
                            xs > lo && xs < hi
                        }
                    })
                };
                let b1 = &region.boxes1[0][0];
                let b2 = &region.boxes2[0][0];
                if inside(b1, z[0], 0.5, true) && inside(b2, z[1], 0.5, true) {
                    assert_eq!(v, 1.0, "χ must be 1 on Ω' at {z:?}");
                }
                if !(inside(b1, z[0], 0.0, false) && inside(b2, z[1], 0.0, false)) {
                    assert_eq!(v, 0.0, "χ must vanish off Ω at {z:?}");
                }
            }
        }
    }

    #[test]
    fn periodic_across_supercell_copies() {
        let g = WaveguideGrid::new(1, 1, 4, &[128, 32]).unwrap();
        let region = ControlRegion::product(
            vec![Interval::new(1.0, 4.0)],
            vec![Interval::new(0.5, 2.5)],
            0.4,
        )
        .unwrap();
        let chi = build_chi(&region, &g).unwrap();
        for i in 0..32 {
            for j in 0..32 {
                let base = chi.values()[g.flatten(&[i, j])];
                for c in 1..4 {
                    assert_eq!(chi.values()[g.flatten(&[i + 32 * c, j])], base);
                }
            }
        }
    }

    #[test]
    fn unresolved_margin_suggests_grid() {
        let g = WaveguideGrid::new(1, 1, 1, &[16, 16]).unwrap();
        let region = ControlRegion::product(
            vec![Interval::new(0.0, PI)],
            vec![Interval::new(0.0, PI)],
            PI / 8.0,
        )
        .unwrap();
        match build_chi(&region, &g) {
            Err(Error::Unresolved { min_points, .. }) => {
                assert_eq!(min_points, 32);
                let g2 = WaveguideGrid::new(1, 1, 1, &[min_points, min_points]).unwrap();
                assert!(build_chi(&region, &g2).is_ok());
            }
            other => panic!("expected Unresolved, got {other:?}"),
        }
    }

    #[test]
    fn invalid_regions_rejected() {
        assert!(ControlRegion::new(vec![], vec![vec![Interval::full()]], 0.1).is_err());
        assert!(ControlRegion::product(vec![Interval::new(1.0, 1.0)], vec![Interval::full()], 0.0).is_err());
        assert!(ControlRegion::product(vec![Interval::new(0.0, 0.5)], vec![Interval::full()], 0.3).is_err());
    }

    #[test]
    fn phi_profile() {
        let nodes: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0 * 2.0).collect();
        let phi = build_phi(2.0, &nodes).unwrap();
        assert_eq!(phi.eval(0.0), 1.0);
        assert_eq!(phi.eval(2.0), 0.0);
        let mid = phi.eval(1.2);
        assert!(mid > 0.0 && mid < 1.0);
        for w in phi.node_values().windows(2) {
            assert!(w[1] <= w[0]);
        }
        for (&t, &v) in nodes.iter().zip(phi.node_values()) {
            if t <= 1.0 {
                assert_eq!(v, 1.0);
            }
            if t >= 1.5 {
                assert_eq!(v, 0.0);
            }
        }
        assert!(build_phi(0.0, &nodes).is_err());
        assert!(build_phi(-1.0, &nodes).is_err());
    }

    #[test]
    fn commutator_trivial_cases() {
        let g = WaveguideGrid::uniform(1, 1, 1, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = Field::random(&g, &mut rng, 0.0);
        let one = CutoffChi::full(&g);
        assert!(commutator_apply(&one, SobolevIndex::new(1.0), &f).l2_norm() < 1e-12 * f.l2_norm());
        let region = ControlRegion::product(
            vec![Interval::new(0.0, PI)],
            vec![Interval::new(0.0, PI)],
            PI / 4.0,
        )
        .unwrap();
        let chi = build_chi(&region, &g).unwrap();
        assert!(commutator_apply(&chi, SobolevIndex::L2, &f).l2_norm() < 1e-13 * f.l2_norm());
    }

    #[test]
    fn commutator_order_and_skewness() {
        let g = WaveguideGrid::uniform(1, 1, 1, 128).unwrap();
        let region = ControlRegion::product(
            vec![Interval::new(0.0, PI)],
            vec![Interval::new(0.0, PI)],
            PI / 4.0,
        )
        .unwrap();
        let chi = build_chi(&region, &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f = Field::random(&g, &mut rng, 1.0);
        let h = Field::random(&g, &mut rng, 1.0);
        for s in [0.5, 1.0, 2.0] {
            let res = commutator_skew_residual(&chi, SobolevIndex::new(s), &f, &h).unwrap();
            assert!(res < 1e-12, "s = {s}: {res}");
        }
        let ks = [4, 8, 16, 32];
        for s in [1.0, 2.0] {
            let sweep = commutator_order_sweep(&chi, SobolevIndex::new(s), 1, &ks).unwrap();
            println!("{sweep:?}");
            assert!((sweep.slope - (s - 1.0)).abs() <= 0.3, "{sweep:?}");
        }
        assert!(commutator_order_sweep(&chi, SobolevIndex::new(1.0), 1, &[4, 64]).is_err());
    }
}
