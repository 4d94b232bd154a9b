//! Discrete partial Floquet-Bloch transform and stationary-estimate experiments.
//!
//! On the supercell the quasi-momenta are `α ∈ {0, 1/L, …, (L-1)/L}^m`. The
//! fiber `Π_α u(x, y) = e^{iα·x} Σ_{k ∈ {0..L-1}^m} e^{2πiα·k} u(x + 2πk, y)`
//! lives on the unit torus. A supercell mode `e^{iξ·x}` with `ξ = K/L` lands
//! in the single fiber `α = (-K mod L)/L` at fiber wavenumber `κ = ξ + α`,
//! with coefficient multiplied by `L^m`. The transform is implemented as this
//! re-indexing of spectral coefficients, which makes
//! `‖u‖² = L^{-m} Σ_α ‖Π_α u‖²` hold by construction.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Field, Representation};
use crate::grid::{same_grid, WaveguideGrid};
use crate::propagators::{fiber_wavenumber, linear_propagate, twisted_propagate};
use crate::regions::{sharp_indicator, ControlRegion};

/// Quasi-momentum `α = r / L` with integer `r ∈ {0..L-1}^m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuasiMomentum {
    numerators: Vec<usize>,
    supercell: usize,
}

impl QuasiMomentum {
    pub fn new(numerators: Vec<usize>, supercell: usize) -> Result<Self> {
        if supercell == 0 || numerators.iter().any(|&r| r >= supercell) {
            return Err(Error::InvalidParameter(format!(
                "quasi-momentum numerators {numerators:?} must lie in 0..{supercell}"
            )));
        }
        Ok(QuasiMomentum {
            numerators,
            supercell,
        })
    }

    pub fn numerators(&self) -> &[usize] {
        &self.numerators
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.numerators
            .iter()
            .map(|&r| r as f64 / self.supercell as f64)
            .collect()
    }

    /// All `L^m` quasi-momenta in lexicographic order.
    pub fn all(m: usize, supercell: usize) -> Vec<QuasiMomentum> {
        let count = supercell.pow(m as u32);
        (0..count)
            .map(|mut c| {
                let mut r = vec![0usize; m];
                for slot in r.iter_mut().rev() {
                    *slot = c % supercell;
                    c /= supercell;
                }
                QuasiMomentum {
                    numerators: r,
                    supercell,
                }
            })
            .collect()
    }
}

/// The `L^m` fibers of a supercell field.
#[derive(Clone, Debug)]
pub struct FiberBundle {
    parent: Arc<WaveguideGrid>,
    fiber_grid: Arc<WaveguideGrid>,
    fibers: Vec<(QuasiMomentum, Field)>,
}

impl FiberBundle {
    /// Assembles a bundle from parts; completeness is checked by [`floquet_inverse`].
    pub fn from_parts(
        parent: &Arc<WaveguideGrid>,
        fibers: Vec<(QuasiMomentum, Field)>,
    ) -> Result<FiberBundle> {
        let fiber_grid = fiber_grid(parent)?;
        for (q, f) in &fibers {
            if !same_grid(f.grid(), &fiber_grid) {
                return Err(Error::GridMismatch);
            }
            if q.supercell != parent.supercell() || q.numerators.len() != parent.m() {
                return Err(Error::InvalidParameter(format!(
                    "quasi-momentum {:?} does not belong to this supercell",
                    q.alpha()
                )));
            }
        }
        Ok(FiberBundle {
            parent: parent.clone(),
            fiber_grid,
            fibers,
        })
    }

    pub fn parent(&self) -> &Arc<WaveguideGrid> {
        &self.parent
    }

    pub fn fiber_grid(&self) -> &Arc<WaveguideGrid> {
        &self.fiber_grid
    }

    pub fn fibers(&self) -> &[(QuasiMomentum, Field)] {
        &self.fibers
    }

    pub fn fiber(&self, q: &QuasiMomentum) -> Option<&Field> {
        self.fibers.iter().find(|(p, _)| p == q).map(|(_, f)| f)
    }

    pub fn len(&self) -> usize {
        self.fibers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fibers.is_empty()
    }
}

/// Unit-torus grid carrying the fibers of `parent`.
pub fn fiber_grid(parent: &WaveguideGrid) -> Result<Arc<WaveguideGrid>> {
    let l = parent.supercell();
    let mut points = parent.points().to_vec();
    for (a, p) in points.iter_mut().enumerate().take(parent.m()) {
        if *p % l != 0 || (*p / l) % 2 != 0 || *p / l < 4 {
            return Err(Error::InvalidGrid(format!(
                "axis {a}: {p} points do not split into L = {l} cells of an even count >= 4"
            )));
        }
        *p /= l;
    }
    WaveguideGrid::new(parent.m(), parent.n(), 1, &points)
}

/// Fiber and fiber index receiving each supercell spectral index.
fn fiber_target(parent: &WaveguideGrid, fiber: &WaveguideGrid, idx: usize, multi: &mut [usize]) -> (usize, usize) {
    let l = parent.supercell() as i64;
    parent.unflatten(idx, multi);
    let mut fiber_id = 0usize;
    let mut k = vec![0i64; parent.dim()];
    for a in 0..parent.dim() {
        let kk = parent.wavenumber(a, multi[a]);
        if a < parent.m() {
            let r = (-kk).rem_euclid(l);
            fiber_id = fiber_id * l as usize + r as usize;
            k[a] = (kk + r) / l;
        } else {
            k[a] = kk;
        }
    }
    (fiber_id, fiber.index_of_wavenumbers(&k))
}

/// `u ↦ (Π_α u)_α`, fibers returned in spectral form, lexicographic in `α`.
pub fn floquet_forward(u: &Field) -> Result<FiberBundle> {
    let parent = u.grid().clone();
    let fg = fiber_grid(&parent)?;
    let scale = (parent.supercell() as f64).powi(parent.m() as i32);
    let qs = QuasiMomentum::all(parent.m(), parent.supercell());
    let mut coeffs = vec![vec![Complex64::default(); fg.len()]; qs.len()];
    let spec = u.as_spectral();
    let mut multi = vec![0usize; parent.dim()];
    for (idx, v) in spec.values().iter().enumerate() {
        let (f, j) = fiber_target(&parent, &fg, idx, &mut multi);
        coeffs[f][j] = v * scale;
    }
    let fibers = qs
        .into_iter()
        .zip(coeffs)
        .map(|(q, c)| (q, Field::spectral(&fg, c).expect("fiber size")))
        .collect();
    Ok(FiberBundle {
        parent,
        fiber_grid: fg,
        fibers,
    })
}

/// Reassembles the supercell field (spectral form).
pub fn floquet_inverse(bundle: &FiberBundle) -> Result<Field> {
    let parent = &bundle.parent;
    let fg = &bundle.fiber_grid;
    let qs = QuasiMomentum::all(parent.m(), parent.supercell());
    let scale = (parent.supercell() as f64).powi(parent.m() as i32);
    let l = parent.supercell() as i64;
    let mut out = vec![Complex64::default(); parent.len()];
    let mut multi = vec![0usize; fg.dim()];
    let mut k = vec![0i64; fg.dim()];
    for q in &qs {
        let matches: Vec<&Field> = bundle
            .fibers
            .iter()
            .filter(|(p, _)| p == q)
            .map(|(_, f)| f)
            .collect();
        let fiber = match matches.as_slice() {
            [f] => f.as_spectral(),
            [] => {
                return Err(Error::Contract(format!("fiber α = {:?} is missing", q.alpha())));
            }
            _ => {
                return Err(Error::Contract(format!("fiber α = {:?} appears twice", q.alpha())));
            }
        };
        let alpha = q.alpha();
        for (j, v) in fiber.values().iter().enumerate() {
            fg.unflatten(j, &mut multi);
            for a in 0..fg.dim() {
                k[a] = if a < fg.m() {
                    l * fiber_wavenumber(fg.points()[a], multi[a], alpha[a]) - q.numerators[a] as i64
                } else {
                    fg.wavenumber(a, multi[a])
                };
            }
            out[parent.index_of_wavenumbers(&k)] = v / scale;
        }
    }
    Field::spectral(parent, out)
}

/// `max_α ‖Π_α(e^{itΔ}u) - e^{itH_α} Π_α u‖_{L²(fiber)}`.
pub fn fiber_commutes_with_flow(u: &Field, t: f64) -> Result<f64> {
    let lhs = floquet_forward(&linear_propagate(u, t))?;
    let rhs = floquet_forward(u)?;
    let worst = lhs
        .fibers
        .par_iter()
        .zip(rhs.fibers.par_iter())
        .map(|((q, a), (_, b))| {
            let flowed = twisted_propagate(b, &q.alpha(), t)?.field;
            Ok(a.sub(&flowed)?.l2_norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// Signed lattice vectors with `L²|ξ|² = q`, resolved on `grid`.
pub fn eigenspace(grid: &WaveguideGrid, scaled_q: u64) -> Vec<usize> {
    (0..grid.len())
        .filter(|&idx| grid.scaled_xi2()[idx] == scaled_q)
        .collect()
}

/// `min_c Σ w|u_c|² / ‖u_c‖²` over the eigenspace spanned by the plane waves
/// at spectral indices `modes`, exactly, from the dense weighted mass matrix.
pub fn weighted_eigenspace_minimum(grid: &WaveguideGrid, weight_hat: &[Complex64], modes: &[usize]) -> f64 {
    let d = modes.len();
    let mut mk = vec![vec![0i64; grid.dim()]; d];
    let mut multi = vec![0usize; grid.dim()];
    for (i, &idx) in modes.iter().enumerate() {
        grid.unflatten(idx, &mut multi);
        for a in 0..grid.dim() {
            mk[i][a] = grid.wavenumber(a, multi[a]);
        }
    }
    let mut diff = vec![0i64; grid.dim()];
    let m = DMatrix::from_fn(d, d, |i, j| {
        for a in 0..grid.dim() {
            diff[a] = mk[i][a] - mk[j][a];
        }
        weight_hat[grid.index_of_wavenumbers(&diff)]
    });
    // Hermitian up to rounding; symmetrize before the solve.
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(m);
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Normalized Fourier coefficients `ŵ(η)` of a real weight (so `ŵ(0)` is its mean).
pub fn weight_spectrum(grid: &Arc<WaveguideGrid>, weight: &[f64]) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = weight.iter().map(|&w| Complex64::new(w, 0.0)).collect();
    grid.forward_in_place(&mut v);
    v
}

#[derive(Clone, Debug)]
pub struct ResolventConfig {
    /// Eigenvalues `-|ξ|²` with `|ξ|² <= cap` are scanned.
    pub xi2_cap: f64,
    /// Random `(u, λ)` pairs for the inhomogeneous family.
    pub probes: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenRow {
    pub lambda: f64,
    pub dim: usize,
    pub worst_ratio: f64,
    pub empirical_c: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeRow {
    pub lambda: f64,
    pub ratio: f64,
    pub empirical_c: f64,
}

#[derive(Clone, Debug)]
pub struct ResolventReport {
    pub eigen: Vec<EigenRow>,
    pub probes: Vec<ProbeRow>,
}

impl ResolventReport {
    pub fn empirical_constant(&self) -> f64 {
        self.eigen.last().map_or(0.0, |r| r.empirical_c)
    }

    /// `lambda,dim,worst_ratio,empirical_c` rows for the eigenfunction family.
    pub fn write_eigen_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "dim", "worst_ratio", "empirical_c"])?;
        for r in &self.eigen {
            w.write_record(&[
                format!("{:e}", r.lambda),
                r.dim.to_string(),
                format!("{:e}", r.worst_ratio),
                format!("{:e}", r.empirical_c),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_probe_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "ratio", "empirical_c"])?;
        for r in &self.probes {
            w.write_record(&[
                format!("{:e}", r.lambda),
                format!("{:e}", r.ratio),
                format!("{:e}", r.empirical_c),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Stationary-estimate experiments for `‖u‖ <= C(‖(Δ-λ)u‖ + ‖u‖_{L²(Ω)})`.
///
/// Family (a) scans every lattice eigenvalue `λ = -|ξ|²` up to the cap and
/// computes the exact worst ratio `‖u‖ / ‖u‖_{L²(Ω)}` over its eigenspace.
/// Family (b) draws random band-limited `u` and real `λ`, with `f = (Δ-λ)u`.
/// `L²(Ω)` uses the sharp indicator of `Ω1 x Ω2` with half weights on
/// boundary points.
pub fn resolvent_ratio(
    grid: &Arc<WaveguideGrid>,
    region: &ControlRegion,
    cfg: &ResolventConfig,
) -> Result<ResolventReport> {
    let indicator = sharp_indicator(region, grid)?;
    resolvent_ratio_with_weight(grid, &indicator, cfg)
}

/// As [`resolvent_ratio`] with an explicit observation weight.
pub fn resolvent_ratio_with_weight(
    grid: &Arc<WaveguideGrid>,
    weight: &[f64],
    cfg: &ResolventConfig,
) -> Result<ResolventReport> {
    let measure: f64 = weight.iter().sum::<f64>();
    if measure <= 0.0 {
        return Err(Error::InvalidRegion("region has zero measure on this grid".into()));
    }
    let what = weight_spectrum(grid, weight);
    let cap = (cfg.xi2_cap / grid.xi2_unit()).floor() as u64;
    let mut levels: Vec<u64> = grid
        .scaled_xi2()
        .iter()
        .copied()
        .filter(|&q| q <= cap)
        .collect();
    levels.sort_unstable();
    levels.dedup();
    let rows: Vec<(f64, usize, f64)> = levels
        .par_iter()
        .map(|&q| {
            let modes = eigenspace(grid, q);
            let lam = weighted_eigenspace_minimum(grid, &what, &modes);
            (-(q as f64) * grid.xi2_unit(), modes.len(), 1.0 / lam.max(0.0).sqrt())
        })
        .collect();
    let mut running = 0.0f64;
    let eigen = rows
        .into_iter()
        .map(|(lambda, dim, worst_ratio)| {
            running = running.max(worst_ratio);
            EigenRow {
                lambda,
                dim,
                worst_ratio,
                empirical_c: running,
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let band: Vec<i64> = (0..grid.dim())
        .map(|a| {
            let k = (cfg.xi2_cap.sqrt() / grid.frequency_step(a)).floor() as i64;
            k.min(grid.points()[a] as i64 / 2 - 1)
        })
        .collect();
    let mut running = 0.0f64;
    let mut probes = Vec::with_capacity(cfg.probes);
    for _ in 0..cfg.probes {
        use rand::Rng;
        let u = Field::random_band_limited(grid, &mut rng, &band);
        let lambda = -rng.gen_range(0.0..cfg.xi2_cap);
        let f = u.apply_indexed_multiplier(|idx| Complex64::new(-grid.xi2(idx) - lambda, 0.0));
        let ratio = u.l2_norm() / (f.l2_norm() + u.weighted_l2_norm(weight));
        running = running.max(ratio);
        probes.push(ProbeRow {
            lambda,
            ratio,
            empirical_c: running,
        });
    }
    Ok(ResolventReport { eigen, probes })
}

/// Zero fiber bundle for `parent`.
pub fn zero_bundle(parent: &Arc<WaveguideGrid>) -> Result<FiberBundle> {
    let fg = fiber_grid(parent)?;
    let fibers = QuasiMomentum::all(parent.m(), parent.supercell())
        .into_iter()
        .map(|q| (q, Field::zeros(&fg, Representation::Spectral)))
        .collect();
    Ok(FiberBundle {
        parent: parent.clone(),
        fiber_grid: fg,
        fibers,
    })
}
