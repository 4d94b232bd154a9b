//! The HUM Gramian as a matrix-free operator and observability constants.
//!
//! For a quadrature `(t_j, w_j)` on `[0, T]`, cutoffs `χ`, `φ` and regularity `s`,
//!
//! ```text
//! G v = Σ_j w_j e^{-it_jΔ} [ φ(t_j) χ (1-Δ)^{-s} φ(t_j) χ e^{it_jΔ} v ]
//! ```
//!
//! so that `⟨Gv, v⟩ = Σ_j w_j ‖φ(t_j) χ e^{it_jΔ} v‖²_{H^{-s}}`. `G` is
//! Hermitian and positive semi-definite for every rule with positive weights.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Field, SobolevIndex};
use crate::floquet::{eigenspace, weight_spectrum, weighted_eigenspace_minimum};
use crate::grid::{same_grid, WaveguideGrid};
use crate::krylov::{smallest_eigenpair, LanczosConfig, LinearOperator};
use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use crate::numerics::{dot, gauss_legendre, norm};
use crate::propagators::{apply_phase_table, linear_propagate};
use crate::regions::{build_phi, commutator_apply, CutoffChi, TimeCutoff};

/// Nodes reduced per parallel task; fixed so the summation order never
/// depends on the thread count.
const NODE_CHUNK: usize = 4;

/// Composite Gauss-Legendre rule on `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    horizon: f64,
    panels: usize,
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub fn gauss_legendre(horizon: f64, panels: usize, order: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon T = {horizon} must be positive")));
        }
        if panels == 0 || order == 0 {
            return Err(Error::InvalidParameter("quadrature needs at least one panel and one node".into()));
        }
        let (x, w) = gauss_legendre(order);
        let h = horizon / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let a = p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(a + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        Ok(Quadrature {
            horizon,
            panels,
            order,
            nodes,
            weights,
        })
    }

    /// Composite midpoint rule; its nodes are the midpoints of `panels` equal steps.
    pub fn midpoint(horizon: f64, panels: usize) -> Result<Self> {
        Self::gauss_legendre(horizon, panels, 1)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same order, twice the panels.
    pub fn refined(&self) -> Self {
        Self::gauss_legendre(self.horizon, 2 * self.panels, self.order).expect("valid rule")
    }
}

/// Everything defining the Gramian.
#[derive(Clone, Debug)]
pub struct GramianSpec {
    grid: Arc<WaveguideGrid>,
    s: SobolevIndex,
    chi: CutoffChi,
    phi: TimeCutoff,
    quadrature: Quadrature,
    /// `e^{-it_j|ξ|²}` tables per node.
    phases: Vec<Vec<Complex64>>,
    /// `⟨ξ⟩^{-2s}` per spectral index.
    smoothing: Vec<f64>,
}

impl GramianSpec {
    /// `smooth_phi = false` means `φ ≡ 1`.
    pub fn new(chi: CutoffChi, s: SobolevIndex, quadrature: Quadrature, smooth_phi: bool) -> Result<Self> {
        let nodes = quadrature.nodes().to_vec();
        let phi = if smooth_phi {
            build_phi(quadrature.horizon(), &nodes)?
        } else {
            TimeCutoff::one(quadrature.horizon(), &nodes)?
        };
        Self::with_phi(chi, s, quadrature, phi)
    }

    pub fn with_phi(chi: CutoffChi, s: SobolevIndex, quadrature: Quadrature, phi: TimeCutoff) -> Result<Self> {
        if quadrature.len() < 8 {
            return Err(Error::InvalidParameter(format!(
                "quadrature has {} nodes, at least 8 are required",
                quadrature.len()
            )));
        }
        if (phi.horizon() - quadrature.horizon()).abs() > 1e-12 * quadrature.horizon() {
            return Err(Error::InvalidParameter("time cutoff and quadrature disagree on T".into()));
        }
        let phi = phi.with_nodes(quadrature.nodes());
        let grid = chi.grid().clone();
        let phases = quadrature
            .nodes()
            .iter()
            .map(|&t| grid.free_phase_table(t))
            .collect();
        let smoothing = (0..grid.len())
            .map(|idx| (1.0 + grid.xi2(idx)).powf(-s.value()))
            .collect();
        Ok(GramianSpec {
            grid,
            s,
            chi,
            phi,
            quadrature,
            phases,
            smoothing,
        })
    }

    pub fn grid(&self) -> &Arc<WaveguideGrid> {
        &self.grid
    }

    pub fn horizon(&self) -> f64 {
        self.quadrature.horizon()
    }

    pub fn s(&self) -> SobolevIndex {
        self.s
    }

    pub fn chi(&self) -> &CutoffChi {
        &self.chi
    }

    pub fn phi(&self) -> &TimeCutoff {
        &self.phi
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quadrature
    }

    /// Same data with a different quadrature.
    pub fn with_quadrature(&self, quadrature: Quadrature) -> Result<Self> {
        let phi = self.phi.with_nodes(quadrature.nodes());
        Self::with_phi(self.chi.clone(), self.s, quadrature, phi)
    }

    /// Same data observing through the sharp indicator of the region instead of `χ²`.
    pub fn sharp_variant(&self) -> Result<Self> {
        let ind = self.chi.sharp_indicator().ok_or_else(|| {
            Error::InvalidRegion("cutoff has no region attached, no sharp indicator".into())
        })?;
        let chi = CutoffChi::from_samples(&self.grid, ind.iter().map(|v| v.sqrt()).collect())?;
        Self::with_phi(chi, self.s, self.quadrature.clone(), self.phi.clone())
    }

    /// Upper bound `Σ_j w_j φ_j² · max χ² · max ⟨ξ⟩^{-2s}` for `‖G‖`.
    pub fn norm_estimate(&self) -> f64 {
        let time: f64 = self
            .quadrature
            .weights()
            .iter()
            .zip(self.phi.node_values())
            .map(|(w, p)| w * p * p)
            .sum();
        let chi_max = self.chi.values().iter().fold(0.0f64, |a, &v| a.max(v * v));
        let smooth_max = self.smoothing.iter().fold(0.0f64, |a, &v| a.max(v));
        time * chi_max * smooth_max
    }

    /// Gramian on spectral coefficients.
    pub fn apply_spectral(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.len();
        let active: Vec<usize> = (0..self.quadrature.len())
            .filter(|&j| self.phi.node_values()[j] != 0.0)
            .collect();
        let identity_smoothing = self.s.value() == 0.0;
        let partials: Vec<Vec<Complex64>> = active
            .par_chunks(NODE_CHUNK)
            .map(|chunk| {
                let mut acc = vec![Complex64::default(); n];
                let mut buf = vec![Complex64::default(); n];
                for &j in chunk {
                    let table = &self.phases[j];
                    let phi = self.phi.node_values()[j];
                    buf.copy_from_slice(v);
                    apply_phase_table(&self.grid, &mut buf, table);
                    self.grid.inverse_in_place(&mut buf);
                    if identity_smoothing {
                        let p2 = phi * phi;
                        buf.iter_mut()
                            .zip(self.chi.values())
                            .for_each(|(b, &c)| *b *= p2 * c * c);
                    } else {
                        buf.iter_mut()
                            .zip(self.chi.values())
                            .for_each(|(b, &c)| *b *= phi * c);
                        self.grid.forward_in_place(&mut buf);
                        buf.iter_mut()
                            .zip(&self.smoothing)
                            .for_each(|(b, &m)| *b *= m);
                        self.grid.inverse_in_place(&mut buf);
                        buf.iter_mut()
                            .zip(self.chi.values())
                            .for_each(|(b, &c)| *b *= phi * c);
                    }
                    self.grid.forward_in_place(&mut buf);
                    let w = self.quadrature.weights()[j];
                    for ((a, b), &q) in acc.iter_mut().zip(&buf).zip(self.grid.scaled_xi2()) {
                        *a += b * table[q as usize].conj() * w;
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![Complex64::default(); n];
        for p in &partials {
            out.iter_mut().zip(p).for_each(|(o, v)| *o += v);
        }
        out
    }
}

impl LinearOperator for GramianSpec {
    fn dim(&self) -> usize {
        self.grid.len()
    }
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.apply_spectral(x)
    }
}

/// Two-level preconditioner `M ≈ G^{-1}`.
///
/// Low frequencies (`|ξ_a| <= cap` on every axis) are inverted exactly from
/// the dense block `G_VV`. On the complement, `G` is replaced by its
/// mean-field separable model `⊗_a Ḡ_a`, where `Ḡ_a` is the one-axis Gramian
/// of the `a`-marginal of `χ²`. The model is exact for product cutoffs once
/// the per-axis flows decorrelate, which is the regime of high frequencies.
#[derive(Clone, Debug)]
pub struct GramianPreconditioner {
    grid: Arc<WaveguideGrid>,
    coarse: Vec<usize>,
    in_coarse: Vec<bool>,
    coarse_chol: Cholesky<Complex64, nalgebra::Dyn>,
    coarse_block: DMatrix<Complex64>,
    axis_inv: Vec<DMatrix<Complex64>>,
    sobolev: Vec<f64>,
}

impl GramianPreconditioner {
    /// `None` when a block is not positive definite, which happens exactly
    /// when the observation misses a whole frequency band.
    pub fn build(spec: &GramianSpec, cap: f64) -> Option<Self> {
        let grid = spec.grid().clone();
        let d = grid.dim();
        let mut f = vec![0.0; d];
        let coarse: Vec<usize> = (0..grid.len())
            .filter(|&idx| {
                grid.frequency_vector(idx, &mut f);
                f.iter().all(|v| v.abs() <= cap)
            })
            .collect();
        let mut in_coarse = vec![false; grid.len()];
        coarse.iter().for_each(|&i| in_coarse[i] = true);

        let nv = coarse.len();
        let mut block = DMatrix::<Complex64>::zeros(nv, nv);
        let mut e = vec![Complex64::default(); grid.len()];
        for (c, &j) in coarse.iter().enumerate() {
            e[j] = Complex64::new(1.0, 0.0);
            let col = spec.apply_spectral(&e);
            e[j] = Complex64::default();
            for (r, &i) in coarse.iter().enumerate() {
                block[(r, c)] = col[i];
            }
        }
        let block = (&block + block.adjoint()) * Complex64::new(0.5, 0.0);
        let coarse_chol = Cholesky::new(block.clone())?;

        let time: f64 = spec
            .quadrature()
            .weights()
            .iter()
            .zip(spec.phi().node_values())
            .map(|(w, p)| w * p * p)
            .sum();
        let chi2 = spec.chi().squared();
        let mean = chi2.iter().sum::<f64>() / chi2.len() as f64;
        if !(time > 0.0 && mean > 0.0) {
            return None;
        }
        let mut axis_inv = Vec::with_capacity(d);
        let mut multi = vec![0usize; d];
        for a in 0..d {
            let na = grid.points()[a];
            let mut marginal = vec![0.0; na];
            for (idx, &c) in chi2.iter().enumerate() {
                grid.unflatten(idx, &mut multi);
                marginal[multi[a]] += c;
            }
            let per_line = (grid.len() / na) as f64;
            marginal.iter_mut().for_each(|v| *v /= per_line);
            let hat: Vec<Complex64> = (0..na)
                .map(|k| {
                    marginal
                        .iter()
                        .enumerate()
                        .map(|(x, &v)| v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (k * x) as f64 / na as f64))
                        .sum::<Complex64>()
                        / na as f64
                })
                .collect();
            let freq: Vec<f64> = (0..na).map(|i| grid.frequency(a, i)).collect();
            let m = DMatrix::from_fn(na, na, |i, j| {
                let dk = (grid.wavenumber(a, i) - grid.wavenumber(a, j)).rem_euclid(na as i64) as usize;
                let gap = freq[i] * freq[i] - freq[j] * freq[j];
                let phase: Complex64 = spec
                    .quadrature()
                    .nodes()
                    .iter()
                    .zip(spec.quadrature().weights())
                    .zip(spec.phi().node_values())
                    .map(|((&t, &w), &p)| Complex64::from_polar(w * p * p, t * gap))
                    .sum();
                hat[dk] * phase
            });
            let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
            axis_inv.push(Cholesky::new(m)?.inverse());
        }
        let scale = (time * mean).powi(d as i32 - 1);
        axis_inv[0] *= Complex64::new(scale, 0.0);
        let sobolev = (0..grid.len())
            .map(|idx| (1.0 + grid.xi2(idx)).powf(spec.s().value()))
            .collect();
        Some(GramianPreconditioner {
            grid,
            coarse,
            in_coarse,
            coarse_chol,
            coarse_block: block,
            axis_inv,
            sobolev,
        })
    }

    pub fn coarse_dim(&self) -> usize {
        self.coarse.len()
    }

    /// Lowest eigenvector of the coarse block, embedded in the full space.
    pub fn coarse_ground_state(&self) -> Vec<Complex64> {
        let eig = SymmetricEigen::new(self.coarse_block.clone());
        let imin = (0..self.coarse.len())
            .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
            .unwrap_or(0);
        let mut out = vec![Complex64::default(); self.grid.len()];
        for (r, &i) in self.coarse.iter().enumerate() {
            out[i] = eig.eigenvectors[(r, imin)];
        }
        out
    }

    fn apply_axis(&self, data: &mut [Complex64], axis: usize) {
        let len = self.grid.points()[axis];
        let stride = self.grid.strides()[axis];
        let m = &self.axis_inv[axis];
        let block = len * stride;
        let mut line = vec![Complex64::default(); len];
        for chunk in data.chunks_exact_mut(block) {
            for j in 0..stride {
                for i in 0..len {
                    line[i] = chunk[i * stride + j];
                }
                for i in 0..len {
                    let mut acc = Complex64::default();
                    for k in 0..len {
                        acc += m[(i, k)] * line[k];
                    }
                    chunk[i * stride + j] = acc;
                }
            }
        }
    }
}

impl LinearOperator for GramianPreconditioner {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, r: &[Complex64]) -> Vec<Complex64> {
        let half = |v: &mut [Complex64]| {
            v.iter_mut()
                .zip(&self.sobolev)
                .zip(&self.in_coarse)
                .for_each(|((x, &w), &c)| *x = if c { Complex64::default() } else { *x * w.sqrt() });
        };
        let mut z = r.to_vec();
        half(&mut z);
        for a in 0..self.grid.dim() {
            self.apply_axis(&mut z, a);
        }
        half(&mut z);
        let rhs = DMatrix::from_iterator(self.coarse.len(), 1, self.coarse.iter().map(|&i| r[i]));
        let sol = self.coarse_chol.solve(&rhs);
        for (k, &i) in self.coarse.iter().enumerate() {
            z[i] = sol[(k, 0)];
        }
        z
    }
}

/// `G w`, returned in spectral form.
pub fn gramian_apply(spec: &GramianSpec, w: &Field) -> Result<Field> {
    if !same_grid(w.grid(), spec.grid()) {
        return Err(Error::GridMismatch);
    }
    let out = spec.apply_spectral(w.as_spectral().values());
    Field::spectral(spec.grid(), out)
}

/// `Σ_j w_j ‖φ_j χ e^{it_jΔ} v‖²_{H^{-s}}` evaluated through field operations.
pub fn observed_energy(spec: &GramianSpec, v: &Field) -> f64 {
    let q = spec.quadrature();
    q.nodes()
        .iter()
        .zip(q.weights())
        .zip(spec.phi().node_values())
        .map(|((&t, &w), &p)| {
            let x = linear_propagate(v, t).multiply_real(spec.chi().values());
            w * p * p * x.sobolev_norm(-spec.s()).powi(2)
        })
        .sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct ObservabilityReport {
    /// Smallest eigenvalue of `G` (an upper bound when `failure` is set).
    pub lambda_min: f64,
    /// `1 / λ_min`; absent on failure.
    pub c_obs: Option<f64>,
    /// `‖G y - λ y‖` for the returned unit vector.
    pub residual: f64,
    pub norm_estimate: f64,
    pub lanczos_iterations: usize,
    pub cg_iterations: Vec<usize>,
    pub failure: Option<String>,
    #[serde(skip)]
    pub extremal: Option<Field>,
}

impl ObservabilityReport {
    pub fn is_certified(&self, tol: f64) -> bool {
        self.failure.is_none() && self.residual <= tol * self.norm_estimate
    }
}

#[derive(Clone, Debug)]
pub struct EigenSolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub seed: u64,
    /// Frequency cap of the exactly inverted block in the preconditioner;
    /// `None` runs plain conjugate gradients.
    pub coarse_cap: Option<f64>,
}

impl Default for EigenSolverSettings {
    fn default() -> Self {
        EigenSolverSettings {
            tol: 1e-8,
            max_iter: 60,
            inner_tol: 1e-11,
            inner_max_iter: 4000,
            seed: 0x0b5e,
            coarse_cap: Some(8.0),
        }
    }
}

/// `λ_min(G)` and `C_obs = 1/λ_min` for an `L²` (s = 0) Gramian.
pub fn observability_constant(spec: &GramianSpec, settings: &EigenSolverSettings) -> Result<ObservabilityReport> {
    if spec.s().value() != 0.0 {
        return Err(Error::Contract(format!(
            "observability_constant needs s = 0, got s = {}",
            spec.s().value()
        )));
    }
    let grid = spec.grid();
    let precond = settings.coarse_cap.and_then(|cap| GramianPreconditioner::build(spec, cap));
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut start = Field::random(grid, &mut rng, 0.0).into_values();
    if let Some(p) = &precond {
        // a small random admixture keeps the start generic
        let ground = p.coarse_ground_state();
        let noise = 1e-3 / norm(&start);
        start.iter_mut().zip(&ground).for_each(|(s, g)| *s = g + *s * noise);
    }
    let norm_estimate = spec.norm_estimate();
    let cfg = LanczosConfig {
        max_iter: settings.max_iter,
        tol: settings.tol,
        norm_estimate,
        inner_tol: settings.inner_tol,
        inner_max_iter: settings.inner_max_iter,
    };
    let pre = precond.as_ref().map(|p| p as &dyn LinearOperator);
    match smallest_eigenpair(spec, pre, &start, &cfg) {
        Ok(out) => {
            let failure = if out.eigenvalue <= 1e-12 * norm_estimate {
                Some(format!("λ_min = {:e} is numerically zero", out.eigenvalue))
            } else if !out.converged {
                Some(format!(
                    "Ritz residual {:e} above target {:e} after {} Lanczos steps",
                    out.residual,
                    settings.tol * norm_estimate,
                    out.iterations
                ))
            } else {
                None
            };
            Ok(ObservabilityReport {
                lambda_min: out.eigenvalue,
                c_obs: failure.is_none().then(|| 1.0 / out.eigenvalue),
                residual: out.residual,
                norm_estimate,
                lanczos_iterations: out.iterations,
                cg_iterations: out.inner_iterations,
                failure,
                extremal: Field::spectral(grid, out.vector).ok(),
            })
        }
        Err(fail) => {
            // Rayleigh quotient of the start vector still bounds λ_min from above.
            let g = spec.apply_spectral(&start);
            let rq = dot(&g, &start).re / dot(&start, &start).re;
            Ok(ObservabilityReport {
                lambda_min: rq,
                c_obs: None,
                residual: f64::NAN,
                norm_estimate,
                lanczos_iterations: fail.iterations,
                cg_iterations: fail.inner_iterations,
                failure: Some(fail.message),
                extremal: None,
            })
        }
    }
}

/// Doubles the panel count until `⟨Gw,w⟩` moves by less than `tol` (relative)
/// on every probe. Returns the converged spec and the history of the largest change.
pub fn converge_quadrature(
    spec: &GramianSpec,
    probes: &[Field],
    tol: f64,
    max_doublings: usize,
) -> Result<(GramianSpec, Vec<f64>)> {
    let energies = |s: &GramianSpec| -> Vec<f64> {
        probes
            .iter()
            .map(|p| {
                let v = p.as_spectral();
                dot(&s.apply_spectral(v.values()), v.values()).re
            })
            .collect()
    };
    let mut current = spec.clone();
    let mut prev = energies(&current);
    let mut history = Vec::new();
    for _ in 0..max_doublings {
        let next = current.with_quadrature(current.quadrature().refined())?;
        let e = energies(&next);
        let change = prev
            .iter()
            .zip(&e)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1e-300))
            .fold(0.0, f64::max);
        history.push(change);
        current = next;
        prev = e;
        if change < tol {
            return Ok((current, history));
        }
    }
    Err(Error::ObservabilityFailure(format!(
        "quadrature did not converge to {tol:e} after {max_doublings} doublings (last change {:e})",
        history.last().copied().unwrap_or(f64::NAN)
    )))
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenmodeObservation {
    pub lambda: f64,
    pub dim: usize,
    /// `min` over the eigenspace of `∫ φ² ‖χ u‖² dt / ‖u‖²`.
    pub observed_fraction: f64,
}

/// Observation of every lattice eigenspace with `|ξ|² <= cap`. A zero row
/// would be an unobservable eigenfunction.
pub fn eigenmode_observation_table(spec: &GramianSpec, xi2_cap: f64) -> Vec<EigenmodeObservation> {
    let grid = spec.grid();
    let time: f64 = spec
        .quadrature()
        .weights()
        .iter()
        .zip(spec.phi().node_values())
        .map(|(w, p)| w * p * p)
        .sum();
    let what = weight_spectrum(grid, &spec.chi().squared());
    let cap = (xi2_cap / grid.xi2_unit()).floor() as u64;
    let mut levels: Vec<u64> = grid.scaled_xi2().iter().copied().filter(|&q| q <= cap).collect();
    levels.sort_unstable();
    levels.dedup();
    levels
        .par_iter()
        .map(|&q| {
            let modes = eigenspace(grid, q);
            EigenmodeObservation {
                lambda: -(q as f64) * grid.xi2_unit(),
                dim: modes.len(),
                observed_fraction: time * weighted_eigenspace_minimum(grid, &what, &modes),
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakObservabilityProbe {
    /// `‖u0‖²_{H^s}`
    pub energy: f64,
    /// `∫ φ² ‖χ e^{itΔ} u0‖²_{H^s} dt`
    pub observed: f64,
    /// `‖u0‖²_{H^{s-1}}`
    pub lower_order: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakObservabilityReport {
    pub probes: Vec<WeakObservabilityProbe>,
    pub c0: f64,
    pub c: f64,
    /// Largest relative residual of the commutator identity over probes and nodes.
    pub identity_residual: f64,
    pub all_valid: bool,
}

/// Fits `‖u0‖²_{H^s} <= 2C0 ∫‖χe^{itΔ}u0‖²_{H^s} + 2C0 C T ‖u0‖²_{H^{s-1}}`
/// over the probes and checks the commutator identity
/// `χ e^{itΔ}(1-Δ)^{s/2} u0 = (1-Δ)^{s/2} χ e^{itΔ} u0 + [χ,(1-Δ)^{s/2}] e^{itΔ} u0`.
pub fn weak_observability_check(spec: &GramianSpec, probes: &[Field]) -> Result<WeakObservabilityReport> {
    let s = spec.s();
    if s.value() < 1.0 {
        return Err(Error::Contract(format!("weak observability needs s >= 1, got {}", s.value())));
    }
    if probes.is_empty() {
        return Err(Error::InvalidParameter("no probe fields".into()));
    }
    let q = spec.quadrature();
    let chi = spec.chi();
    let half = s.value();
    let mut identity_residual = 0.0f64;
    let mut rows = Vec::with_capacity(probes.len());
    for u0 in probes {
        let energy = u0.sobolev_norm(s).powi(2);
        let lower_order = u0.sobolev_norm(SobolevIndex::new(s.value() - 1.0)).powi(2);
        let mut observed = 0.0;
        for ((&t, &w), &p) in q.nodes().iter().zip(q.weights()).zip(spec.phi().node_values()) {
            let flowed = linear_propagate(u0, t);
            let chi_flowed = flowed.multiply_real(chi.values());
            observed += w * p * p * chi_flowed.sobolev_norm(s).powi(2);

            let lhs = linear_propagate(&u0.bessel_potential(half), t).multiply_real(chi.values());
            let rhs = chi_flowed
                .bessel_potential(half)
                .add(&commutator_apply(chi, s, &flowed))?;
            let scale = lhs.l2_norm().max(f64::MIN_POSITIVE);
            identity_residual = identity_residual.max(lhs.sub(&rhs)?.l2_norm() / scale);
        }
        rows.push(WeakObservabilityProbe {
            energy,
            observed,
            lower_order,
        });
    }
    let (a, c) = fit_nonnegative(&rows);
    let c0 = a / 2.0;
    let horizon = spec.horizon();
    let c_const = if a > 0.0 { c / (a * horizon) } else { f64::INFINITY };
    let all_valid = rows
        .iter()
        .all(|r| r.energy <= (a * r.observed + c * r.lower_order) * (1.0 + 1e-12));
    Ok(WeakObservabilityReport {
        probes: rows,
        c0,
        c: c_const,
        identity_residual,
        all_valid,
    })
}

/// Nonnegative least squares for `energy ≈ a·observed + c·lower_order`,
/// scaled up so that every probe satisfies the inequality.
fn fit_nonnegative(rows: &[WeakObservabilityProbe]) -> (f64, f64) {
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in rows {
        s11 += r.observed * r.observed;
        s12 += r.observed * r.lower_order;
        s22 += r.lower_order * r.lower_order;
        b1 += r.observed * r.energy;
        b2 += r.lower_order * r.energy;
    }
    let det = s11 * s22 - s12 * s12;
    let mut candidates = Vec::new();
    if det.abs() > 1e-12 * s11 * s22 {
        let a = (b1 * s22 - b2 * s12) / det;
        let c = (s11 * b2 - s12 * b1) / det;
        if a > 0.0 && c >= 0.0 {
            candidates.push((a, c));
        }
    }
    if s11 > 0.0 {
        candidates.push((b1 / s11, 0.0));
    }
    let residual = |a: f64, c: f64| -> f64 {
        rows.iter()
            .map(|r| (r.energy - a * r.observed - c * r.lower_order).powi(2))
            .sum()
    };
    let (a, c) = candidates
        .into_iter()
        .min_by(|x, y| residual(x.0, x.1).total_cmp(&residual(y.0, y.1)))
        .unwrap_or((0.0, 0.0));
    let scale = rows
        .iter()
        .map(|r| r.energy / (a * r.observed + c * r.lower_order))
        .fold(0.0f64, f64::max);
    (a * scale, c * scale)
}
