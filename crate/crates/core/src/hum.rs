//! Control synthesis by the Hilbert uniqueness method.
//!
//! With the Gramian `G` of [`crate::observability`], the source
//!
//! ```text
//! f(t) = φ(t) χ (1-Δ)^{-s} ( φ(t) χ · i e^{itΔ} w0 )
//! ```
//!
//! steers `i∂_tΨ + ΔΨ = f` from `Ψ(0) = Ψ0` to `Ψ(T) = e^{iTΔ}(Ψ0 + G w0)`, so
//! solving `G w0 = -Ψ0` gives a null control. On the discrete level this is
//! exact when the Gramian uses the midpoint rule on the solver's steps: a
//! linear Strang step with a midpoint source is that quadrature of Duhamel's
//! formula.
//!
//! Nonlinear controls come from the fixed point `Ψ0 ← Ψ0 + ρ (u0 - u(0))`,
//! where `u` is the backward solution of the controlled cubic equation from
//! `u(T) = 0`. Exact controls glue a forward null control of `u0` to the time
//! reversal of a null control of `conj(u_f)`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Field, SobolevIndex};
use crate::grid::{same_grid, WaveguideGrid};
use crate::krylov::{preconditioned_cg, LinearOperator};
use crate::observability::{GramianPreconditioner, GramianSpec, Quadrature};
use crate::propagators::{nls_solve, step_count, Checkpoints, NlsParams, SourceSchedule, Trajectory};
use crate::regions::CutoffChi;

/// Gramian on the midpoint nodes of `T/dt` solver steps.
pub fn midpoint_gramian(chi: CutoffChi, s: SobolevIndex, horizon: f64, dt: f64, smooth_phi: bool) -> Result<GramianSpec> {
    let steps = step_count(horizon, dt)?;
    GramianSpec::new(chi, s, Quadrature::midpoint(horizon, steps)?, smooth_phi)
}

#[derive(Clone)]
pub struct HumSolveConfig {
    gramian: Arc<GramianSpec>,
    tol: f64,
    max_iter: usize,
    precond: Option<Arc<GramianPreconditioner>>,
}

impl fmt::Debug for HumSolveConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HumSolveConfig")
            .field("horizon", &self.gramian.horizon())
            .field("s", &self.gramian.s().value())
            .field("nodes", &self.gramian.quadrature().len())
            .field("tol", &self.tol)
            .field("max_iter", &self.max_iter)
            .field("preconditioned", &self.precond.is_some())
            .finish()
    }
}

impl HumSolveConfig {
    pub fn new(gramian: GramianSpec, tol: f64, max_iter: usize) -> Result<Self> {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::InvalidParameter(format!("CG tolerance {tol} must lie in (0, 1)")));
        }
        if max_iter == 0 {
            return Err(Error::InvalidParameter("CG needs at least one iteration".into()));
        }
        Ok(HumSolveConfig {
            gramian: Arc::new(gramian),
            tol,
            max_iter,
            precond: None,
        })
    }

    /// Adds the two-level preconditioner with the given coarse frequency cap.
    /// Silently stays unpreconditioned if the coarse block is singular.
    pub fn with_preconditioner(mut self, cap: f64) -> Self {
        self.precond = GramianPreconditioner::build(&self.gramian, cap).map(Arc::new);
        self
    }

    pub fn gramian(&self) -> &GramianSpec {
        &self.gramian
    }

    pub fn s(&self) -> SobolevIndex {
        self.gramian.s()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }

    pub fn horizon(&self) -> f64 {
        self.gramian.horizon()
    }

    pub fn is_preconditioned(&self) -> bool {
        self.precond.is_some()
    }

    /// Solver settings matching the Gramian's midpoint nodes.
    fn aligned(&self, nls: &NlsParams) -> Result<NlsParams> {
        let q = self.gramian.quadrature();
        if q.order() != 1 {
            return Err(Error::Contract(
                "controlled solves need a midpoint-rule Gramian aligned with the time steps".into(),
            ));
        }
        let dt = self.horizon() / q.panels() as f64;
        if (nls.dt.abs() - dt).abs() > 1e-12 * dt {
            return Err(Error::InvalidParameter(format!(
                "time step {} does not match the Gramian's node spacing {dt}",
                nls.dt
            )));
        }
        Ok(NlsParams { dt, ..*nls })
    }
}

/// `P G P` with `P = (1-Δ)^{s/2}`.
struct Symmetrized<'a> {
    spec: &'a GramianSpec,
    p: &'a [f64],
}

impl LinearOperator for Symmetrized<'_> {
    fn dim(&self) -> usize {
        self.p.len()
    }
    fn apply(&self, y: &[Complex64]) -> Vec<Complex64> {
        let py: Vec<Complex64> = y.iter().zip(self.p).map(|(v, &p)| v * p).collect();
        let mut out = self.spec.apply_spectral(&py);
        out.iter_mut().zip(self.p).for_each(|(v, &p)| *v *= p);
        out
    }
}

/// `P^{-1} M P^{-1}` for a preconditioner `M ≈ G^{-1}`.
struct SymmetrizedPrecond<'a> {
    inner: &'a GramianPreconditioner,
    p: &'a [f64],
}

impl LinearOperator for SymmetrizedPrecond<'_> {
    fn dim(&self) -> usize {
        self.p.len()
    }
    fn apply(&self, r: &[Complex64]) -> Vec<Complex64> {
        let pr: Vec<Complex64> = r.iter().zip(self.p).map(|(v, &p)| v / p).collect();
        let mut out = self.inner.apply(&pr);
        out.iter_mut().zip(self.p).for_each(|(v, &p)| *v /= p);
        out
    }
}

#[derive(Clone, Debug)]
pub struct HumSolution {
    pub w0: Field,
    /// Relative residuals of the symmetrized system, one per iteration.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves `G w0 = -target` through `P G P y = -P target`, `w0 = P y`.
/// A breached iteration limit returns the partial solution with `converged = false`.
pub fn hum_solve(target: &Field, cfg: &HumSolveConfig) -> Result<HumSolution> {
    let spec = cfg.gramian();
    let grid = spec.grid();
    if !same_grid(target.grid(), grid) {
        return Err(Error::GridMismatch);
    }
    let half = spec.s().value() / 2.0;
    let p: Vec<f64> = (0..grid.len()).map(|i| (1.0 + grid.xi2(i)).powf(half)).collect();
    let rhs: Vec<Complex64> = target
        .as_spectral()
        .values()
        .iter()
        .zip(&p)
        .map(|(v, &w)| -v * w)
        .collect();
    let op = Symmetrized { spec, p: &p };
    let pre = cfg.precond.as_deref().map(|inner| SymmetrizedPrecond { inner, p: &p });
    let out = preconditioned_cg(
        &op,
        pre.as_ref().map(|m| m as &dyn LinearOperator),
        &rhs,
        None,
        cfg.tol,
        cfg.max_iter,
    );
    if out.breakdown {
        return Err(Error::ObservabilityFailure(
            "the Gramian is numerically singular at this resolution".into(),
        ));
    }
    let w0: Vec<Complex64> = out.x.iter().zip(&p).map(|(v, &w)| v * w).collect();
    Ok(HumSolution {
        w0: Field::spectral(grid, w0)?,
        iterations: out.iterations,
        converged: out.converged,
        residuals: out.residuals,
    })
}

/// `‖G w0 + target‖ / ‖target‖`, recomputed from a fresh Gramian apply.
pub fn hum_residual(target: &Field, w0: &Field, cfg: &HumSolveConfig) -> f64 {
    let gw = cfg.gramian().apply_spectral(w0.as_spectral().values());
    let t = target.as_spectral();
    let num: f64 = gw.iter().zip(t.values()).map(|(a, b)| (a + b).norm_sqr()).sum();
    let den: f64 = t.values().iter().map(|b| b.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// The HUM control `f(t) = φχ(1-Δ)^{-s}(φχ · i e^{itΔ} w0)`.
#[derive(Clone)]
pub struct HumSource {
    spec: Arc<GramianSpec>,
    w0: Vec<Complex64>,
    smoothing: Vec<f64>,
}

impl fmt::Debug for HumSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HumSource")
            .field("horizon", &self.spec.horizon())
            .field("w0_l2", &self.w0_field().l2_norm())
            .finish()
    }
}

impl HumSource {
    pub fn new(cfg: &HumSolveConfig, w0: &Field) -> Result<Self> {
        let spec = cfg.gramian.clone();
        if !same_grid(w0.grid(), spec.grid()) {
            return Err(Error::GridMismatch);
        }
        let grid = spec.grid();
        let s = spec.s().value();
        let smoothing = (0..grid.len()).map(|i| (1.0 + grid.xi2(i)).powf(-s)).collect();
        Ok(HumSource {
            w0: w0.as_spectral().into_values(),
            spec,
            smoothing,
        })
    }

    pub fn w0_field(&self) -> Field {
        Field::spectral(self.spec.grid(), self.w0.clone()).expect("length checked at construction")
    }

    pub fn horizon(&self) -> f64 {
        self.spec.horizon()
    }

    /// `φ(t)χ · i e^{itΔ} w0`, the observed multiplier, in physical form.
    pub fn observed(&self, t: f64) -> Field {
        let grid = self.spec.grid();
        let phi = self.spec.phi().eval(t);
        let table = grid.free_phase_table(t);
        let mut buf: Vec<Complex64> = self
            .w0
            .iter()
            .zip(grid.scaled_xi2())
            .map(|(v, &q)| v * table[q as usize])
            .collect();
        grid.inverse_in_place(&mut buf);
        let i_phi = Complex64::new(0.0, phi);
        buf.iter_mut()
            .zip(self.spec.chi().values())
            .for_each(|(b, &c)| *b *= i_phi * c);
        Field::physical(grid, buf).expect("grid-sized buffer")
    }

    /// `‖f(t)‖_{H^s} / ‖φ(t)χ g(t)‖_{H^{-s}}`, bounded by the `H^s`
    /// multiplier norm of `χ`. `None` where the control is off.
    pub fn regularity_ratio(&self, t: f64) -> Option<f64> {
        let f = self.at(t)?;
        let g = self.observed(t);
        let s = self.spec.s();
        let den = g.sobolev_norm(-s);
        (den > 0.0).then(|| f.sobolev_norm(s) / den)
    }
}

impl SourceSchedule for HumSource {
    fn at(&self, t: f64) -> Option<Field> {
        let phi = self.spec.phi().eval(t);
        if phi == 0.0 || self.w0.iter().all(|v| *v == Complex64::default()) {
            return None;
        }
        let grid = self.spec.grid();
        let mut buf = self.observed(t).into_values();
        grid.forward_in_place(&mut buf);
        buf.iter_mut().zip(&self.smoothing).for_each(|(b, &m)| *b *= m);
        grid.inverse_in_place(&mut buf);
        buf.iter_mut()
            .zip(self.spec.chi().values())
            .for_each(|(b, &c)| *b *= phi * c);
        Some(Field::physical(grid, buf).expect("grid-sized buffer"))
    }
}

/// Two half-horizon controls glued at `T/2`: the second half is the time
/// reversal `t ↦ T - t` of a null control for the conjugated target.
#[derive(Clone, Debug)]
pub struct GluedSource {
    first: HumSource,
    second: HumSource,
    junction: f64,
}

impl GluedSource {
    pub fn junction(&self) -> f64 {
        self.junction
    }

    pub fn horizon(&self) -> f64 {
        2.0 * self.junction
    }
}

impl SourceSchedule for GluedSource {
    fn at(&self, t: f64) -> Option<Field> {
        if t < self.junction {
            self.first.at(t)
        } else {
            let g = self.second.at(2.0 * self.junction - t)?.into_physical();
            let conj = g.values().iter().map(|v| v.conj()).collect();
            Some(Field::physical(g.grid(), conj).expect("same grid"))
        }
    }
}

#[derive(Clone, Debug)]
pub enum ControlSource {
    Hum(HumSource),
    Glued(GluedSource),
}

impl SourceSchedule for ControlSource {
    fn at(&self, t: f64) -> Option<Field> {
        match self {
            ControlSource::Hum(s) => s.at(t),
            ControlSource::Glued(s) => s.at(t),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    /// `‖Ψ0^{k+1} - Ψ0^k‖_{H^s}`
    pub update_norm: f64,
}

#[derive(Clone, Debug)]
pub struct ControlSolution {
    pub w0: Field,
    /// Datum of the linear controlled flow; equals `u0` for linear problems.
    pub psi0: Field,
    pub source: ControlSource,
    pub horizon: f64,
    /// Relative residual history of the first HUM solve.
    pub cg_residuals: Vec<f64>,
    pub sweeps: Vec<SweepRecord>,
    pub converged: bool,
    pub final_state: Field,
    /// `‖u0‖_{H^s}`
    pub initial_norm: f64,
    /// `‖u(T)‖_{H^s}`
    pub final_norm: f64,
    /// `‖u(T) - u_f‖_{H^s}` for exact controls.
    pub target_error: Option<f64>,
    /// Largest control amplitude at `T/2` and one step either side, for glued controls.
    pub junction_max: Option<f64>,
}

impl ControlSolution {
    /// `max_k ‖ΔΨ0^{k+1}‖ / ‖ΔΨ0^k‖` over recorded sweeps.
    pub fn contraction_factor(&self) -> Option<f64> {
        self.sweeps
            .windows(2)
            .filter(|w| w[0].update_norm > 0.0)
            .map(|w| w[1].update_norm / w[0].update_norm)
            .reduce(f64::max)
    }

    /// `sweep,cg_iterations,cg_residual,update_norm` rows.
    pub fn write_sweeps_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sweep", "cg_iterations", "cg_residual", "update_norm"])?;
        for r in &self.sweeps {
            w.write_record(&[
                r.sweep.to_string(),
                r.cg_iterations.to_string(),
                format!("{:e}", r.cg_residual),
                format!("{:e}", r.update_norm),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// HUM null control of the linear equation, certified by a forward Strang solve.
pub fn linear_null_control(u0: &Field, cfg: &HumSolveConfig) -> Result<ControlSolution> {
    let nls = cfg.aligned(&NlsParams::new(
        crate::propagators::Nonlinearity::Off,
        cfg.horizon() / cfg.gramian().quadrature().panels() as f64,
    )?)?;
    let sol = hum_solve(u0, cfg)?;
    let source = HumSource::new(cfg, &sol.w0)?;
    let traj = nls_solve(u0, 0.0, cfg.horizon(), &nls, &source, &Checkpoints::Endpoints)?;
    let s = cfg.s();
    let final_state = traj.final_state().clone();
    Ok(ControlSolution {
        psi0: u0.clone(),
        source: ControlSource::Hum(source),
        horizon: cfg.horizon(),
        sweeps: vec![SweepRecord {
            sweep: 1,
            cg_iterations: sol.iterations,
            cg_residual: sol.residuals.last().copied().unwrap_or(0.0),
            update_norm: 0.0,
        }],
        cg_residuals: sol.residuals,
        converged: sol.converged,
        initial_norm: u0.sobolev_norm(s),
        final_norm: final_state.sobolev_norm(s),
        final_state,
        w0: sol.w0,
        target_error: None,
        junction_max: None,
    })
}

/// A space-time probe `f(t) = Σ_k e^{iω_k t} f_k`.
#[derive(Clone, Debug)]
pub struct ProbeSource {
    terms: Vec<(f64, Field)>,
}

impl ProbeSource {
    pub fn new(terms: Vec<(f64, Field)>) -> Self {
        ProbeSource { terms }
    }

    pub fn zero() -> Self {
        ProbeSource { terms: Vec::new() }
    }

    pub fn random<R: Rng + ?Sized>(grid: &Arc<WaveguideGrid>, rng: &mut R, terms: usize) -> Self {
        let terms = (0..terms)
            .map(|_| {
                let omega: f64 = 4.0 * rng.sample::<f64, _>(StandardNormal);
                (omega, Field::random(grid, rng, 1.0).into_physical())
            })
            .collect();
        ProbeSource { terms }
    }
}

impl SourceSchedule for ProbeSource {
    fn at(&self, t: f64) -> Option<Field> {
        let mut it = self.terms.iter();
        let (w, f) = it.next()?;
        let mut acc = f.scale(Complex64::from_polar(1.0, w * t)).into_physical();
        for (w, f) in it {
            acc = acc.add(&f.scale(Complex64::from_polar(1.0, w * t))).expect("probe terms share a grid");
        }
        Some(acc)
    }
}

/// The control form `B f = φχ(1-Δ)^{-s}(φχ f)` of a probe.
struct ControlForm<'a> {
    spec: &'a GramianSpec,
    f: &'a dyn SourceSchedule,
}

impl SourceSchedule for ControlForm<'_> {
    fn at(&self, t: f64) -> Option<Field> {
        let phi = self.spec.phi().eval(t);
        if phi == 0.0 {
            return None;
        }
        let weight: Vec<f64> = self.spec.chi().values().iter().map(|c| phi * c).collect();
        let f = self.f.at(t)?.multiply_real(&weight);
        Some(f.bessel_potential(-2.0 * self.spec.s().value()).multiply_real(&weight))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DualityReport {
    /// `Σ_j dt ⟨φχ f(t_j), φχ e^{it_jΔ} w0⟩_{H^{-s}}`
    pub observation_side: Complex64,
    /// `⟨-i R(Bf), w0⟩_{L²}` with `R` the backward solve from `u(T) = 0`.
    pub control_side: Complex64,
    pub discrepancy: f64,
}

/// Evaluates both sides of the duality between the control form and the
/// observation operator. The sides share the quadrature, so they agree to
/// rounding whenever the solver, the Gramian nodes and the pairings are consistent.
pub fn duality_check(f: &dyn SourceSchedule, w0: &Field, cfg: &HumSolveConfig) -> Result<DualityReport> {
    let spec = cfg.gramian();
    let grid = spec.grid();
    if !same_grid(w0.grid(), grid) {
        return Err(Error::GridMismatch);
    }
    let nls = cfg.aligned(&NlsParams::new(
        crate::propagators::Nonlinearity::Off,
        cfg.horizon() / spec.quadrature().panels() as f64,
    )?)?;
    let s = spec.s();
    let q = spec.quadrature();
    let mut observation_side = Complex64::default();
    for ((&t, &w), &phi) in q.nodes().iter().zip(q.weights()).zip(spec.phi().node_values()) {
        if phi == 0.0 {
            continue;
        }
        let Some(ft) = f.at(t) else { continue };
        let weight: Vec<f64> = spec.chi().values().iter().map(|c| phi * c).collect();
        let a = ft.multiply_real(&weight);
        let b = crate::propagators::linear_propagate(w0, t).multiply_real(&weight);
        observation_side += a.sobolev_inner(&b, -s)? * w;
    }
    let form = ControlForm { spec, f };
    let zero = Field::zeros(grid, crate::field::Representation::Spectral);
    let back = nls_solve(&zero, cfg.horizon(), 0.0, &nls, &form, &Checkpoints::Endpoints)?;
    let control_side = back
        .final_state()
        .scale(Complex64::new(0.0, -1.0))
        .l2_inner(w0)?;
    let scale = observation_side.norm().max(control_side.norm());
    let discrepancy = if scale == 0.0 {
        0.0
    } else {
        (observation_side - control_side).norm() / scale
    };
    Ok(DualityReport {
        observation_side,
        control_side,
        discrepancy,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointConfig {
    /// Radius of the ball the iterates must stay in.
    pub eta: f64,
    /// Largest admissible `‖u0‖_{H^s}`.
    pub delta: f64,
    pub max_sweeps: usize,
    /// Stop when `‖Ψ0^{k+1} - Ψ0^k‖_{H^s}` falls below this.
    pub tol: f64,
    /// Under-relaxation `ρ ∈ (0, 1]`.
    pub relaxation: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            eta: 1.0,
            delta: 0.1,
            max_sweeps: 30,
            tol: 1e-10,
            relaxation: 1.0,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.tol > 0.0 && self.delta > 0.0) {
            return Err(Error::InvalidParameter("eta, delta and tol must be positive".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "relaxation {} must lie in (0, 1]",
                self.relaxation
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Null control of `i∂_tu + Δu + ε|u|²u = f` by the fixed point on the
/// linear datum `Ψ0`, certified by a forward solve from `u0`.
pub fn nonlinear_null_control(
    u0: &Field,
    nls: &NlsParams,
    fp: &FixedPointConfig,
    hum: &HumSolveConfig,
) -> Result<ControlSolution> {
    fp.validate()?;
    let nls = hum.aligned(nls)?;
    let s = hum.s();
    let horizon = hum.horizon();
    let grid = hum.gramian().grid().clone();
    if !same_grid(u0.grid(), &grid) {
        return Err(Error::GridMismatch);
    }
    let initial_norm = u0.sobolev_norm(s);
    if initial_norm > fp.delta {
        return Err(Error::DataTooLarge {
            norm: initial_norm,
            delta: fp.delta,
        });
    }
    let zero = Field::zeros(&grid, crate::field::Representation::Spectral);
    let mut psi0 = u0.as_spectral();
    let first = hum_solve(&psi0, hum)?;
    let cg_residuals = first.residuals.clone();
    let mut w0 = first.w0.clone();
    let mut cg = (first.iterations, cg_residuals.last().copied().unwrap_or(0.0));
    let mut sweeps: Vec<SweepRecord> = Vec::new();
    let mut converged = false;
    let mut growth = 0usize;
    for sweep in 1..=fp.max_sweeps {
        let source = HumSource::new(hum, &w0)?;
        let back = nls_solve(&zero, horizon, 0.0, &nls, &source, &Checkpoints::Endpoints)?;
        let update = u0.sub(back.final_state())?.scale(Complex64::new(fp.relaxation, 0.0));
        let update_norm = update.sobolev_norm(s);
        sweeps.push(SweepRecord {
            sweep,
            cg_iterations: cg.0,
            cg_residual: cg.1,
            update_norm,
        });
        log::debug!("fixed point sweep {sweep}: update {update_norm:e}");
        if update_norm < fp.tol {
            converged = true;
            break;
        }
        if sweeps.len() >= 2 && update_norm > sweeps[sweeps.len() - 2].update_norm {
            growth += 1;
        } else {
            growth = 0;
        }
        if growth >= 3 || !update_norm.is_finite() {
            return Err(Error::Divergence {
                sweeps: sweep,
                update_norms: sweeps.iter().map(|r| r.update_norm).collect(),
            });
        }
        psi0 = psi0.add(&update)?;
        if psi0.sobolev_norm(s) > fp.eta {
            return Err(Error::Divergence {
                sweeps: sweep,
                update_norms: sweeps.iter().map(|r| r.update_norm).collect(),
            });
        }
        // the HUM map is linear: correct w0 by the update's multiplier
        let inc = hum_solve(&update, hum)?;
        cg = (inc.iterations, inc.residuals.last().copied().unwrap_or(0.0));
        w0 = w0.add(&inc.w0)?;
    }
    let source = HumSource::new(hum, &w0)?;
    let forward = nls_solve(u0, 0.0, horizon, &nls, &source, &Checkpoints::Endpoints)?;
    let final_state = forward.final_state().clone();
    Ok(ControlSolution {
        w0,
        psi0,
        source: ControlSource::Hum(source),
        horizon,
        cg_residuals,
        sweeps,
        converged,
        initial_norm,
        final_norm: final_state.sobolev_norm(s),
        final_state,
        target_error: None,
        junction_max: None,
    })
}

/// Steers `u0` to `u_f` over `[0, 2τ]`, where `τ` is the horizon of `hum`.
///
/// The first half is a null control of `u0`. If `z` is a controlled solution
/// with source `g` on `[0, τ]`, then `conj(z(2τ - t))` solves the same
/// equation with source `conj(g(2τ - t))`; a null control of `conj(u_f)`
/// therefore reverses into a control from `0` at `τ` to `u_f` at `2τ`.
pub fn exact_control(
    u0: &Field,
    u_f: &Field,
    nls: &NlsParams,
    fp: &FixedPointConfig,
    hum: &HumSolveConfig,
) -> Result<ControlSolution> {
    let s = hum.s();
    let total = u0.sobolev_norm(s) + u_f.sobolev_norm(s);
    if total > fp.delta {
        return Err(Error::DataTooLarge {
            norm: total,
            delta: fp.delta,
        });
    }
    let aligned = hum.aligned(nls)?;
    let first = nonlinear_null_control(u0, nls, fp, hum).map_err(|e| Error::HalfFailed {
        half: "forward",
        source: Box::new(e),
    })?;
    let second = nonlinear_null_control(&u_f.conj(), nls, fp, hum).map_err(|e| Error::HalfFailed {
        half: "reversed",
        source: Box::new(e),
    })?;
    let (ControlSource::Hum(a), ControlSource::Hum(b)) = (first.source.clone(), second.source.clone()) else {
        unreachable!("null controls carry HUM sources")
    };
    let half = hum.horizon();
    let glued = GluedSource {
        first: a,
        second: b,
        junction: half,
    };
    let junction_max = [half - aligned.dt, half, half + aligned.dt]
        .iter()
        .map(|&t| glued.at(t).map_or(0.0, |f| f.max_abs()))
        .fold(0.0, f64::max);
    let run = nls_solve(u0, 0.0, 2.0 * half, &aligned, &glued, &Checkpoints::Endpoints)?;
    let final_state = run.final_state().clone();
    let mut sweeps = first.sweeps.clone();
    sweeps.extend(second.sweeps.iter().map(|r| SweepRecord {
        sweep: r.sweep + first.sweeps.len(),
        ..*r
    }));
    Ok(ControlSolution {
        w0: first.w0,
        psi0: first.psi0,
        source: ControlSource::Glued(glued),
        horizon: 2.0 * half,
        cg_residuals: first.cg_residuals,
        sweeps,
        converged: first.converged && second.converged,
        initial_norm: u0.sobolev_norm(s),
        final_norm: final_state.sobolev_norm(s),
        target_error: Some(final_state.sub(u_f)?.sobolev_norm(s)),
        final_state,
        junction_max: Some(junction_max),
    })
}

/// `F(Ψ, v) = |v|²v + 2|v|²Ψ + v²Ψ̄`
pub fn cubic_remainder(psi: Complex64, v: Complex64) -> Complex64 {
    let v2 = v.norm_sqr();
    v * v2 + psi * (2.0 * v2) + v * v * psi.conj()
}

/// `|Ψ|²Ψ + 2|Ψ|²v + Ψ²v̄ + F(Ψ, v)`, which equals `|Ψ+v|²(Ψ+v)`.
pub fn cubic_expansion(psi: Complex64, v: Complex64) -> Complex64 {
    let p2 = psi.norm_sqr();
    psi * p2 + v * (2.0 * p2) + psi * psi * v.conj() + cubic_remainder(psi, v)
}

#[derive(Clone, Debug, Serialize)]
pub struct VResidualReport {
    pub times: Vec<f64>,
    /// `L²` norm of the residual at each interior checkpoint.
    pub residual_l2: Vec<f64>,
    pub max_residual: f64,
    /// Largest `|(|u|²u) - expansion| / (max|Ψ| + max|v|)³` over all checkpoints;
    /// the denominator bounds every term of the expansion.
    pub expansion_error: f64,
}

/// Residual fields of `i∂_tv + Δv + ε(|Ψ|²Ψ + 2|Ψ|²v + Ψ²v̄) + εF(Ψ,v)` for
/// `v = u - Ψ`, by centered differences at interior checkpoints.
pub fn v_residual_fields(psi: &Trajectory, u: &Trajectory, nls: &NlsParams) -> Result<Vec<(f64, Field)>> {
    if psi.times.len() != u.times.len()
        || psi.times.iter().zip(&u.times).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::InvalidParameter("Ψ and u checkpoints are not aligned".into()));
    }
    let n = psi.times.len();
    if n < 3 {
        return Err(Error::InvalidParameter("centered differences need three checkpoints".into()));
    }
    let h = psi.times[1] - psi.times[0];
    if psi
        .times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs())
    {
        return Err(Error::InvalidParameter("checkpoints must be equally spaced".into()));
    }
    let eps = nls.nonlinearity.epsilon();
    let v: Vec<Field> = u
        .states
        .iter()
        .zip(&psi.states)
        .map(|(a, b)| a.sub(b).map(|d| d.into_physical()))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(n - 2);
    for k in 1..n - 1 {
        let dv = v[k + 1].sub(&v[k - 1])?.scale(Complex64::new(0.0, 1.0 / (2.0 * h)));
        let lap = v[k].apply_indexed_multiplier(|i| Complex64::new(-v[k].grid().xi2(i), 0.0));
        let p = psi.states[k].as_physical();
        let cubic: Vec<Complex64> = p
            .values()
            .iter()
            .zip(v[k].values())
            .map(|(&a, &b)| cubic_expansion(a, b) * eps)
            .collect();
        let cubic = Field::physical(p.grid(), cubic)?;
        out.push((psi.times[k], dv.add(&lap)?.add(&cubic)?.into_physical()));
    }
    Ok(out)
}

pub fn v_equation_residual(psi: &Trajectory, u: &Trajectory, nls: &NlsParams) -> Result<VResidualReport> {
    let fields = v_residual_fields(psi, u, nls)?;
    let mut expansion_error = 0.0f64;
    for (p, w) in psi.states.iter().zip(&u.states) {
        let p = p.as_physical();
        let w = w.as_physical();
        let v_max = p
            .values()
            .iter()
            .zip(w.values())
            .map(|(a, b)| (b - a).norm())
            .fold(0.0, f64::max);
        let scale = (p.max_abs() + v_max).powi(3).max(f64::MIN_POSITIVE);
        for (&a, &b) in p.values().iter().zip(w.values()) {
            let direct = b * b.norm_sqr();
            expansion_error = expansion_error.max((direct - cubic_expansion(a, b - a)).norm() / scale);
        }
    }
    let residual_l2: Vec<f64> = fields.iter().map(|(_, f)| f.l2_norm()).collect();
    Ok(VResidualReport {
        times: fields.iter().map(|(t, _)| *t).collect(),
        max_residual: residual_l2.iter().copied().fold(0.0, f64::max),
        residual_l2,
        expansion_error,
    })
}
