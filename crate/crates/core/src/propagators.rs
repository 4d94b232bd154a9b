//! Time evolution on the waveguide grid.
//!
//! * [`linear_propagate`]: the free group `e^{itΔ}`, spectral multiplier `e^{-it|ξ|²}`.
//! * [`twisted_propagate`]: the fiber group `e^{itH_α}` with `H_α = (∂_x - iα)² + Δ_y`.
//! * [`nls_step`] / [`nls_solve`]: Strang splitting for
//!   `i∂_t u + Δu + ε|u|²u = f`, forward (`dt > 0`) or backward (`dt < 0`).
//!
//! One Strang step of size `dt` from `t` is
//! `L(dt/2) ∘ N(dt/2) ∘ S(dt) ∘ N(dt/2) ∘ L(dt/2)` where `L` is the exact free
//! flow, `N(h): u ↦ u·exp(iεV h)` with `V = |u|²` (projected onto the 2/3
//! band when dealiasing is on) and `S(dt): u ↦ u - i·dt·f(t + dt/2)`. Every
//! substep is inverted exactly by its negative-time counterpart, so a step with
//! `-dt` from `t + dt` undoes a step with `dt` from `t`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Representation, SobolevIndex};
use crate::grid::WaveguideGrid;

/// `e^{itΔ} f`. The output has the representation of the input.
pub fn linear_propagate(f: &Field, t: f64) -> Field {
    let g = f.grid().clone();
    let table = g.free_phase_table(t);
    f.apply_indexed_multiplier(|idx| table[g.scaled_xi2()[idx] as usize])
}

pub(crate) fn apply_phase_table(grid: &WaveguideGrid, values: &mut [Complex64], table: &[Complex64]) {
    values
        .iter_mut()
        .zip(grid.scaled_xi2())
        .for_each(|(v, &q)| *v *= table[q as usize]);
}

/// Representative wavenumber of DFT index `i` on a fiber with quasi-momentum
/// `alpha` along a Euclidean axis: the integer `κ ≡ i (mod N)` with
/// `κ - α ∈ [-N/2, N/2)`.
pub fn fiber_wavenumber(points: usize, i: usize, alpha: f64) -> i64 {
    let n = points as i64;
    let k = i as i64;
    // smallest κ ≡ k with κ - α >= -N/2
    let lower = (-(n as f64) / 2.0 + alpha).ceil() as i64;
    lower + (k - lower).rem_euclid(n)
}

/// Result of a twisted propagation.
#[derive(Clone, Debug)]
pub struct TwistedFlow {
    pub field: Field,
    /// Quasi-momentum actually used, reduced into `[0, 1)^m`.
    pub alpha: Vec<f64>,
    pub warning: Option<String>,
}

/// Reduces `alpha` into `[0,1)^m`, describing any change.
pub fn reduce_quasi_momentum(alpha: &[f64]) -> (Vec<f64>, Option<String>) {
    let reduced: Vec<f64> = alpha.iter().map(|a| a.rem_euclid(1.0)).collect();
    let changed = alpha.iter().zip(&reduced).any(|(a, r)| a != r);
    let warning = changed.then(|| format!("quasi-momentum {alpha:?} reduced mod 1 to {reduced:?}"));
    (reduced, warning)
}

/// `e^{itH_α} f` on a unit-torus fiber grid (`L = 1`), i.e. the multiplier
/// `e^{-it(|κ-α|² + |l|²)}` with fiber-adapted wavenumbers (see [`fiber_wavenumber`]).
pub fn twisted_propagate(f: &Field, alpha: &[f64], t: f64) -> Result<TwistedFlow> {
    let g = f.grid().clone();
    if g.supercell() != 1 {
        return Err(Error::Contract(format!(
            "twisted flow acts on unit-torus fibers (L = 1), grid has L = {}",
            g.supercell()
        )));
    }
    if alpha.len() != g.m() {
        return Err(Error::Contract(format!(
            "quasi-momentum has {} entries, expected m = {}",
            alpha.len(),
            g.m()
        )));
    }
    let (alpha, warning) = reduce_quasi_momentum(alpha);
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let symbol = twisted_symbol(&g, &alpha, |kappa_minus_alpha2| {
        Complex64::from_polar(1.0, -t * kappa_minus_alpha2)
    });
    let field = f.apply_indexed_multiplier(|idx| symbol[idx]);
    Ok(TwistedFlow {
        field,
        alpha,
        warning,
    })
}

/// Tabulates `h(|κ-α|² + |l|²)` over the fiber lattice.
pub(crate) fn twisted_symbol(
    g: &WaveguideGrid,
    alpha: &[f64],
    h: impl Fn(f64) -> Complex64,
) -> Vec<Complex64> {
    let mut multi = vec![0usize; g.dim()];
    (0..g.len())
        .map(|idx| {
            g.unflatten(idx, &mut multi);
            let mut q = 0.0;
            for a in 0..g.dim() {
                let p = g.points()[a];
                let v = if a < g.m() {
                    fiber_wavenumber(p, multi[a], alpha[a]) as f64 - alpha[a]
                } else {
                    g.wavenumber(a, multi[a]) as f64
                };
                q += v * v;
            }
            h(q)
        })
        .collect()
}

/// Sign of the cubic term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Nonlinearity {
    /// `ε = +1`
    Focusing,
    /// `ε = -1`
    Defocusing,
    /// Linear equation.
    Off,
}

impl Nonlinearity {
    pub fn from_epsilon(eps: f64) -> Result<Self> {
        if eps == 1.0 {
            Ok(Nonlinearity::Focusing)
        } else if eps == -1.0 {
            Ok(Nonlinearity::Defocusing)
        } else if eps == 0.0 {
            Ok(Nonlinearity::Off)
        } else {
            Err(Error::InvalidParameter(format!("epsilon must be +1, -1 or 0, got {eps}")))
        }
    }

    pub fn epsilon(self) -> f64 {
        match self {
            Nonlinearity::Focusing => 1.0,
            Nonlinearity::Defocusing => -1.0,
            Nonlinearity::Off => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NlsParams {
    pub nonlinearity: Nonlinearity,
    /// Step size; the sign is taken from the direction of integration in [`nls_solve`].
    pub dt: f64,
    pub dealias: bool,
}

impl NlsParams {
    pub fn new(nonlinearity: Nonlinearity, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidParameter(format!("dt = {dt} must be finite and nonzero")));
        }
        Ok(NlsParams {
            nonlinearity,
            dt,
            dealias: true,
        })
    }

    pub fn with_dealias(mut self, on: bool) -> Self {
        self.dealias = on;
        self
    }

    pub fn linear(self) -> Self {
        NlsParams {
            nonlinearity: Nonlinearity::Off,
            ..self
        }
    }
}

/// A time-dependent forcing term `f(t)`.
pub trait SourceSchedule: Send + Sync {
    /// Physical-space source at time `t`, or `None` where it vanishes.
    fn at(&self, t: f64) -> Option<Field>;
}

/// `f ≡ 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoSource;

impl SourceSchedule for NoSource {
    fn at(&self, _t: f64) -> Option<Field> {
        None
    }
}

/// Source given by a closure.
pub struct FnSource<F>(pub F);

impl<F: Fn(f64) -> Option<Field> + Send + Sync> SourceSchedule for FnSource<F> {
    fn at(&self, t: f64) -> Option<Field> {
        (self.0)(t)
    }
}

/// Work buffers for repeated steps on one grid.
struct Stepper<'a> {
    grid: &'a Arc<WaveguideGrid>,
    params: NlsParams,
    half_table: Vec<Complex64>,
    keep: Option<Vec<bool>>,
    density: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    fn new(grid: &'a Arc<WaveguideGrid>, params: NlsParams, dt: f64) -> Self {
        let keep = (params.dealias && params.nonlinearity != Nonlinearity::Off)
            .then(|| two_thirds_mask(grid));
        Stepper {
            grid,
            params,
            half_table: grid.free_phase_table(dt / 2.0),
            keep,
            density: vec![Complex64::default(); grid.len()],
        }
    }

    fn nonlinear_half(&mut self, u: &mut [Complex64], h: f64) {
        let eps = self.params.nonlinearity.epsilon();
        if eps == 0.0 {
            return;
        }
        match &self.keep {
            None => u.iter_mut().for_each(|v| {
                let phase = eps * v.norm_sqr() * h;
                *v *= Complex64::from_polar(1.0, phase);
            }),
            Some(keep) => {
                for (d, v) in self.density.iter_mut().zip(u.iter()) {
                    *d = Complex64::new(v.norm_sqr(), 0.0);
                }
                self.grid.forward_in_place(&mut self.density);
                for (d, &k) in self.density.iter_mut().zip(keep) {
                    if !k {
                        *d = Complex64::default();
                    }
                }
                self.grid.inverse_in_place(&mut self.density);
                for (v, d) in u.iter_mut().zip(&self.density) {
                    *v *= Complex64::from_polar(1.0, eps * d.re * h);
                }
            }
        }
    }

    /// One step on spectral coefficients `u` from time `t` with signed step `dt`.
    fn step(&mut self, u: &mut Vec<Complex64>, t: f64, dt: f64, source: &dyn SourceSchedule) {
        apply_phase_table(self.grid, u, &self.half_table);
        self.grid.inverse_in_place(u);
        self.nonlinear_half(u, dt / 2.0);
        if let Some(f) = source.at(t + dt / 2.0) {
            let f = f.into_physical();
            let c = Complex64::new(0.0, -dt);
            u.iter_mut().zip(f.values()).for_each(|(v, s)| *v += c * s);
        }
        self.nonlinear_half(u, dt / 2.0);
        self.grid.forward_in_place(u);
        apply_phase_table(self.grid, u, &self.half_table);
    }
}

/// Mask of the modes kept by the 2/3 rule: `|k_a| <= N_a / 3` on every axis.
pub fn two_thirds_mask(grid: &WaveguideGrid) -> Vec<bool> {
    let mut multi = vec![0usize; grid.dim()];
    (0..grid.len())
        .map(|idx| {
            grid.unflatten(idx, &mut multi);
            (0..grid.dim()).all(|a| 3 * grid.wavenumber(a, multi[a]).unsigned_abs() as usize <= grid.points()[a])
        })
        .collect()
}

/// A single Strang step of signed size `params.dt` from time `t`.
pub fn nls_step(u: &Field, t: f64, params: &NlsParams, source: &dyn SourceSchedule) -> Result<Field> {
    let grid = u.grid().clone();
    let mut stepper = Stepper::new(&grid, *params, params.dt);
    let mut buf = u.as_spectral().into_values();
    stepper.step(&mut buf, t, params.dt, source);
    if !buf.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::BlowUp {
            t: t + params.dt,
            last_good: None,
        });
    }
    let out = Field::spectral(&grid, buf)?;
    Ok(match u.repr() {
        Representation::Physical => out.into_physical(),
        Representation::Spectral => out,
    })
}

/// Which states [`nls_solve`] keeps.
#[derive(Clone, Debug, PartialEq)]
pub enum Checkpoints {
    /// Initial and final state.
    Endpoints,
    /// Every `k`-th step plus the final state.
    Stride(usize),
    /// The listed times, which must fall on step boundaries.
    Times(Vec<f64>),
}

/// Per-checkpoint diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub t: f64,
    /// `‖u‖²_{L²}`
    pub mass: f64,
    /// `‖u‖_{H¹}`
    pub h1: f64,
    pub max_abs: f64,
}

impl StepDiagnostics {
    pub fn of(t: f64, u: &Field) -> Self {
        let l2 = u.l2_norm();
        StepDiagnostics {
            t,
            mass: l2 * l2,
            h1: u.sobolev_norm(SobolevIndex::new(1.0)),
            max_abs: u.max_abs(),
        }
    }
}

/// States at checkpoints, in order of integration.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn final_state(&self) -> &Field {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    /// Writes `t,mass,h1,max_abs` rows.
    pub fn write_diagnostics_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mass", "h1", "max_abs"])?;
        for d in &self.diagnostics {
            w.write_record(&[
                format!("{:e}", d.t),
                format!("{:e}", d.mass),
                format!("{:e}", d.h1),
                format!("{:e}", d.max_abs),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of steps of size `|dt|` covering `span`; errors unless they tile it.
pub fn step_count(span: f64, dt: f64) -> Result<usize> {
    let ratio = span.abs() / dt.abs();
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "step {dt} does not divide the interval of length {}",
            span.abs()
        )));
    }
    Ok(steps as usize)
}

/// Integrates from `t0` to `t1` (either direction) with composed Strang steps.
pub fn nls_solve(
    u0: &Field,
    t0: f64,
    t1: f64,
    params: &NlsParams,
    source: &dyn SourceSchedule,
    checkpoints: &Checkpoints,
) -> Result<Trajectory> {
    if t0 == t1 || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidParameter(format!("empty time interval [{t0}, {t1}]")));
    }
    let steps = step_count(t1 - t0, params.dt)?;
    let dt = (t1 - t0) / steps as f64;
    let keep_step: Vec<bool> = match checkpoints {
        Checkpoints::Endpoints => (0..=steps).map(|k| k == 0 || k == steps).collect(),
        Checkpoints::Stride(s) => {
            let s = (*s).max(1);
            (0..=steps).map(|k| k % s == 0 || k == steps).collect()
        }
        Checkpoints::Times(times) => {
            let mut keep = vec![false; steps + 1];
            for &t in times {
                let x = (t - t0) / dt;
                let k = x.round();
                if k < 0.0 || k > steps as f64 || (x - k).abs() > 1e-6 {
                    return Err(Error::InvalidParameter(format!(
                        "checkpoint {t} is not a step boundary of [{t0}, {t1}] with dt = {dt}"
                    )));
                }
                keep[k as usize] = true;
            }
            keep
        }
    };

    let grid = u0.grid().clone();
    let mut stepper = Stepper::new(&grid, *params, dt);
    let mut buf = u0.as_spectral().into_values();
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        diagnostics: Vec::new(),
    };
    let record = |traj: &mut Trajectory, t: f64, buf: &[Complex64]| {
        let f = Field::spectral(&grid, buf.to_vec()).expect("buffer matches grid");
        traj.diagnostics.push(StepDiagnostics::of(t, &f));
        traj.times.push(t);
        traj.states.push(f);
    };
    if keep_step[0] {
        record(&mut traj, t0, &buf);
    }
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        stepper.step(&mut buf, t, dt, source);
        let t_next = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * dt };
        if !buf.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            let last_good = (!traj.states.is_empty()).then(|| Box::new(traj.clone()));
            return Err(Error::BlowUp { t: t_next, last_good });
        }
        if keep_step[k + 1] {
            record(&mut traj, t_next, &buf);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: &Field, b: &Field) -> f64 {
        a.sub(b).unwrap().l2_norm() / b.l2_norm().max(1e-300)
    }

    fn grid() -> Arc<WaveguideGrid> {
        WaveguideGrid::new(1, 1, 2, &[32, 16]).unwrap()
    }

    #[test]
    fn free_flow_basics() {
        let g = grid();
        let e = Field::from_fn(&g, |z| Complex64::from_polar(1.0, z[1]));
        assert!(rel(&linear_propagate(&e, 0.0), &e) < 1e-15);
        let t = 0.73;
        let expected = e.scale(Complex64::from_polar(1.0, -t));
        assert!(rel(&linear_propagate(&e, t), &expected) < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = Field::random(&g, &mut rng, 1.0);
        for s in [-1.0, 0.0, 1.0, 2.0] {
            let s = SobolevIndex::new(s);
            let a = linear_propagate(&f, 2.3).sobolev_norm(s);
            assert!((a - f.sobolev_norm(s)).abs() < 1e-12 * a);
        }
        let ab = linear_propagate(&linear_propagate(&f, 0.4), 1.1);
        assert!(rel(&ab, &linear_propagate(&f, 1.5)) < 1e-12);
    }

    #[test]
    fn fiber_wavenumbers_fold_around_alpha() {
        assert_eq!(fiber_wavenumber(8, 4, 0.0), -4);
        assert_eq!(fiber_wavenumber(8, 4, 0.5), 4);
        assert_eq!(fiber_wavenumber(8, 3, 0.5), 3);
        assert_eq!(fiber_wavenumber(8, 5, 0.5), -3);
        for i in 0..8 {
            let k = fiber_wavenumber(8, i, 0.25) as f64;
            assert!(k - 0.25 >= -4.0 && k - 0.25 < 4.0);
        }
    }

    #[test]
    fn twisted_flow_cases() {
        let g = WaveguideGrid::uniform(1, 1, 1, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = Field::random(&g, &mut rng, 0.0);
        let tw = twisted_propagate(&f, &[0.0], 0.9).unwrap();
        assert!(rel(&tw.field, &linear_propagate(&f, 0.9)) < 1e-12);
        assert!(tw.warning.is_none());

        let e = Field::from_fn(&g, |z| Complex64::from_polar(1.0, z[0]));
        let t = 1.7;
        let tw = twisted_propagate(&e, &[0.5], t).unwrap();
        assert!(rel(&tw.field, &e.scale(Complex64::from_polar(1.0, -t / 4.0))) < 1e-12);

        let tw = twisted_propagate(&e, &[1.5], t).unwrap();
        assert_eq!(tw.alpha, vec![0.5]);
        assert!(tw.warning.is_some());

        let sup = WaveguideGrid::uniform(1, 1, 2, 16).unwrap();
        assert!(twisted_propagate(&Field::zeros(&sup, Representation::Spectral), &[0.0], 1.0).is_err());
    }

    #[test]
    fn constant_field_gets_exact_phase() {
        let g = grid();
        let c = Complex64::new(0.3, 0.4);
        let u = Field::from_fn(&g, |_| c);
        for nl in [Nonlinearity::Focusing, Nonlinearity::Defocusing] {
            for dealias in [true, false] {
                let p = NlsParams::new(nl, 0.01).unwrap().with_dealias(dealias);
                let out = nls_step(&u, 0.0, &p, &NoSource).unwrap();
                let expected = Field::from_fn(&g, |_| c * Complex64::from_polar(1.0, nl.epsilon() * c.norm_sqr() * 0.01));
                assert!(out.max_abs_diff(&expected).unwrap() < 1e-14);
            }
        }
    }

    #[test]
    fn linear_limit_is_free_flow() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = Field::random(&g, &mut rng, 2.0);
        let p = NlsParams::new(Nonlinearity::Off, 0.03).unwrap();
        let out = nls_step(&u, 0.0, &p, &NoSource).unwrap();
        assert!(rel(&out, &linear_propagate(&u, 0.03)) < 1e-12);
    }

    #[test]
    fn step_pair_is_reversible() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = Field::random(&g, &mut rng, 2.0).scale(Complex64::new(0.5, 0.0));
        for dt in [0.1, 0.05, 0.025] {
            let p = NlsParams::new(Nonlinearity::Focusing, dt).unwrap();
            let fwd = nls_step(&u, 0.0, &p, &NoSource).unwrap();
            let back = nls_step(&fwd, dt, &NlsParams { dt: -dt, ..p }, &NoSource).unwrap();
            assert!(rel(&back, &u) < dt.powi(3), "dt = {dt}: {}", rel(&back, &u));
        }
    }

    #[test]
    fn zero_stays_zero_and_mass_is_conserved() {
        let g = grid();
        let p = NlsParams::new(Nonlinearity::Focusing, 1e-3).unwrap();
        let z = Field::zeros(&g, Representation::Spectral);
        let tr = nls_solve(&z, 0.0, 0.1, &p, &NoSource, &Checkpoints::Stride(10)).unwrap();
        assert!(tr.states.iter().all(|s| s.l2_norm() == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = Field::random(&g, &mut rng, 3.0).scale(Complex64::new(0.2, 0.0));
        for nl in [Nonlinearity::Focusing, Nonlinearity::Defocusing] {
            let p = NlsParams::new(nl, 1e-3).unwrap();
            let tr = nls_solve(&u, 0.0, 1.0, &p, &NoSource, &Checkpoints::Stride(100)).unwrap();
            let m0 = tr.diagnostics[0].mass;
            for d in &tr.diagnostics {
                assert!((d.mass.sqrt() - m0.sqrt()).abs() < 1e-8 * m0.sqrt());
            }
        }
    }

    #[test]
    fn forward_backward_recovers_data() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = Field::random(&g, &mut rng, 3.0).scale(Complex64::new(0.3, 0.0));
        let p = NlsParams::new(Nonlinearity::Focusing, 1e-2).unwrap();
        let f = nls_solve(&u, 0.0, 1.0, &p, &NoSource, &Checkpoints::Endpoints).unwrap();
        let b = nls_solve(f.final_state(), 1.0, 0.0, &p, &NoSource, &Checkpoints::Endpoints).unwrap();
        assert_eq!(b.final_time(), 0.0);
        assert!(rel(b.final_state(), &u) < 1e-4);
    }

    #[test]
    fn rejects_bad_intervals() {
        let g = grid();
        let u = Field::zeros(&g, Representation::Spectral);
        let p = NlsParams::new(Nonlinearity::Focusing, 0.3).unwrap();
        assert!(nls_solve(&u, 0.0, 1.0, &p, &NoSource, &Checkpoints::Endpoints).is_err());
        assert!(nls_solve(&u, 1.0, 1.0, &p, &NoSource, &Checkpoints::Endpoints).is_err());
        assert!(NlsParams::new(Nonlinearity::Focusing, 0.0).is_err());
        assert!(Nonlinearity::from_epsilon(0.5).is_err());
        let p = NlsParams::new(Nonlinearity::Focusing, 0.25).unwrap();
        assert!(nls_solve(&u, 0.0, 1.0, &p, &NoSource, &Checkpoints::Times(vec![0.3])).is_err());
    }

    #[test]
    fn blow_up_is_reported_with_last_good_state() {
        let g = grid();
        let u = Field::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        let p = NlsParams::new(Nonlinearity::Focusing, 0.1).unwrap();
        let bad = FnSource(|t: f64| {
            (t > 0.3).then(|| Field::from_fn(&grid(), |_| Complex64::new(f64::NAN, 0.0)))
        });
        match nls_solve(&u, 0.0, 1.0, &p, &bad, &Checkpoints::Stride(1)) {
            Err(Error::BlowUp { t, last_good }) => {
                assert!((t - 0.4).abs() < 1e-12);
                assert!((last_good.unwrap().final_time() - 0.3).abs() < 1e-12);
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn diagnostics_csv_shape() {
        let g = grid();
        let u = Field::from_fn(&g, |_| Complex64::new(0.1, 0.0));
        let p = NlsParams::new(Nonlinearity::Focusing, 0.1).unwrap();
        let tr = nls_solve(&u, 0.0, 1.0, &p, &NoSource, &Checkpoints::Stride(5)).unwrap();
        let mut out = Vec::new();
        tr.write_diagnostics_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,mass,h1,max_abs");
        assert_eq!(text.lines().count(), 4);
    }
}
