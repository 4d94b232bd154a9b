//! TOML experiment configuration.
//!
//! ```toml
//! kind = "linear-null-control"
//! seed = 7
//!
//! [grid]
//! m = 1
//! n = 1
//! supercell = 2
//! points = [32, 32]
//!
//! [region]
//! omega1 = [[0.0, 1.5]]   # one interval per Euclidean axis
//! omega2 = [[0.0, 1.5]]   # one interval per periodic axis
//! margin = 0.25
//! in_pi = true            # endpoints and margin are multiples of π
//!
//! [time]
//! horizon = 1.0
//! steps = 64
//!
//! [solver]
//! s = 1.0
//! cg_tol = 1e-10
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::WaveguideGrid;
use crate::regions::{ControlRegion, Interval};
use crate::xsb::{TrilinearEstimate, XsbParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ObservabilitySweep,
    StationaryEstimate,
    LinearNullControl,
    NonlinearNullControl,
    ExactControl,
    XsbChecks,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::ObservabilitySweep => "observability-sweep",
            ExperimentKind::StationaryEstimate => "stationary-estimate",
            ExperimentKind::LinearNullControl => "linear-null-control",
            ExperimentKind::NonlinearNullControl => "nonlinear-null-control",
            ExperimentKind::ExactControl => "exact-control",
            ExperimentKind::XsbChecks => "xsb-checks",
        }
    }

    fn needs_region(self) -> bool {
        !matches!(self, ExperimentKind::XsbChecks)
    }

    fn needs_time(self) -> bool {
        matches!(
            self,
            ExperimentKind::ObservabilitySweep
                | ExperimentKind::LinearNullControl
                | ExperimentKind::NonlinearNullControl
                | ExperimentKind::ExactControl
        )
    }

    fn is_control(self) -> bool {
        matches!(
            self,
            ExperimentKind::LinearNullControl | ExperimentKind::NonlinearNullControl | ExperimentKind::ExactControl
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub m: usize,
    pub n: usize,
    pub supercell: usize,
    pub points: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionBlock {
    /// Observe everywhere: `χ ≡ 1`, and `φ ≡ 1` for control runs.
    #[serde(default)]
    pub full: bool,
    #[serde(default)]
    pub omega1: Vec<[f64; 2]>,
    #[serde(default)]
    pub omega2: Vec<[f64; 2]>,
    #[serde(default)]
    pub margin: f64,
    #[serde(default)]
    pub in_pi: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBlock {
    pub horizon: f64,
    /// Time steps for control runs, quadrature panels otherwise.
    pub steps: usize,
    /// Gauss-Legendre order per panel for observability sweeps.
    #[serde(default = "default_order")]
    pub order: usize,
    /// Extra horizons for observability sweeps; `horizon` is always included.
    #[serde(default)]
    pub sweep: Vec<f64>,
}

fn default_order() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    /// Must equal `horizon / steps` when given.
    pub dt: Option<f64>,
    pub epsilon: f64,
    pub s: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub eig_tol: f64,
    /// Coarse-space cap for the Gramian preconditioner; absent means plain CG.
    pub preconditioner_cap: Option<f64>,
    /// `‖u0‖_{H^s}` of the random initial datum.
    pub data_norm: f64,
    /// `‖u_f‖_{H^s}` of the random target for exact control.
    pub target_norm: f64,
    /// Spectral decay exponent of the random data.
    pub data_decay: f64,
    /// Largest admissible `‖u(T)‖ / ‖u0‖` (or target error ratio).
    pub null_tol: f64,
    pub delta: f64,
    pub eta: f64,
    pub max_sweeps: usize,
    pub fixed_point_tol: f64,
    pub relaxation: f64,
    /// Eigenvalue cap for the stationary estimate.
    pub xi2_cap: f64,
    pub probes: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        SolverBlock {
            dt: None,
            epsilon: 0.0,
            s: 0.0,
            cg_tol: 1e-10,
            cg_max_iter: 4000,
            eig_tol: 1e-8,
            preconditioner_cap: None,
            data_norm: 1e-2,
            target_norm: 1e-2,
            data_decay: 3.0,
            null_tol: 1e-6,
            delta: 0.1,
            eta: 1.0,
            max_sweeps: 30,
            fixed_point_tol: 1e-9,
            relaxation: 1.0,
            xi2_cap: 100.0,
            probes: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XsbBlock {
    pub s: f64,
    pub b: f64,
    pub b_prime: f64,
    pub r: f64,
    pub samples: usize,
    pub bands: Vec<usize>,
    pub modulation: usize,
    pub nt: usize,
    pub period: f64,
    /// Estimate labels; empty selects all.
    pub estimates: Vec<String>,
    pub gain_nt: usize,
    pub gain_period: f64,
    pub gain_horizons: Vec<f64>,
    pub gain_frequencies: Vec<f64>,
    /// Largest allowed growth of the normalized gain ratio over the sweep.
    pub gain_growth_limit: f64,
}

impl Default for XsbBlock {
    fn default() -> Self {
        let p = XsbParams::default();
        XsbBlock {
            s: p.s,
            b: p.b,
            b_prime: p.b_prime,
            r: p.r,
            samples: 50,
            bands: vec![1, 2, 4],
            modulation: 2,
            nt: 256,
            period: 2.0 * PI,
            estimates: Vec::new(),
            gain_nt: 8192,
            gain_period: 8.0,
            gain_horizons: (0..6).map(|k| 0.5f64.powi(k)).collect(),
            gain_frequencies: vec![0.0, 1.0, 2.0, 4.0],
            gain_growth_limit: 2.0,
        }
    }
}

impl XsbBlock {
    pub fn params(&self) -> XsbParams {
        XsbParams {
            s: self.s,
            b: self.b,
            b_prime: self.b_prime,
            r: self.r,
        }
    }

    pub fn selected(&self) -> Result<Vec<TrilinearEstimate>> {
        if self.estimates.is_empty() {
            return Ok(TrilinearEstimate::ALL.to_vec());
        }
        self.estimates
            .iter()
            .map(|l| {
                TrilinearEstimate::from_label(l)
                    .ok_or_else(|| Error::config("xsb.estimates", format!("unknown estimate `{l}`")))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub grid: Option<GridBlock>,
    pub region: Option<RegionBlock>,
    pub time: Option<TimeBlock>,
    pub solver: Option<SolverBlock>,
    pub xsb: Option<XsbBlock>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|s| format!("byte {}", s.start))
                .unwrap_or_else(|| "<root>".into());
            Error::config(path, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::config(path.as_ref().display().to_string(), e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn solver(&self) -> SolverBlock {
        self.solver.clone().unwrap_or_default()
    }

    pub fn xsb_block(&self) -> XsbBlock {
        self.xsb.clone().unwrap_or_default()
    }

    /// Checks that every block the kind needs is present and consistent.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind;
        let grid = self.grid.as_ref().ok_or_else(|| Error::config("grid", "missing block"))?;
        self.build_grid()?;
        if kind.needs_region() {
            let region = self
                .region
                .as_ref()
                .ok_or_else(|| Error::config("region", format!("missing block, required by {}", kind.label())))?;
            if !region.full {
                if region.omega1.len() != grid.m {
                    return Err(Error::config(
                        "region.omega1",
                        format!("need {} intervals, got {}", grid.m, region.omega1.len()),
                    ));
                }
                if region.omega2.len() != grid.n {
                    return Err(Error::config(
                        "region.omega2",
                        format!("need {} intervals, got {}", grid.n, region.omega2.len()),
                    ));
                }
            }
            self.build_region()?;
        }
        if kind.needs_time() {
            let time = self
                .time
                .as_ref()
                .ok_or_else(|| Error::config("time", format!("missing block, required by {}", kind.label())))?;
            if !(time.horizon > 0.0 && time.horizon.is_finite()) {
                return Err(Error::config("time.horizon", "must be positive"));
            }
            if time.steps == 0 {
                return Err(Error::config("time.steps", "must be positive"));
            }
            if time.order == 0 {
                return Err(Error::config("time.order", "must be positive"));
            }
            if time.sweep.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
                return Err(Error::config("time.sweep", "horizons must be positive"));
            }
        }
        let s = self.solver();
        if kind.is_control() {
            let time = self.time.as_ref().expect("checked above");
            if let Some(dt) = s.dt {
                let expect = time.horizon / time.steps as f64;
                if (dt - expect).abs() > 1e-12 * expect {
                    return Err(Error::config(
                        "solver.dt",
                        format!("must equal horizon / steps = {expect}"),
                    ));
                }
            }
        }
        if ![-1.0, 0.0, 1.0].contains(&s.epsilon) {
            return Err(Error::config("solver.epsilon", "must be -1, 0 or 1"));
        }
        if !(s.s >= 0.0 && s.s.is_finite()) {
            return Err(Error::config("solver.s", "must be non-negative"));
        }
        if kind == ExperimentKind::ObservabilitySweep && s.s != 0.0 {
            return Err(Error::config("solver.s", "observability sweeps use s = 0"));
        }
        if !(s.cg_tol > 0.0 && s.cg_tol < 1.0) {
            return Err(Error::config("solver.cg_tol", "must lie in (0, 1)"));
        }
        if s.cg_max_iter == 0 {
            return Err(Error::config("solver.cg_max_iter", "must be positive"));
        }
        if !(s.eig_tol > 0.0) {
            return Err(Error::config("solver.eig_tol", "must be positive"));
        }
        if !(s.data_norm >= 0.0 && s.target_norm >= 0.0 && s.null_tol > 0.0) {
            return Err(Error::config("solver", "norms must be non-negative and null_tol positive"));
        }
        if let Some(cap) = s.preconditioner_cap {
            if !(cap >= 0.0) {
                return Err(Error::config("solver.preconditioner_cap", "must be non-negative"));
            }
        }
        if kind == ExperimentKind::XsbChecks {
            let x = self.xsb_block();
            x.params()
                .validate()
                .map_err(|e| Error::config("xsb", e.to_string()))?;
            x.selected()?;
            if x.bands.is_empty() || x.bands.contains(&0) {
                return Err(Error::config("xsb.bands", "need at least one positive band"));
            }
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Arc<WaveguideGrid>> {
        let g = self.grid.as_ref().ok_or_else(|| Error::config("grid", "missing block"))?;
        WaveguideGrid::new(g.m, g.n, g.supercell, &g.points).map_err(|e| Error::config("grid", e.to_string()))
    }

    pub fn build_region(&self) -> Result<ControlRegion> {
        let r = self
            .region
            .as_ref()
            .ok_or_else(|| Error::config("region", "missing block"))?;
        let g = self.grid.as_ref().ok_or_else(|| Error::config("grid", "missing block"))?;
        if r.full {
            return Ok(ControlRegion::full(g.m, g.n));
        }
        let unit = if r.in_pi { PI } else { 1.0 };
        let side = |v: &[[f64; 2]]| v.iter().map(|[a, b]| Interval::new(a * unit, b * unit)).collect();
        ControlRegion::product(side(&r.omega1), side(&r.omega2), r.margin * unit)
            .map_err(|e| Error::config("region", e.to_string()))
    }
}
