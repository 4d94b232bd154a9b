//! Executes one configured experiment and writes its artifacts.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::field::{Field, SobolevIndex};
use crate::floquet::{resolvent_ratio, ResolventConfig};
use crate::grid::WaveguideGrid;
use crate::hum::{
    exact_control, linear_null_control, midpoint_gramian, nonlinear_null_control, v_equation_residual,
    ControlSolution, FixedPointConfig, HumSolveConfig,
};
use crate::io::write_field;
use crate::observability::{observability_constant, EigenSolverSettings, GramianSpec, Quadrature};
use crate::propagators::{nls_solve, Checkpoints, NlsParams, Nonlinearity};
use crate::regions::{build_chi, CutoffChi};
use crate::xsb::{gain_integration_scaling, trilinear_ratio, GainConfig, TrilinearConfig};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// One checked property of a run. Only `asserted` checks decide the exit status.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
    pub asserted: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub code_version: String,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub stages: Vec<StageTiming>,
    pub files: Vec<FileEntry>,
    pub invariants: Vec<InvariantCheck>,
    /// Flat scalar results, collated by `report`.
    pub summary: BTreeMap<String, f64>,
    pub failure: Option<String>,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.invariants.iter().all(|c| c.passed || !c.asserted)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Collects the artifacts of a run.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    stages: Vec<StageTiming>,
    invariants: Vec<InvariantCheck>,
    summary: BTreeMap<String, f64>,
}

impl Outputs {
    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn with_writer(&mut self, name: &str, f: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
        f(BufWriter::new(File::create(self.dir.join(name))?))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn field(&mut self, name: &str, field: &Field) -> Result<()> {
        self.with_writer(name, |mut w| {
            write_field(field, &mut w)?;
            w.flush()?;
            Ok(())
        })
    }

    fn check(&mut self, name: &str, value: f64, limit: f64, passed: bool) {
        self.invariants.push(InvariantCheck {
            name: name.into(),
            value,
            limit,
            passed,
            asserted: true,
        });
    }

    fn observe(&mut self, name: &str, value: f64, limit: f64, passed: bool) {
        self.invariants.push(InvariantCheck {
            name: name.into(),
            value,
            limit,
            passed,
            asserted: false,
        });
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let out = f();
        self.stages.push(StageTiming {
            stage: name.into(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        out
    }

    fn put(&mut self, key: &str, value: f64) {
        self.summary.insert(key.into(), value);
    }
}

fn e(v: f64) -> String {
    format!("{v:e}")
}

/// Runs `config`, writing artifacts and `manifest.json` into `out_dir`.
///
/// Configuration problems are returned as errors before anything is written.
/// Failures during the experiment are recorded in the manifest instead.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let mut out = Outputs {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
        stages: Vec::new(),
        invariants: Vec::new(),
        summary: BTreeMap::new(),
    };
    let result = match config.kind {
        ExperimentKind::ObservabilitySweep => observability_sweep(config, &mut out),
        ExperimentKind::StationaryEstimate => stationary_estimate(config, &mut out),
        ExperimentKind::LinearNullControl => linear_control(config, &mut out),
        ExperimentKind::NonlinearNullControl => nonlinear_control(config, &mut out),
        ExperimentKind::ExactControl => exact(config, &mut out),
        ExperimentKind::XsbChecks => xsb_checks(config, &mut out),
    };
    let failure = match result {
        Ok(()) => None,
        Err(err @ Error::Config { .. }) => return Err(err),
        Err(err) => Some(err.to_string()),
    };
    let files = out
        .files
        .iter()
        .map(|name| {
            let bytes = fs::read(out_dir.join(name))?;
            Ok(FileEntry {
                name: name.clone(),
                sha256: hex::encode(Sha256::digest(&bytes)),
                bytes: bytes.len() as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        config: config.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        threads: rayon::current_num_threads(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        stages: out.stages,
        files,
        invariants: out.invariants,
        summary: out.summary,
        failure,
    };
    let tmp = out_dir.join(format!("{MANIFEST}.tmp"));
    fs::write(&tmp, serde_json::to_vec_pretty(&manifest)?)?;
    fs::rename(&tmp, out_dir.join(MANIFEST))?;
    Ok(manifest)
}

fn chi_of(config: &ExperimentConfig, grid: &std::sync::Arc<WaveguideGrid>) -> Result<(CutoffChi, bool)> {
    let region = config.build_region()?;
    if region.is_full() {
        Ok((CutoffChi::full(grid), true))
    } else {
        Ok((build_chi(&region, grid)?, false))
    }
}

/// Random datum with `‖u‖_{H^s} = norm`.
fn random_datum(grid: &std::sync::Arc<WaveguideGrid>, rng: &mut ChaCha8Rng, decay: f64, norm: f64, s: f64) -> Field {
    let u = Field::random(grid, rng, decay);
    let scale = norm / u.sobolev_norm(SobolevIndex::new(s));
    u.scale(Complex64::new(scale, 0.0))
}

fn observability_sweep(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let grid = config.build_grid()?;
    let (chi, _) = chi_of(config, &grid)?;
    let time = config.time.clone().expect("validated");
    let solver = config.solver();
    let settings = EigenSolverSettings {
        tol: solver.eig_tol,
        coarse_cap: solver.preconditioner_cap,
        seed: config.seed,
        ..Default::default()
    };
    let mut horizons = vec![time.horizon];
    horizons.extend(time.sweep.iter().copied().filter(|&t| t != time.horizon));
    let mut rows = Vec::new();
    for (i, &horizon) in horizons.iter().enumerate() {
        let quad = Quadrature::gauss_legendre(horizon, time.steps, time.order)?;
        let spec = GramianSpec::new(chi.clone(), SobolevIndex::L2, quad, false)?;
        let rep = out.stage(&format!("lanczos T={horizon}"), || observability_constant(&spec, &settings))?;
        let c_obs = rep.c_obs.unwrap_or(f64::INFINITY);
        let certified = rep.is_certified(settings.tol);
        out.check(&format!("certified T={horizon}"), rep.residual, settings.tol * rep.norm_estimate, certified);
        if i == 0 {
            out.put("horizon", horizon);
            out.put("lambda_min", rep.lambda_min);
            out.put("c_obs", c_obs);
            out.put("residual", rep.residual);
        }
        rows.push(vec![
            e(horizon),
            e(rep.lambda_min),
            e(c_obs),
            e(rep.residual),
            e(rep.norm_estimate),
            rep.lanczos_iterations.to_string(),
            rep.cg_iterations.iter().sum::<usize>().to_string(),
            certified.to_string(),
        ]);
    }
    out.csv(
        "observability.csv",
        &["horizon", "lambda_min", "c_obs", "residual", "norm_estimate", "lanczos_iterations", "inner_cg_iterations", "certified"],
        &rows,
    )
}

fn stationary_estimate(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let grid = config.build_grid()?;
    let region = config.build_region()?;
    let solver = config.solver();
    let cfg = ResolventConfig {
        xi2_cap: solver.xi2_cap,
        probes: solver.probes,
        seed: config.seed,
    };
    let rep = out.stage("resolvent", || resolvent_ratio(&grid, &region, &cfg))?;
    out.with_writer("eigen.csv", |w| rep.write_eigen_csv(w))?;
    out.with_writer("probes.csv", |w| rep.write_probe_csv(w))?;
    let c = rep.empirical_constant();
    out.put("empirical_c", c);
    out.check("finite constant", c, f64::INFINITY, c.is_finite());
    Ok(())
}

fn hum_config(config: &ExperimentConfig, grid: &std::sync::Arc<WaveguideGrid>) -> Result<HumSolveConfig> {
    let (chi, full) = chi_of(config, grid)?;
    let time = config.time.clone().expect("validated");
    let solver = config.solver();
    let dt = time.horizon / time.steps as f64;
    let spec = midpoint_gramian(chi, SobolevIndex::new(solver.s), time.horizon, dt, !full)?;
    let cfg = HumSolveConfig::new(spec, solver.cg_tol, solver.cg_max_iter)?;
    Ok(match solver.preconditioner_cap {
        Some(cap) => cfg.with_preconditioner(cap),
        None => cfg,
    })
}

fn nls_params(config: &ExperimentConfig) -> Result<NlsParams> {
    let time = config.time.clone().expect("validated");
    let solver = config.solver();
    NlsParams::new(
        Nonlinearity::from_epsilon(solver.epsilon)?,
        time.horizon / time.steps as f64,
    )
}

fn fixed_point(config: &ExperimentConfig) -> FixedPointConfig {
    let s = config.solver();
    FixedPointConfig {
        eta: s.eta,
        delta: s.delta,
        max_sweeps: s.max_sweeps,
        tol: s.fixed_point_tol,
        relaxation: s.relaxation,
    }
}

fn control_outputs(out: &mut Outputs, sol: &ControlSolution) -> Result<()> {
    let ratio = sol.final_norm / sol.initial_norm;
    out.put("initial_norm", sol.initial_norm);
    out.put("final_norm", sol.final_norm);
    out.put("ratio", ratio);
    out.put("sweeps", sol.sweeps.len() as f64);
    let rows: Vec<Vec<String>> = sol
        .cg_residuals
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i.to_string(), e(*r)])
        .collect();
    out.csv("cg_residuals.csv", &["iteration", "relative_residual"], &rows)?;
    out.with_writer("sweeps.csv", |w| sol.write_sweeps_csv(w))?;
    out.field("w0.wgf", &sol.w0)?;
    out.field("final_state.wgf", &sol.final_state)?;
    Ok(())
}

fn linear_control(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let grid = config.build_grid()?;
    let solver = config.solver();
    let hum = out.stage("setup", || hum_config(config, &grid))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let u0 = random_datum(&grid, &mut rng, solver.data_decay, solver.data_norm, solver.s);
    let sol = out.stage("hum", || linear_null_control(&u0, &hum))?;
    control_outputs(out, &sol)?;
    let ratio = sol.final_norm / sol.initial_norm;
    let mut row = vec![
        e(hum.horizon()),
        e(sol.initial_norm),
        e(sol.final_norm),
        e(ratio),
        sol.sweeps[0].cg_iterations.to_string(),
        sol.converged.to_string(),
    ];
    if solver.s == 0.0 {
        let settings = EigenSolverSettings {
            tol: solver.eig_tol,
            coarse_cap: solver.preconditioner_cap,
            seed: config.seed,
            ..Default::default()
        };
        let rep = out.stage("lanczos", || observability_constant(hum.gramian(), &settings))?;
        let c = rep.c_obs.unwrap_or(f64::INFINITY);
        out.put("c_obs", c);
        row.push(e(c));
    } else {
        row.push(String::new());
    }
    out.csv(
        "control.csv",
        &["horizon", "initial_norm", "final_norm", "ratio", "cg_iterations", "converged", "c_obs"],
        &[row],
    )?;
    out.check("null control ratio", ratio, solver.null_tol, ratio <= solver.null_tol);
    out.check("cg converged", sol.converged as u8 as f64, 1.0, sol.converged);
    Ok(())
}

fn nonlinear_control(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let grid = config.build_grid()?;
    let solver = config.solver();
    let hum = out.stage("setup", || hum_config(config, &grid))?;
    let nls = nls_params(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let u0 = random_datum(&grid, &mut rng, solver.data_decay, solver.data_norm, solver.s);
    let sol = out.stage("fixed point", || nonlinear_null_control(&u0, &nls, &fixed_point(config), &hum))?;
    control_outputs(out, &sol)?;
    let ratio = sol.final_norm / sol.initial_norm;
    let contraction = sol.contraction_factor().unwrap_or(0.0);
    let decreasing = sol.sweeps.windows(2).all(|w| w[1].update_norm < w[0].update_norm);
    out.put("contraction", contraction);
    out.check("null control ratio", ratio, solver.null_tol, ratio <= solver.null_tol);
    out.check("contraction factor", contraction, 1.0, contraction < 1.0);
    out.check("updates decreasing", decreasing as u8 as f64, 1.0, decreasing);
    out.check("fixed point converged", sol.converged as u8 as f64, 1.0, sol.converged);

    // v = u - Ψ along the controlled run
    let source = sol.source.clone();
    let stride = Checkpoints::Stride(1);
    let v_rep = out.stage("v residual", || {
        let psi = nls_solve(&sol.psi0, 0.0, hum.horizon(), &nls.linear(), &source, &stride)?;
        let u = nls_solve(&u0, 0.0, hum.horizon(), &nls, &source, &stride)?;
        v_equation_residual(&psi, &u, &nls)
    })?;
    let rows: Vec<Vec<String>> = v_rep
        .times
        .iter()
        .zip(&v_rep.residual_l2)
        .map(|(t, r)| vec![e(*t), e(*r)])
        .collect();
    out.csv("v_residual.csv", &["t", "residual_l2"], &rows)?;
    out.put("v_residual_max", v_rep.max_residual);
    out.check("cubic expansion identity", v_rep.expansion_error, 1e-12, v_rep.expansion_error <= 1e-12);
    Ok(())
}

fn exact(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let grid = config.build_grid()?;
    let solver = config.solver();
    let hum = out.stage("setup", || hum_config(config, &grid))?;
    let nls = nls_params(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let u0 = random_datum(&grid, &mut rng, solver.data_decay, solver.data_norm, solver.s);
    let uf = random_datum(&grid, &mut rng, solver.data_decay, solver.target_norm, solver.s);
    let sol = out.stage("exact control", || exact_control(&u0, &uf, &nls, &fixed_point(config), &hum))?;
    let scale = solver.data_norm + solver.target_norm;
    let err = sol.target_error.unwrap_or(f64::INFINITY);
    let junction = sol.junction_max.unwrap_or(f64::INFINITY);
    out.put("target_error", err);
    out.put("relative_target_error", err / scale);
    out.put("junction_max", junction);
    out.csv(
        "exact.csv",
        &["horizon", "initial_norm", "target_norm", "final_norm", "target_error", "junction_max"],
        &[vec![
            e(2.0 * hum.horizon()),
            e(sol.initial_norm),
            e(solver.target_norm),
            e(sol.final_norm),
            e(err),
            e(junction),
        ]],
    )?;
    out.with_writer("sweeps.csv", |w| sol.write_sweeps_csv(w))?;
    out.field("final_state.wgf", &sol.final_state)?;
    out.check("target error", err / scale, solver.null_tol, err <= solver.null_tol * scale);
    out.check("junction", junction, 1e-12, junction <= 1e-12);
    Ok(())
}

fn xsb_checks(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let grid = config.build_grid()?;
    let x = config.xsb_block();
    let estimates = x.selected()?;
    let cfg = TrilinearConfig {
        grid,
        period: x.period,
        nt: x.nt,
        bands: x.bands.clone(),
        samples: x.samples,
        modulation: x.modulation,
        params: x.params(),
        estimates: estimates.clone(),
        seed: config.seed,
    };
    let rep = out.stage("trilinear", || trilinear_ratio(&cfg))?;
    for &est in &estimates {
        out.with_writer(&format!("trilinear_{}.csv", est.label()), |w| rep.write_csv(est, w))?;
        let trend = rep.trend(est).into_iter().fold(0.0, f64::max);
        out.observe(&format!("{} growth per band doubling", est.label()), trend, 2.0, trend <= 2.0);
    }
    let rows: Vec<Vec<String>> = rep
        .summaries
        .iter()
        .map(|s| {
            vec![
                s.estimate.label().to_string(),
                s.band.to_string(),
                s.count.to_string(),
                s.degenerate.to_string(),
                e(s.max),
                e(s.median),
            ]
        })
        .collect();
    out.csv("trilinear_summary.csv", &["estimate", "band", "count", "degenerate", "max", "median"], &rows)?;

    let gain_cfg = GainConfig {
        params: x.params(),
        period: x.gain_period,
        nt: x.gain_nt,
        horizons: x.gain_horizons.clone(),
        frequencies: x.gain_frequencies.clone(),
    };
    let gain = out.stage("gain", || {
        gain_integration_scaling(|s| Complex64::new((-4.0 * s * s).exp(), 0.0), &gain_cfg)
    })?;
    let rows: Vec<Vec<String>> = gain
        .rows
        .iter()
        .map(|r| {
            vec![
                e(r.horizon),
                e(r.frequency),
                e(r.source_norm),
                e(r.primitive_norm),
                e(r.ratio),
                e(r.normalized),
            ]
        })
        .collect();
    out.csv(
        "gain.csv",
        &["horizon", "frequency", "source_norm", "primitive_norm", "ratio", "normalized"],
        &rows,
    )?;
    out.put("gain_slope", gain.slope);
    out.put("gain_growth", gain.growth);
    out.check("gain normalized growth", gain.growth, x.gain_growth_limit, gain.growth <= x.gain_growth_limit);
    Ok(())
}
