//! Smallest eigenvalue of the observability Gramian by preconditioned
//! shift-invert Lanczos, for the smooth cutoff and the sharp indicator.
//!
//! ```bash
//! cargo run --release --example observability_constant -- [points]
//! ```

use std::f64::consts::PI;

use waveguide_control::observability::{observability_constant, EigenSolverSettings, GramianSpec, Quadrature};
use waveguide_control::regions::{build_chi, ControlRegion, Interval};
use waveguide_control::{SobolevIndex, WaveguideGrid};

fn main() -> waveguide_control::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let grid = WaveguideGrid::new(1, 1, 2, &[n, n])?;
    let region = ControlRegion::product(vec![Interval::new(0.0, PI)], vec![Interval::new(0.0, PI)], PI / 8.0)?;
    let chi = build_chi(&region, &grid)?;
    let spec = GramianSpec::new(chi, SobolevIndex::L2, Quadrature::gauss_legendre(0.5, 8, 8)?, false)?;
    let settings = EigenSolverSettings::default();
    for (name, spec) in [("smooth χ", spec.clone()), ("indicator", spec.sharp_variant()?)] {
        let r = observability_constant(&spec, &settings)?;
        println!(
            "{name:<10} λ_min = {:.5e}  C_obs = {}  residual {:.1e}  Lanczos {}  certified {}",
            r.lambda_min,
            r.c_obs.map_or("-".into(), |c| format!("{c:.5e}")),
            r.residual,
            r.lanczos_iterations,
            r.is_certified(1e-8)
        );
        if let Some(f) = &r.failure {
            println!("           {f}");
        }
    }
    Ok(())
}
