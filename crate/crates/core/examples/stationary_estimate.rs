//! Empirical constant of the stationary estimate `‖u‖ <= C ‖u‖_{L²(ω)}` over
//! Laplace eigenfunctions and random resolvent probes, at two resolutions.
//!
//! ```bash
//! cargo run --release --example stationary_estimate -- [xi2_cap]
//! ```

use std::f64::consts::PI;

use waveguide_control::floquet::{resolvent_ratio, ResolventConfig};
use waveguide_control::regions::{ControlRegion, Interval};
use waveguide_control::WaveguideGrid;

fn main() -> waveguide_control::Result<()> {
    let xi2_cap = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60.0);
    let region = ControlRegion::product(vec![Interval::new(0.0, PI)], vec![Interval::new(0.0, PI)], 0.0)?;
    let cfg = ResolventConfig {
        xi2_cap,
        probes: 20,
        seed: 5,
    };
    for n in [32, 64] {
        let grid = WaveguideGrid::new(1, 1, 2, &[n, n])?;
        let report = resolvent_ratio(&grid, &region, &cfg)?;
        println!("N = {n}");
        for row in report.eigen.iter().step_by(4) {
            println!("  λ = {:>8.3}  dim {:>3}  worst ratio {:.4}  C so far {:.4}", row.lambda, row.dim, row.worst_ratio, row.empirical_c);
        }
        let worst_probe = report.probes.iter().map(|p| p.empirical_c).fold(0.0, f64::max);
        println!("  eigenfunction constant {:.4}, probe constant {:.4}", report.empirical_constant(), worst_probe);
    }
    Ok(())
}
