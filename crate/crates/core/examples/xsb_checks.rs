//! Bourgain-norm stress tests: trilinear ratios, the gain of integration
//! and restriction-norm upper bounds.
//!
//! ```bash
//! cargo run --release --example xsb_checks -- [samples]
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use waveguide_control::xsb::*;
use waveguide_control::{Field, WaveguideGrid};

fn main() -> waveguide_control::Result<()> {
    let samples = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(40);
    let grid = WaveguideGrid::new(1, 1, 1, &[32, 32])?;
    let cfg = TrilinearConfig {
        grid: grid.clone(),
        period: 2.0 * PI,
        nt: 256,
        bands: vec![1, 2, 4],
        samples,
        modulation: 2,
        params: XsbParams::default(),
        estimates: TrilinearEstimate::ALL.to_vec(),
        seed: 7,
    };
    let report = trilinear_ratio(&cfg)?;
    println!("{:<18} {:>4} {:>11} {:>11}", "estimate", "band", "max", "median");
    for s in &report.summaries {
        println!(
            "{:<18} {:>4} {:>11.4e} {:>11.4e}",
            s.estimate.label(),
            s.band,
            s.max,
            s.median
        );
    }
    for e in TrilinearEstimate::ALL {
        println!("{} max-ratio growth per band doubling: {:?}", e.label(), report.trend(e));
    }

    // Smooth bump probes for the gain of integration.
    let gain = gain_integration_scaling(
        |s| Complex64::new((-4.0 * s * s).exp(), 0.0),
        &GainConfig::default(),
    )?;
    for (t, w) in GainConfig::default().horizons.iter().zip(&gain.worst) {
        println!("T = {t:<8} worst ratio / T^(1-b-b') = {w:.4}");
    }
    println!("fitted slope {:.3}, growth over the sweep {:.3}", gain.slope, gain.growth);

    let u0 = Field::plane_wave(&grid, &[1, 2]);
    let est = restriction_norm_estimate(
        |t| waveguide_control::propagators::linear_propagate(&u0, t),
        0.5,
        2.0 * PI,
        64,
        1.0,
        0.55,
        &[ExtensionProfile::One, ExtensionProfile::Smooth { width: 1.0 }],
    )?;
    for (p, v) in &est.per_profile {
        println!("restriction bound with {p:?}: {v:.6}");
    }
    println!("best bound {:.6}", est.bound);
    Ok(())
}
