//! Null control of the defocusing cubic equation by a fixed point over
//! linear HUM solves, followed by the `v = u - Ψ` consistency check.
//!
//! ```bash
//! cargo run --release --example nonlinear_null_control -- [size]
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waveguide_control::hum::{midpoint_gramian, nonlinear_null_control, v_equation_residual, FixedPointConfig, HumSolveConfig};
use waveguide_control::propagators::{nls_solve, Checkpoints, NlsParams, Nonlinearity};
use waveguide_control::regions::{build_chi, ControlRegion, Interval};
use waveguide_control::{Field, SobolevIndex, WaveguideGrid};

fn main() -> waveguide_control::Result<()> {
    let size: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1e-2);
    let grid = WaveguideGrid::new(1, 1, 2, &[32, 32])?;
    let side = Interval::new(0.0, 1.5 * PI);
    let chi = build_chi(&ControlRegion::product(vec![side], vec![side], PI / 4.0)?, &grid)?;
    let s = SobolevIndex::new(1.0);
    let dt = 5e-3;
    let spec = midpoint_gramian(chi, s, 1.0, dt, true)?;
    let hum = HumSolveConfig::new(spec, 1e-10, 4000)?.with_preconditioner(2.0);
    let nls = NlsParams::new(Nonlinearity::Defocusing, dt)?;
    let fp = FixedPointConfig {
        tol: 1e-9,
        ..Default::default()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let u = Field::random(&grid, &mut rng, 3.0);
    let u0 = u.scale(Complex64::new(size / u.sobolev_norm(s), 0.0));
    let sol = nonlinear_null_control(&u0, &nls, &fp, &hum)?;
    for r in &sol.sweeps {
        println!("sweep {}: {} CG iterations, update {:.2e}", r.sweep, r.cg_iterations, r.update_norm);
    }
    println!(
        "converged {}, contraction {:?}, ‖u(T)‖/‖u0‖ = {:.2e}",
        sol.converged,
        sol.contraction_factor(),
        sol.final_norm / sol.initial_norm
    );

    let every = Checkpoints::Stride(1);
    let psi = nls_solve(&sol.psi0, 0.0, 1.0, &nls.linear(), &sol.source, &every)?;
    let full = nls_solve(&u0, 0.0, 1.0, &nls, &sol.source, &every)?;
    let rep = v_equation_residual(&psi, &full, &nls)?;
    println!(
        "v-equation residual max {:.2e} (dt² = {:.1e}), expansion identity {:.1e}",
        rep.max_residual,
        dt * dt,
        rep.expansion_error
    );
    Ok(())
}
