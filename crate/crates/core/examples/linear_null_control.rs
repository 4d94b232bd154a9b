//! HUM null control of the linear equation in `H^1`: solve `G w0 = -u0`,
//! drive the controlled flow and check it vanishes at `T`.
//!
//! ```bash
//! cargo run --release --example linear_null_control
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waveguide_control::hum::{linear_null_control, midpoint_gramian, HumSolveConfig};
use waveguide_control::regions::{build_chi, ControlRegion, Interval};
use waveguide_control::{Field, SobolevIndex, WaveguideGrid};

fn main() -> waveguide_control::Result<()> {
    let grid = WaveguideGrid::new(1, 1, 2, &[32, 32])?;
    let side = Interval::new(0.0, 1.5 * PI);
    let region = ControlRegion::product(vec![side], vec![side], PI / 4.0)?;
    let chi = build_chi(&region, &grid)?;
    let s = SobolevIndex::new(1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u = Field::random(&grid, &mut rng, 3.0);
    let u0 = u.scale(Complex64::new(1.0 / u.sobolev_norm(s), 0.0));

    for steps in [50, 100, 200] {
        let spec = midpoint_gramian(chi.clone(), s, 1.0, 1.0 / steps as f64, true)?;
        let cfg = HumSolveConfig::new(spec, 1e-10, 4000)?.with_preconditioner(2.0);
        let sol = linear_null_control(&u0, &cfg)?;
        println!(
            "Nt = {steps:>3}: PCG iterations {:>4}, ‖u(T)‖/‖u0‖ = {:.2e}, ‖w0‖_H^-1 = {:.4}",
            sol.cg_residuals.len(),
            sol.final_norm / sol.initial_norm,
            sol.w0.sobolev_norm(SobolevIndex::new(-1.0))
        );
    }
    Ok(())
}
