//! Partial Floquet-Bloch decomposition of a supercell field into `L^m`
//! quasi-momentum fibers, and the twisted flows acting on each fiber.
//!
//! ```bash
//! cargo run --release --example floquet_fibers
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waveguide_control::floquet::{fiber_commutes_with_flow, floquet_forward, floquet_inverse};
use waveguide_control::{Field, WaveguideGrid};

fn main() -> waveguide_control::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for l in [1, 2, 3, 4] {
        let grid = WaveguideGrid::new(1, 1, l, &[32 * l, 16])?;
        let u = Field::random(&grid, &mut rng, 1.0);
        let bundle = floquet_forward(&u)?;
        let fiber_mass: f64 = bundle.fibers().iter().map(|(_, f)| f.l2_norm().powi(2)).sum();
        println!(
            "L = {l}: {} fibers on {:?}, ‖u‖² = {:.10}, Σ‖fiber‖²/L = {:.10}",
            bundle.len(),
            bundle.fiber_grid().points(),
            u.l2_norm().powi(2),
            fiber_mass / l as f64
        );
        for (q, f) in bundle.fibers() {
            println!("   α = {:?}  ‖fiber‖ = {:.5}", q.alpha(), f.l2_norm());
        }
        let back = floquet_inverse(&bundle)?;
        println!("   inverse error {:.2e}", back.max_abs_diff(&u)?);
        for t in [0.5, 2.0] {
            println!("   fiber/flow commutation defect at t = {t}: {:.2e}", fiber_commutes_with_flow(&u, t)?);
        }
    }
    Ok(())
}
