//! The commutator `[χ, (1-Δ)^{s/2}]` is an operator of order `s - 1`:
//! measure its growth on plane waves and its skew-adjointness.
//!
//! ```bash
//! cargo run --release --example commutator_order
//! ```

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waveguide_control::regions::{build_chi, commutator_order_sweep, commutator_skew_residual, ControlRegion, Interval};
use waveguide_control::{Field, SobolevIndex, WaveguideGrid};

fn main() -> waveguide_control::Result<()> {
    let grid = WaveguideGrid::new(1, 1, 1, &[128, 128])?;
    let side = Interval::new(0.0, PI);
    let chi = build_chi(&ControlRegion::product(vec![side], vec![side], PI / 4.0)?, &grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (f, g) = (Field::random(&grid, &mut rng, 1.0), Field::random(&grid, &mut rng, 1.0));
    for s in [0.5, 1.0, 1.5, 2.0, 3.0] {
        let s = SobolevIndex::new(s);
        let sweep = commutator_order_sweep(&chi, s, 1, &[4, 8, 16, 32])?;
        println!(
            "s = {:<3}  norms {:?}  slope {:.3} (order {:.1})  skew residual {:.1e}",
            s.value(),
            sweep.norms.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>(),
            sweep.slope,
            s.value() - 1.0,
            commutator_skew_residual(&chi, s, &f, &g)?
        );
    }
    Ok(())
}
