//! Exact control between two small states: null-control `u0` on `[0, T/2]`,
//! reverse a null control of `conj(u_f)` on `[T/2, T]` and glue.
//!
//! ```bash
//! cargo run --release --example exact_control
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waveguide_control::hum::{exact_control, midpoint_gramian, FixedPointConfig, HumSolveConfig};
use waveguide_control::propagators::{NlsParams, Nonlinearity};
use waveguide_control::regions::{build_chi, ControlRegion, Interval};
use waveguide_control::{Field, SobolevIndex, WaveguideGrid};

fn main() -> waveguide_control::Result<()> {
    let grid = WaveguideGrid::new(1, 1, 2, &[32, 32])?;
    let side = Interval::new(0.0, 1.5 * PI);
    let chi = build_chi(&ControlRegion::product(vec![side], vec![side], PI / 4.0)?, &grid)?;
    let s = SobolevIndex::new(1.0);
    let dt = 5e-3;
    // each half gets the full horizon below
    let hum = HumSolveConfig::new(midpoint_gramian(chi, s, 1.0, dt, true)?, 1e-10, 4000)?.with_preconditioner(2.0);
    let nls = NlsParams::new(Nonlinearity::Focusing, dt)?;
    let fp = FixedPointConfig {
        tol: 1e-9,
        ..Default::default()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut datum = || {
        let u = Field::random(&grid, &mut rng, 3.0);
        u.scale(Complex64::new(1e-2 / u.sobolev_norm(s), 0.0))
    };
    let (u0, uf) = (datum(), datum());
    let sol = exact_control(&u0, &uf, &nls, &fp, &hum)?;
    println!(
        "horizon {}, sweeps {}, ‖u(T) - u_f‖ = {:.2e} (relative {:.2e}), control at the junction {:.1e}",
        sol.horizon,
        sol.sweeps.len(),
        sol.target_error.unwrap_or(f64::NAN),
        sol.target_error.unwrap_or(f64::NAN) / uf.sobolev_norm(s),
        sol.junction_max.unwrap_or(f64::NAN)
    );
    Ok(())
}
