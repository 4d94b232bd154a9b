//! Grids, fields and the two propagators: the free group is an exact
//! Fourier multiplier, the cubic equation is integrated by Strang splitting.
//!
//! ```bash
//! cargo run --release --example spectral_basics
//! ```

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waveguide_control::propagators::{linear_propagate, nls_solve, Checkpoints, NlsParams, NoSource, Nonlinearity};
use waveguide_control::{Field, SobolevIndex, WaveguideGrid};

fn main() -> waveguide_control::Result<()> {
    // R x T with a 2π·4 supercell in the Euclidean direction
    let grid = WaveguideGrid::new(1, 1, 4, &[128, 32])?;
    println!("grid {:?}, volume {:.3}, Δξ = {:?}", grid.points(), grid.volume(), [grid.frequency_step(0), grid.frequency_step(1)]);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u0 = Field::random(&grid, &mut rng, 2.0);
    let round = u0.as_physical().as_spectral();
    println!("FFT round trip error {:.2e}", round.max_abs_diff(&u0)?);
    for s in [0.0, 1.0, 2.0] {
        println!("‖u0‖_H^{s} = {:.6}", u0.sobolev_norm(SobolevIndex::new(s)));
    }

    let u1 = linear_propagate(&u0, 1.7);
    let back = linear_propagate(&u1, -1.7);
    println!(
        "free flow: H^1 drift {:.2e}, group law error {:.2e}",
        (u1.sobolev_norm(SobolevIndex::new(1.0)) - u0.sobolev_norm(SobolevIndex::new(1.0))).abs(),
        back.max_abs_diff(&u0)?
    );

    let small = u0.scale(Complex64::new(0.05, 0.0));
    for nl in [Nonlinearity::Focusing, Nonlinearity::Defocusing] {
        let params = NlsParams::new(nl, 1e-3)?;
        let traj = nls_solve(&small, 0.0, 1.0, &params, &NoSource, &Checkpoints::Stride(250))?;
        for d in &traj.diagnostics {
            println!("{nl:?} t = {:.3}  mass {:.12}  H^1 {:.6}  max|u| {:.4}", d.t, d.mass, d.h1, d.max_abs);
        }
        let rev = nls_solve(traj.final_state(), 1.0, 0.0, &params, &NoSource, &Checkpoints::Endpoints)?;
        println!("{nl:?} reversibility error {:.2e}", rev.final_state().max_abs_diff(&small)?);
    }
    Ok(())
}
