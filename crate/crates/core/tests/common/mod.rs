//! Brute-force reference computations shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use waveguide_control::xsb::{SpaceTimeField, TrilinearEstimate, XsbParams};
use waveguide_control::WaveguideGrid;

pub type C64 = Complex64;

/// Sparse space-time spectrum: `(wavenumbers, τ lattice index) -> coefficient`.
pub type Sparse = HashMap<(Vec<i64>, i64), C64>;

/// Random sparse spectrum with `|k_a| <= band` and `|τ index| <= tband`.
pub fn random_sparse(dim: usize, band: i64, tband: i64, rng: &mut ChaCha8Rng) -> Sparse {
    let mut out = Sparse::new();
    let mut k = vec![-band; dim];
    loop {
        for t in -tband..=tband {
            if rng.gen_bool(0.7) {
                out.insert((k.clone(), t), C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
        }
        let mut a = 0;
        loop {
            if a == dim {
                return out;
            }
            k[a] += 1;
            if k[a] <= band {
                break;
            }
            k[a] = -band;
            a += 1;
        }
    }
}

/// Dense `[τ slot][ξ slot]` layout of a sparse spectrum.
pub fn to_field(grid: &Arc<WaveguideGrid>, period: f64, nt: usize, sparse: &Sparse) -> SpaceTimeField {
    let mut dense = vec![C64::default(); nt * grid.len()];
    for ((k, t), v) in sparse {
        let slot = t.rem_euclid(nt as i64) as usize;
        dense[slot * grid.len() + grid.index_of_wavenumbers(k)] = *v;
    }
    SpaceTimeField::from_spectrum(grid, period, 0.0, nt, dense).unwrap()
}

/// `a · conj(b) · c` by explicit convolution of the spectra.
pub fn convolve3(a: &Sparse, b: &Sparse, c: &Sparse) -> Sparse {
    let mut out = Sparse::new();
    for ((k1, t1), x) in a {
        for ((k2, t2), y) in b {
            for ((k3, t3), z) in c {
                let k: Vec<i64> = (0..k1.len()).map(|i| k1[i] - k2[i] + k3[i]).collect();
                *out.entry((k, t1 - t2 + t3)).or_default() += x * y.conj() * z;
            }
        }
    }
    out
}

pub fn sub(a: &Sparse, b: &Sparse) -> Sparse {
    let mut out = a.clone();
    for (key, v) in b {
        *out.entry(key.clone()).or_default() -= v;
    }
    out
}

/// `xi2` of integer wavenumbers on `grid`.
pub fn xi2_of(grid: &WaveguideGrid, k: &[i64]) -> f64 {
    k.iter()
        .enumerate()
        .map(|(a, &ka)| {
            let f = ka as f64 * grid.frequency_step(a);
            f * f
        })
        .sum()
}

/// `‖·‖_{X^{s,b}}` of a sparse spectrum, with the weight written out directly.
pub fn sparse_norm(grid: &WaveguideGrid, period: f64, sparse: &Sparse, s: f64, b: f64) -> f64 {
    let step = 2.0 * PI / period;
    let sum: f64 = sparse
        .iter()
        .map(|((k, t), v)| {
            let xi2 = xi2_of(grid, k);
            let tau = step * *t as f64;
            (1.0 + (tau - xi2).powi(2)).powf(b) * (1.0 + xi2).powf(s) * v.norm_sqr()
        })
        .sum();
    (grid.volume() * period * sum).sqrt()
}

/// Both sides of an estimate, evaluated on sparse spectra.
pub fn oracle_sides(
    e: TrilinearEstimate,
    grid: &WaveguideGrid,
    period: f64,
    inputs: &[Sparse],
    p: &XsbParams,
) -> (f64, f64) {
    let bp = p.b_prime;
    let n = |u: &Sparse, s: f64| sparse_norm(grid, period, u, s, bp);
    let lhs = |prod: &Sparse, s: f64| sparse_norm(grid, period, prod, s, -bp);
    match e {
        TrilinearEstimate::Cubic => {
            let u = &inputs[0];
            (lhs(&convolve3(u, u, u), p.r), n(u, p.s).powi(2) * n(u, p.r))
        }
        TrilinearEstimate::CubicMixed => {
            let (u, v) = (&inputs[0], &inputs[1]);
            (lhs(&convolve3(u, u, v), p.r), n(u, p.s) * n(u, p.r) * n(v, p.r))
        }
        TrilinearEstimate::CubicLipschitz => {
            let (u, v) = (&inputs[0], &inputs[1]);
            let d = sub(&convolve3(u, u, u), &convolve3(v, v, v));
            (
                lhs(&d, p.s),
                (n(u, p.s).powi(2) + n(v, p.s).powi(2)) * n(&sub(u, v), p.s),
            )
        }
        TrilinearEstimate::PotentialPair => {
            let (a1, a2, u) = (&inputs[0], &inputs[1], &inputs[2]);
            (lhs(&convolve3(a1, a2, u), p.s), n(a1, 1.0) * n(a2, 1.0) * n(u, p.s))
        }
        TrilinearEstimate::PotentialModulus => {
            let (a, u) = (&inputs[0], &inputs[1]);
            (lhs(&convolve3(a, a, u), p.s), n(a, 1.0) * n(a, p.r) * n(u, p.s))
        }
    }
}

/// Worst relative disagreement between the library and the convolution
/// oracle over `samples` random inputs on the 8 x 8 x 8 space-time grid.
pub fn trilinear_oracle_error(samples: usize, seed: u64) -> f64 {
    let grid = WaveguideGrid::new(1, 1, 1, &[8, 8]).unwrap();
    let period = 2.0 * PI;
    let nt = 8;
    let p = XsbParams {
        s: 0.7,
        r: 1.3,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let sparse: Vec<Sparse> = (0..3).map(|_| random_sparse(2, 1, 1, &mut rng)).collect();
        let fields: Vec<SpaceTimeField> = sparse.iter().map(|s| to_field(&grid, period, nt, s)).collect();
        for e in TrilinearEstimate::ALL {
            let (lib_l, lib_r) = e.sides(&fields, &p).unwrap().unwrap();
            let (ora_l, ora_r) = oracle_sides(e, &grid, period, &sparse, &p);
            worst = worst
                .max((lib_l - ora_l).abs() / ora_l)
                .max((lib_r - ora_r).abs() / ora_r);
        }
    }
    worst
}
