//! Small numerical helpers shared across modules.

use num_complex::Complex64;

const PAIRWISE_BLOCK: usize = 64;

/// Pairwise summation with a fixed split order, so the result never depends on
/// how the caller schedules work.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_sum_by<F: Fn(usize) -> f64 + Copy>(range: std::ops::Range<usize>, f: F) -> f64 {
    if range.len() <= PAIRWISE_BLOCK {
        return range.map(f).sum();
    }
    let mid = range.start + range.len() / 2;
    pairwise_sum_by(range.start..mid, f) + pairwise_sum_by(mid..range.end, f)
}

pub fn pairwise_sum_complex<F: Fn(usize) -> Complex64 + Copy>(
    range: std::ops::Range<usize>,
    f: F,
) -> Complex64 {
    if range.len() <= PAIRWISE_BLOCK {
        return range.map(f).sum();
    }
    let mid = range.start + range.len() / 2;
    pairwise_sum_complex(range.start..mid, f) + pairwise_sum_complex(mid..range.end, f)
}

/// Euclidean inner product `Σ a_i conj(b_i)`.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    pairwise_sum_complex(0..a.len(), |i| a[i] * b[i].conj())
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    pairwise_sum_by(0..a.len(), |i| a[i].norm_sqr())
}

pub fn norm(a: &[Complex64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// `y <- y + alpha x`
pub fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    debug_assert_eq!(x.len(), y.len());
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Smooth C^∞ step: 0 for `x <= 0`, 1 for `x >= 1`,
/// `e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)})` in between.
pub fn smooth_ramp(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for order in 1..=12 {
            let (x, w) = gauss_legendre(order);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..(2 * order) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "order {order} degree {deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn ramp_is_a_monotone_step() {
        assert_eq!(smooth_ramp(-1.0), 0.0);
        assert_eq!(smooth_ramp(0.0), 0.0);
        assert_eq!(smooth_ramp(1.0), 1.0);
        assert!((smooth_ramp(0.5) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 1..100 {
            let v = smooth_ramp(i as f64 / 100.0);
            assert!(v >= prev);
            // symmetry r(x) + r(1-x) = 1
            assert!((v + smooth_ramp(1.0 - i as f64 / 100.0) - 1.0).abs() < 1e-14);
            prev = v;
        }
    }

    #[test]
    fn pairwise_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y) - 1.5).abs() < 1e-12);
    }
}
