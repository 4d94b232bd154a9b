//! Matrix-free Krylov solvers for Hermitian positive operators on `C^n`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::numerics::{axpy, dot, norm};

/// A Hermitian linear map on `C^n`, applied matrix-free.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;
}

impl<F: Fn(&[Complex64]) -> Vec<Complex64> + Sync> LinearOperator for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (self.1)(x)
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    /// Relative residual `‖r_k‖ / ‖b‖` after each iteration (recurrence values).
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// `⟨p, Ap⟩ <= 0` was met: the operator is not positive definite in floating point.
    pub breakdown: bool,
}

impl CgOutcome {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

/// Conjugate gradients for `A x = b`, stopping at `‖r‖ <= tol ‖b‖`.
pub fn conjugate_gradient(
    op: &dyn LinearOperator,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    preconditioned_cg(op, None, b, x0, tol, max_iter)
}

/// Conjugate gradients with an optional Hermitian positive preconditioner
/// `M ≈ A^{-1}`. The stopping test uses the unpreconditioned residual.
pub fn preconditioned_cg(
    op: &dyn LinearOperator,
    precond: Option<&dyn LinearOperator>,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = op.dim();
    let b_norm = norm(b);
    let mut x = x0.map_or_else(|| vec![Complex64::default(); n], |v| v.to_vec());
    if b_norm == 0.0 {
        return CgOutcome {
            x: vec![Complex64::default(); n],
            iterations: 0,
            residuals: vec![0.0],
            converged: true,
            breakdown: false,
        };
    }
    let mut r = b.to_vec();
    if x0.is_some() {
        let ax = op.apply(&x);
        r.iter_mut().zip(&ax).for_each(|(ri, ai)| *ri -= ai);
    }
    let mut residuals = vec![norm(&r) / b_norm];
    if residuals[0] <= tol {
        return CgOutcome {
            x,
            iterations: 0,
            residuals,
            converged: true,
            breakdown: false,
        };
    }
    let precondition = |r: &[Complex64]| match precond {
        Some(m) => m.apply(r),
        None => r.to_vec(),
    };
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z).re;
    for it in 1..=max_iter {
        let ap = op.apply(&p);
        let pap = dot(&ap, &p).re;
        if !(pap > 0.0 && rz > 0.0) {
            return CgOutcome {
                x,
                iterations: it - 1,
                residuals,
                converged: false,
                breakdown: true,
            };
        }
        let alpha = rz / pap;
        axpy(Complex64::new(alpha, 0.0), &p, &mut x);
        axpy(Complex64::new(-alpha, 0.0), &ap, &mut r);
        let r_norm = norm(&r);
        residuals.push(r_norm / b_norm);
        if r_norm <= tol * b_norm {
            return CgOutcome {
                x,
                iterations: it,
                residuals,
                converged: true,
                breakdown: false,
            };
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z).re;
        let beta = rz_new / rz;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + *pi * beta);
        rz = rz_new;
    }
    CgOutcome {
        x,
        iterations: max_iter,
        residuals,
        converged: false,
        breakdown: false,
    }
}

#[derive(Clone, Debug)]
pub struct LanczosConfig {
    pub max_iter: usize,
    /// Target `‖A y - λ y‖ <= tol · norm_estimate` for the returned pair.
    pub tol: f64,
    /// Upper bound for `‖A‖` used to scale the residual test.
    pub norm_estimate: f64,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
}

#[derive(Clone, Debug)]
pub struct EigenOutcome {
    pub eigenvalue: f64,
    pub vector: Vec<Complex64>,
    /// `‖A y - λ y‖` recomputed with one direct application, `‖y‖ = 1`.
    pub residual: f64,
    pub iterations: usize,
    pub inner_iterations: Vec<usize>,
    pub converged: bool,
}

/// Why shift-invert Lanczos gave up.
#[derive(Clone, Debug)]
pub struct LanczosFailure {
    pub message: String,
    pub iterations: usize,
    pub inner_iterations: Vec<usize>,
}

/// Smallest eigenpair of a Hermitian positive definite `A`, by Lanczos on
/// `A^{-1}` (shift zero) with inner conjugate-gradient solves and full
/// reorthogonalization.
pub fn smallest_eigenpair(
    op: &dyn LinearOperator,
    precond: Option<&dyn LinearOperator>,
    start: &[Complex64],
    cfg: &LanczosConfig,
) -> std::result::Result<EigenOutcome, LanczosFailure> {
    let n = op.dim();
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut inner_iterations = Vec::new();
    let fail = |message: String, it: usize, inner: &Vec<usize>| LanczosFailure {
        message,
        iterations: it,
        inner_iterations: inner.clone(),
    };

    let s_norm = norm(start);
    if !(s_norm > 0.0) || start.len() != n {
        return Err(fail("start vector is zero or has the wrong size".into(), 0, &inner_iterations));
    }
    let mut q: Vec<Complex64> = start.iter().map(|v| v / s_norm).collect();
    let mut best: Option<EigenOutcome> = None;
    let max_iter = cfg.max_iter.min(n);

    for it in 1..=max_iter {
        let solve = preconditioned_cg(op, precond, &q, None, cfg.inner_tol, cfg.inner_max_iter);
        inner_iterations.push(solve.iterations);
        if solve.breakdown {
            return Err(fail(
                format!("inner CG broke down at Lanczos step {it}: the operator is numerically singular"),
                it,
                &inner_iterations,
            ));
        }
        if !solve.converged {
            return Err(fail(
                format!(
                    "inner CG stagnated at relative residual {:e} after {} iterations (step {it})",
                    solve.final_residual(),
                    solve.iterations
                ),
                it,
                &inner_iterations,
            ));
        }
        let mut w = solve.x;
        let a = dot(&w, &q).re;
        axpy(Complex64::new(-a, 0.0), &q, &mut w);
        if let Some(prev) = basis.last() {
            axpy(Complex64::new(-betas[betas.len() - 1], 0.0), prev, &mut w);
        }
        basis.push(q.clone());
        alphas.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                axpy(-c, v, &mut w);
            }
        }
        let b = norm(&w);

        let k = alphas.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas[i]
            } else if j + 1 == i {
                betas[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (imax, mu) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let s = eig.eigenvectors.column(imax);
        let estimate = b * s[k - 1].abs();

        let invariant = b <= 1e-14 * mu.abs();
        if estimate <= 1e-3 * cfg.tol * mu.abs() || invariant || it == max_iter {
            let mut y = vec![Complex64::default(); n];
            for (j, v) in basis.iter().enumerate() {
                axpy(Complex64::new(s[j], 0.0), v, &mut y);
            }
            let yn = norm(&y);
            y.iter_mut().for_each(|v| *v /= yn);
            let ay = op.apply(&y);
            let lambda = dot(&ay, &y).re;
            let mut r = ay;
            axpy(Complex64::new(-lambda, 0.0), &y, &mut r);
            let residual = norm(&r);
            let converged = residual <= cfg.tol * cfg.norm_estimate;
            let outcome = EigenOutcome {
                eigenvalue: lambda,
                vector: y,
                residual,
                iterations: it,
                inner_iterations: inner_iterations.clone(),
                converged,
            };
            if converged || invariant || it == max_iter {
                return Ok(outcome);
            }
            best = Some(outcome);
        }
        if invariant {
            break;
        }
        betas.push(b);
        q = w.iter().map(|v| v / b).collect();
    }
    best.ok_or_else(|| fail("Lanczos made no progress".into(), max_iter, &inner_iterations))
}
