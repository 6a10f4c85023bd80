//! Jacobi-preconditioned conjugate gradients for the symmetric stencil systems
//! of the time step. Summation order is fixed, so results are reproducible.

use crate::error::{Error, Result};

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final residual norm relative to the right-hand side.
    pub residual: f64,
}

/// Solves `A x = b` for a symmetric positive (semi-)definite `A`, starting
/// from the contents of `x`. With `singular` set, iterates stay in the
/// zero-mean subspace, which is how constant null spaces are handled.
/// Convergence means `|b - A x| <= tol |b|` in the Euclidean norm.
pub fn pcg<A>(
    apply: A,
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    singular: bool,
) -> Result<SolveStats>
where
    A: Fn(&[f64], &mut [f64]),
{
    let len = b.len();
    let mut rhs = b.to_vec();
    if singular {
        remove_mean(&mut rhs);
        remove_mean(x);
    }
    let b_norm = dot(&rhs, &rhs).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut ax = vec![0.0; len];
    apply(x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    if singular {
        remove_mean(&mut r);
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    if singular {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut residual = dot(&r, &r).sqrt() / b_norm;
    let mut iterations = 0;
    while residual > tol {
        if iterations == max_iter {
            return Err(Error::Solver {
                iterations,
                residual,
            });
        }
        apply(&p, &mut ax);
        let pap = dot(&p, &ax);
        if !(pap > 0.0) {
            return Err(Error::Solver {
                iterations,
                residual,
            });
        }
        let alpha = rz / pap;
        for k in 0..len {
            x[k] += alpha * p[k];
            r[k] -= alpha * ax[k];
        }
        if singular {
            remove_mean(&mut r);
        }
        for k in 0..len {
            z[k] = r[k] / diag[k];
        }
        if singular {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..len {
            p[k] = z[k] + beta * p[k];
        }
        residual = dot(&r, &r).sqrt() / b_norm;
        iterations += 1;
    }
    if singular {
        remove_mean(x);
    }
    Ok(SolveStats {
        iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // 1D Dirichlet Laplacian plus shift, tridiagonal
    fn apply_1d(shift: f64) -> impl Fn(&[f64], &mut [f64]) {
        move |x: &[f64], y: &mut [f64]| {
            let n = x.len();
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = (2.0 + shift) * x[i] - l - r;
            }
        }
    }

    #[test]
    fn solves_spd_system() {
        let n = 50;
        let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let a = apply_1d(0.1);
        let mut b = vec![0.0; n];
        a(&exact, &mut b);
        let mut x = vec![0.0; n];
        let stats = pcg(&a, &vec![2.1; n], &b, &mut x, 1e-13, 500, false).unwrap();
        assert!(stats.residual <= 1e-13);
        for (u, v) in x.iter().zip(&exact) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_neumann_system() {
        // 1D Neumann Laplacian has the constants as null space
        let n = 40;
        let a = |x: &[f64], y: &mut [f64]| {
            let n = x.len();
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { x[i] };
                let r = if i + 1 < n { x[i + 1] } else { x[i] };
                y[i] = 2.0 * x[i] - l - r;
            }
        };
        let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.2).cos()).collect();
        let mut b = vec![0.0; n];
        a(&exact, &mut b);
        // an incompatible constant in the data is ignored
        let b: Vec<f64> = b.iter().map(|v| v + 0.5).collect();
        let mut x = vec![1.0; n];
        pcg(a, &vec![2.0; n], &b, &mut x, 1e-12, 500, true).unwrap();
        let mean = exact.iter().sum::<f64>() / n as f64;
        for (u, v) in x.iter().zip(&exact) {
            assert!((u - (v - mean)).abs() < 1e-9);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let n = 200;
        let a = apply_1d(0.0);
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let err = pcg(a, &vec![2.0; n], &b, &mut x, 1e-14, 3, false).unwrap_err();
        assert!(matches!(err, Error::Solver { iterations: 3, .. }));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = apply_1d(1.0);
        let mut x = vec![3.0; 10];
        let s = pcg(a, &vec![3.0; 10], &vec![0.0; 10], &mut x, 1e-12, 10, false).unwrap();
        assert_eq!(s.iterations, 0);
        assert!(x.iter().all(|v| *v == 0.0));
    }
}
