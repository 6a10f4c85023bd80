//! Pressure Poisson problem `L p = f` for the cell-centered five-point
//! Laplacian, with homogeneous Neumann walls or periodic wrap. The constant
//! null space is fixed by a zero-mean gauge.

use std::f64::consts::PI;
use std::sync::Arc;

use rustdct::{Dct2, Dct3, DctPlanner};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::linear::{pcg, SolveStats};
use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureMethod {
    /// Diagonalization by cosine (walls) or Fourier (periodic) transforms.
    Spectral,
    /// Jacobi-preconditioned conjugate gradients.
    ConjugateGradient,
}

impl std::str::FromStr for PressureMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Self::Spectral),
            "cg" => Ok(Self::ConjugateGradient),
            other => Err(Error::Config(format!("unknown pressure solver '{other}'"))),
        }
    }
}

/// `y = L x` with Neumann ghosts on a Dirichlet grid, wraparound otherwise.
pub fn apply_laplacian(grid: Grid2D, x: &[f64], y: &mut [f64]) {
    let n = grid.n();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let periodic = grid.bc() == Boundary::Periodic;
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            let c = x[k];
            let (l, r, d, u);
            if periodic {
                l = x[j * n + (i + n - 1) % n];
                r = x[j * n + (i + 1) % n];
                d = x[((j + n - 1) % n) * n + i];
                u = x[((j + 1) % n) * n + i];
            } else {
                l = if i > 0 { x[k - 1] } else { c };
                r = if i + 1 < n { x[k + 1] } else { c };
                d = if j > 0 { x[k - n] } else { c };
                u = if j + 1 < n { x[k + n] } else { c };
            }
            y[k] = (l + r + d + u - 4.0 * c) * inv_h2;
        }
    }
}

enum Plan {
    Cosine {
        forward: Arc<dyn Dct2<f64>>,
        inverse: Arc<dyn Dct3<f64>>,
    },
    Fourier {
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
    },
    Iterative,
}

pub struct PoissonSolver {
    grid: Grid2D,
    method: PressureMethod,
    tol: f64,
    max_iter: usize,
    plan: Plan,
    eigenvalues: Vec<f64>,
}

impl std::fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonSolver")
            .field("grid", &self.grid)
            .field("method", &self.method)
            .field("tol", &self.tol)
            .finish()
    }
}

impl PoissonSolver {
    /// `tol` bounds the residual `|f - L p| / |f|` accepted from either method.
    pub fn new(grid: Grid2D, method: PressureMethod, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::Config(format!(
                "poisson_tol must be positive, got {tol}"
            )));
        }
        let n = grid.n();
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        let (plan, eigenvalues) = match method {
            PressureMethod::ConjugateGradient => (Plan::Iterative, Vec::new()),
            PressureMethod::Spectral => {
                let (plan, angle) = match grid.bc() {
                    Boundary::Dirichlet => {
                        let mut planner = DctPlanner::new();
                        (
                            Plan::Cosine {
                                forward: planner.plan_dct2(n),
                                inverse: planner.plan_dct3(n),
                            },
                            PI / (2.0 * n as f64),
                        )
                    }
                    Boundary::Periodic => {
                        let mut planner = FftPlanner::new();
                        (
                            Plan::Fourier {
                                forward: planner.plan_fft_forward(n),
                                inverse: planner.plan_fft_inverse(n),
                            },
                            PI / n as f64,
                        )
                    }
                };
                let eig = (0..n)
                    .map(|k| {
                        let s = (angle * k as f64).sin();
                        -4.0 * inv_h2 * s * s
                    })
                    .collect();
                (plan, eig)
            }
        };
        Ok(Self {
            grid,
            method,
            tol,
            max_iter: 20 * n * n,
            plan,
            eigenvalues,
        })
    }

    pub fn method(&self) -> PressureMethod {
        self.method
    }

    /// Solves `L p = f - mean(f)`; `p` holds the initial guess on entry
    /// (used by the iterative method) and the zero-mean solution on exit.
    pub fn solve(&mut self, f: &[f64], p: &mut [f64]) -> Result<SolveStats> {
        let grid = self.grid;
        let mut rhs = f.to_vec();
        let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
        rhs.iter_mut().for_each(|v| *v -= mean);
        match &self.plan {
            Plan::Iterative => {
                let diag = vec![-4.0 / (grid.h() * grid.h()); rhs.len()];
                // solve -L p = -f so the operator is positive semi-definite
                let neg: Vec<f64> = rhs.iter().map(|v| -v).collect();
                let pos_diag: Vec<f64> = diag.iter().map(|d| -d).collect();
                let apply = |x: &[f64], y: &mut [f64]| {
                    apply_laplacian(grid, x, y);
                    y.iter_mut().for_each(|v| *v = -*v);
                };
                pcg(apply, &pos_diag, &neg, p, self.tol, self.max_iter, true)
            }
            Plan::Cosine { forward, inverse } => {
                let (forward, inverse) = (forward.clone(), inverse.clone());
                spectral_2d(
                    grid.n(),
                    &mut rhs,
                    |row| forward.process_dct2(row),
                    |row| inverse.process_dct3(row),
                    &self.eigenvalues,
                    // DCT-III of DCT-II is n/2 times the identity per axis
                    4.0 / (grid.n() * grid.n()) as f64,
                );
                p.copy_from_slice(&rhs);
                self.check_residual(f, p)
            }
            Plan::Fourier { forward, inverse } => {
                let n = grid.n();
                let mut data: Vec<Complex<f64>> =
                    rhs.iter().map(|&v| Complex::new(v, 0.0)).collect();
                fft_2d(n, &mut data, forward.as_ref());
                for ky in 0..n {
                    for kx in 0..n {
                        let lam = self.eigenvalues[kx] + self.eigenvalues[ky];
                        let k = ky * n + kx;
                        data[k] = if kx == 0 && ky == 0 {
                            Complex::new(0.0, 0.0)
                        } else {
                            data[k] / lam
                        };
                    }
                }
                fft_2d(n, &mut data, inverse.as_ref());
                let scale = 1.0 / (n * n) as f64;
                for (out, c) in p.iter_mut().zip(&data) {
                    *out = c.re * scale;
                }
                self.check_residual(f, p)
            }
        }
    }

    fn check_residual(&self, f: &[f64], p: &mut [f64]) -> Result<SolveStats> {
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        p.iter_mut().for_each(|v| *v -= mean);
        let fm = f.iter().sum::<f64>() / f.len() as f64;
        let mut lp = vec![0.0; p.len()];
        apply_laplacian(self.grid, p, &mut lp);
        let mut r2 = 0.0;
        let mut f2 = 0.0;
        for (a, b) in lp.iter().zip(f) {
            let fb = b - fm;
            r2 += (a - fb) * (a - fb);
            f2 += fb * fb;
        }
        let residual = if f2 == 0.0 {
            r2.sqrt()
        } else {
            (r2 / f2).sqrt()
        };
        if residual > self.tol {
            return Err(Error::Solver {
                iterations: 1,
                residual,
            });
        }
        Ok(SolveStats {
            iterations: 1,
            residual,
        })
    }
}

/// Separable transform solve on a real `n x n` array stored row-major.
fn spectral_2d<F, I>(n: usize, data: &mut [f64], forward: F, inverse: I, eig: &[f64], scale: f64)
where
    F: Fn(&mut [f64]),
    I: Fn(&mut [f64]),
{
    let mut column = vec![0.0; n];
    let transform_columns = |data: &mut [f64], column: &mut [f64], op: &dyn Fn(&mut [f64])| {
        for i in 0..n {
            for j in 0..n {
                column[j] = data[j * n + i];
            }
            op(column);
            for j in 0..n {
                data[j * n + i] = column[j];
            }
        }
    };
    for row in data.chunks_mut(n) {
        forward(row);
    }
    transform_columns(data, &mut column, &forward);
    for ky in 0..n {
        for kx in 0..n {
            let k = ky * n + kx;
            let lam = eig[kx] + eig[ky];
            data[k] = if k == 0 { 0.0 } else { data[k] / lam };
        }
    }
    for row in data.chunks_mut(n) {
        inverse(row);
    }
    transform_columns(data, &mut column, &inverse);
    data.iter_mut().for_each(|v| *v *= scale);
}

fn fft_2d(n: usize, data: &mut [Complex<f64>], fft: &dyn Fft<f64>) {
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut column = vec![Complex::new(0.0, 0.0); n];
    for i in 0..n {
        for j in 0..n {
            column[j] = data[j * n + i];
        }
        fft.process(&mut column);
        for j in 0..n {
            data[j * n + i] = column[j];
        }
    }
}
