//! Uniform grid on the unit square with MAC-staggered vector storage.
//!
//! Cell `(i, j)` has its center at `((i + 1/2) h, (j + 1/2) h)`; `i` runs along
//! `x`. Values are stored with `i` fastest. A staggered field keeps its `x`
//! component on the vertical face `x = i h` (left face of cell `i`) and its `y`
//! component on the horizontal face `y = j h` (bottom face of cell `j`), so
//! both components have `n^2` entries. With [`Boundary::Dirichlet`] face `0`
//! is a wall and the far wall face `n` is not stored (both are zero for
//! no-slip data); with [`Boundary::Periodic`] face `0` is an ordinary unknown.

use std::io::{self, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Dirichlet,
    Periodic,
}

impl std::str::FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(Self::Dirichlet),
            "periodic" => Ok(Self::Periodic),
            other => Err(Error::Config(format!("unknown boundary mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Dirichlet => "dirichlet",
            Self::Periodic => "periodic",
        })
    }
}

/// Ghost-cell rule for scalar stencils at a non-periodic boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ghost {
    /// Homogeneous Neumann: reflect the boundary value.
    Neumann,
    /// Linear extrapolation to the given boundary trace.
    Dirichlet(f64),
}

impl Ghost {
    #[inline]
    fn value(self, inside: f64) -> f64 {
        match self {
            Self::Neumann => inside,
            Self::Dirichlet(trace) => 2.0 * trace - inside,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid2D {
    n: usize,
    bc: Boundary,
}

impl Grid2D {
    pub fn new(n: usize, bc: Boundary) -> Result<Self> {
        if n < 16 {
            return Err(Error::Config(format!(
                "grid needs at least 16 cells per side, got {n}"
            )));
        }
        if n % 2 != 0 {
            return Err(Error::Config(format!(
                "cells per side must be even, got {n}"
            )));
        }
        Ok(Self { n, bc })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    #[inline]
    pub fn bc(&self) -> Boundary {
        self.bc
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.h();
        [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]
    }

    /// Location of the `x`-component slot `(i, j)`.
    #[inline]
    pub fn x_face(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.h();
        [i as f64 * h, (j as f64 + 0.5) * h]
    }

    /// Location of the `y`-component slot `(i, j)`.
    #[inline]
    pub fn y_face(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.h();
        [(i as f64 + 0.5) * h, j as f64 * h]
    }

    /// True for face index `0` of a Dirichlet grid, which lies on the wall.
    #[inline]
    pub fn is_wall_face(&self, k: usize) -> bool {
        self.bc == Boundary::Dirichlet && k == 0
    }

    #[inline]
    fn wrap(&self, k: isize) -> usize {
        k.rem_euclid(self.n as isize) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!(
                "scalar field needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at cell centers.
    pub fn from_fn<F: FnMut(f64, f64) -> f64>(grid: Grid2D, mut f: F) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.n() {
            for i in 0..grid.n() {
                let [x, y] = grid.center(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Self, f: F) -> Self {
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `alpha * self + beta * other`.
    pub fn axpby(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        self.zip_map(other, |a, b| alpha * a + beta * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Row-major CSV with header `i,j,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "i,j,value")?;
        let n = self.grid.n();
        for j in 0..n {
            for i in 0..n {
                writeln!(out, "{},{},{}", i, j, self.at(i, j))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Staggered,
    CellCentered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid2D,
    layout: Layout,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid2D, layout: Layout) -> Self {
        Self {
            grid,
            layout,
            x: vec![0.0; grid.len()],
            y: vec![0.0; grid.len()],
        }
    }

    pub fn from_components(grid: Grid2D, layout: Layout, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != grid.len() || y.len() != grid.len() {
            return Err(Error::Input(
                "vector field component length mismatch".into(),
            ));
        }
        Ok(Self { grid, layout, x, y })
    }

    /// Samples `f` at cell centers.
    pub fn cell_centered_from_fn<F: FnMut(f64, f64) -> [f64; 2]>(grid: Grid2D, mut f: F) -> Self {
        let mut out = Self::zeros(grid, Layout::CellCentered);
        for j in 0..grid.n() {
            for i in 0..grid.n() {
                let [x, y] = grid.center(i, j);
                let k = grid.idx(i, j);
                let [a, b] = f(x, y);
                out.x[k] = a;
                out.y[k] = b;
            }
        }
        out
    }

    /// Samples `f` on the staggered faces. Wall faces of a Dirichlet grid are
    /// set to zero regardless of `f`.
    pub fn staggered_from_fn<F: FnMut(f64, f64) -> [f64; 2]>(grid: Grid2D, mut f: F) -> Self {
        let mut out = Self::zeros(grid, Layout::Staggered);
        for j in 0..grid.n() {
            for i in 0..grid.n() {
                let k = grid.idx(i, j);
                if !grid.is_wall_face(i) {
                    let [x, y] = grid.x_face(i, j);
                    out.x[k] = f(x, y)[0];
                }
                if !grid.is_wall_face(j) {
                    let [x, y] = grid.y_face(i, j);
                    out.y[k] = f(x, y)[1];
                }
            }
        }
        out
    }

    #[inline]
    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    #[inline]
    pub fn layout(&self) -> Layout {
        self.layout
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> [f64; 2] {
        let k = self.grid.idx(i, j);
        [self.x[k], self.y[k]]
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.y)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise Euclidean norm (cell-centered fields).
    pub fn norm(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self
                .x
                .iter()
                .zip(&self.y)
                .map(|(a, b)| a.hypot(*b))
                .collect(),
        }
    }

    pub fn axpby(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        Self {
            grid: self.grid,
            layout: self.layout,
            x: self
                .x
                .iter()
                .zip(&other.x)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
            y: self
                .y
                .iter()
                .zip(&other.y)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        }
    }

    /// Staggered `x` component at face `(i, j)` where `i` may be `n`
    /// (far wall, zero for Dirichlet) or wrap around for periodic grids.
    #[inline]
    pub fn x_face_value(&self, i: isize, j: usize) -> f64 {
        let g = self.grid;
        let n = g.n() as isize;
        match g.bc() {
            Boundary::Periodic => self.x[g.idx(g.wrap(i), j)],
            Boundary::Dirichlet => {
                if i <= 0 || i >= n {
                    0.0
                } else {
                    self.x[g.idx(i as usize, j)]
                }
            }
        }
    }

    #[inline]
    pub fn y_face_value(&self, i: usize, j: isize) -> f64 {
        let g = self.grid;
        let n = g.n() as isize;
        match g.bc() {
            Boundary::Periodic => self.y[g.idx(i, g.wrap(j))],
            Boundary::Dirichlet => {
                if j <= 0 || j >= n {
                    0.0
                } else {
                    self.y[g.idx(i, j as usize)]
                }
            }
        }
    }

    /// Averages a staggered field to cell centers; cell-centered input is cloned.
    pub fn to_cell_centered(&self) -> VectorField {
        if self.layout == Layout::CellCentered {
            return self.clone();
        }
        let g = self.grid;
        let mut out = Self::zeros(g, Layout::CellCentered);
        for j in 0..g.n() {
            for i in 0..g.n() {
                let k = g.idx(i, j);
                out.x[k] =
                    0.5 * (self.x_face_value(i as isize, j) + self.x_face_value(i as isize + 1, j));
                out.y[k] =
                    0.5 * (self.y_face_value(i, j as isize) + self.y_face_value(i, j as isize + 1));
            }
        }
        out
    }

    /// CSV with header `i,j,x,y`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "i,j,x,y")?;
        let n = self.grid.n();
        for j in 0..n {
            for i in 0..n {
                let [a, b] = self.at(i, j);
                writeln!(out, "{i},{j},{a},{b}")?;
            }
        }
        Ok(())
    }
}

/// Cell-centered matrix field `m[a][b] = d_b u_a`, stored as four scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub xx: Vec<f64>,
    pub xy: Vec<f64>,
    pub yx: Vec<f64>,
    pub yy: Vec<f64>,
}

impl TensorField {
    #[inline]
    pub fn at(&self, k: usize) -> [[f64; 2]; 2] {
        [[self.xx[k], self.xy[k]], [self.yx[k], self.yy[k]]]
    }
}

/// Centered first differences along one axis; one-sided second-order at
/// Dirichlet walls, wraparound for periodic grids.
fn diff_axis(grid: Grid2D, values: &[f64], axis: usize, out: &mut [f64]) {
    let n = grid.n();
    let inv2h = 0.5 / grid.h();
    let at = |i: usize, j: usize| values[grid.idx(i, j)];
    for j in 0..n {
        for i in 0..n {
            let (m, along) = if axis == 0 { (i, true) } else { (j, false) };
            let get = |k: usize| if along { at(k, j) } else { at(i, k) };
            let d = match grid.bc() {
                Boundary::Periodic => get((m + 1) % n) - get((m + n - 1) % n),
                Boundary::Dirichlet => {
                    if m == 0 {
                        -3.0 * get(0) + 4.0 * get(1) - get(2)
                    } else if m == n - 1 {
                        3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)
                    } else {
                        get(m + 1) - get(m - 1)
                    }
                }
            };
            out[grid.idx(i, j)] = d * inv2h;
        }
    }
}

/// Cell-centered gradient.
pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid;
    let mut out = VectorField::zeros(g, Layout::CellCentered);
    diff_axis(g, &f.values, 0, &mut out.x);
    diff_axis(g, &f.values, 1, &mut out.y);
    out
}

/// Gradient on the staggered faces, the negative adjoint of [`divergence`].
/// Wall faces of a Dirichlet grid carry zero.
pub fn gradient_staggered(f: &ScalarField) -> VectorField {
    let g = f.grid;
    let n = g.n();
    let inv_h = 1.0 / g.h();
    let mut out = VectorField::zeros(g, Layout::Staggered);
    for j in 0..n {
        for i in 0..n {
            let k = g.idx(i, j);
            if !g.is_wall_face(i) {
                let left = f.at((i + n - 1) % n, j);
                out.x[k] = (f.at(i, j) - left) * inv_h;
            }
            if !g.is_wall_face(j) {
                let below = f.at(i, (j + n - 1) % n);
                out.y[k] = (f.at(i, j) - below) * inv_h;
            }
        }
    }
    out
}

/// Staggered divergence at cell centers.
pub fn divergence(u: &VectorField) -> Result<ScalarField> {
    if u.layout != Layout::Staggered {
        return Err(Error::Usage(
            "divergence expects a staggered vector field".into(),
        ));
    }
    let g = u.grid;
    let n = g.n();
    let inv_h = 1.0 / g.h();
    let mut out = ScalarField::zeros(g);
    for j in 0..n {
        for i in 0..n {
            let (ii, jj) = (i as isize, j as isize);
            let dx = u.x_face_value(ii + 1, j) - u.x_face_value(ii, j);
            let dy = u.y_face_value(i, jj + 1) - u.y_face_value(i, jj);
            out.values[g.idx(i, j)] = (dx + dy) * inv_h;
        }
    }
    Ok(out)
}

/// Divergence of a cell-centered field with the centered stencil of [`gradient`].
pub fn divergence_centered(u: &VectorField) -> Result<ScalarField> {
    if u.layout != Layout::CellCentered {
        return Err(Error::Usage(
            "centered divergence expects a cell-centered field".into(),
        ));
    }
    let g = u.grid;
    let mut dx = vec![0.0; g.len()];
    let mut dy = vec![0.0; g.len()];
    diff_axis(g, &u.x, 0, &mut dx);
    diff_axis(g, &u.y, 1, &mut dy);
    let values = dx.iter().zip(&dy).map(|(a, b)| a + b).collect();
    Ok(ScalarField { grid: g, values })
}

/// Cell-centered Jacobian `d_b u_a` of a cell-centered field.
pub fn jacobian(u: &VectorField) -> Result<TensorField> {
    if u.layout != Layout::CellCentered {
        return Err(Error::Usage(
            "jacobian expects a cell-centered field".into(),
        ));
    }
    let g = u.grid;
    let mut t = TensorField {
        xx: vec![0.0; g.len()],
        xy: vec![0.0; g.len()],
        yx: vec![0.0; g.len()],
        yy: vec![0.0; g.len()],
    };
    diff_axis(g, &u.x, 0, &mut t.xx);
    diff_axis(g, &u.x, 1, &mut t.xy);
    diff_axis(g, &u.y, 0, &mut t.yx);
    diff_axis(g, &u.y, 1, &mut t.yy);
    Ok(t)
}

/// Five-point Laplacian. `ghost` selects the wall treatment of a Dirichlet
/// grid and is ignored on periodic grids.
pub fn laplacian(f: &ScalarField, ghost: Ghost) -> ScalarField {
    let g = f.grid;
    let n = g.n();
    let inv_h2 = 1.0 / (g.h() * g.h());
    let periodic = g.bc() == Boundary::Periodic;
    let mut out = ScalarField::zeros(g);
    for j in 0..n {
        for i in 0..n {
            let c = f.at(i, j);
            let nb = |di: isize, dj: isize| -> f64 {
                let ii = i as isize + di;
                let jj = j as isize + dj;
                if periodic {
                    f.at(g.wrap(ii), g.wrap(jj))
                } else if ii < 0 || jj < 0 || ii >= n as isize || jj >= n as isize {
                    ghost.value(c)
                } else {
                    f.at(ii as usize, jj as usize)
                }
            };
            let sum = nb(-1, 0) + nb(1, 0) + nb(0, -1) + nb(0, 1);
            out.values[g.idx(i, j)] = (sum - 4.0 * c) * inv_h2;
        }
    }
    out
}

/// Midpoint rule `h^2 * sum(values)` in a fixed summation order.
pub fn integrate(f: &ScalarField) -> f64 {
    let h = f.grid.h();
    h * h * f.values.iter().sum::<f64>()
}

/// `h^2 * sum(values)` for a raw cell array on `grid`.
pub fn integrate_values(grid: Grid2D, values: &[f64]) -> f64 {
    let h = grid.h();
    h * h * values.iter().sum::<f64>()
}

/// `h^2 * sum_faces (a.x b.x + a.y b.y)` for two staggered fields.
pub fn integrate_staggered_dot(a: &VectorField, b: &VectorField) -> f64 {
    let h = a.grid.h();
    let sx: f64 = a.x.iter().zip(&b.x).map(|(p, q)| p * q).sum();
    let sy: f64 = a.y.iter().zip(&b.y).map(|(p, q)| p * q).sum();
    h * h * (sx + sy)
}
