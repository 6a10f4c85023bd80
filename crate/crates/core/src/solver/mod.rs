//! Time stepping for the coupled Navier–Stokes/Allen–Cahn system
//!
//! ```text
//! d_t v + (v·∇)v = Δv - ∇p - ∇·(eps ∇phi ⊗ ∇phi),   ∇·v = 0
//! d_t phi + v·∇phi = Δphi - W'(phi) / eps^2
//! ```
//!
//! with `(phi, v) = (-1, 0)` on the walls. One step is a projection method
//! on the MAC grid: explicit capillary stress and skew-symmetric advection,
//! implicit viscosity, pressure projection, then an implicit-diffusion
//! Allen–Cahn update advected by the projected velocity.

pub mod linear;
pub mod poisson;

use crate::dwell::DoubleWellSpec;
use crate::error::{Error, Result};
use crate::grid::{self, Boundary, Grid2D, Layout, ScalarField, VectorField};
use crate::reference::{CircleReference, VelocityMode};

pub use linear::SolveStats;
pub use poisson::{PoissonSolver, PressureMethod};

/// Treatment of the potential term in the phase-field update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// `W'(phi)` fully explicit.
    SemiImplicit,
    /// Convex part of `W` implicit through one Newton sweep, concave part explicit.
    ConvexSplit,
}

impl Scheme {
    /// Admissible per-step energy growth, relative to `1 + E`.
    pub fn energy_tolerance(self) -> f64 {
        match self {
            Self::SemiImplicit => 1e-4,
            Self::ConvexSplit => 1e-6,
        }
    }
}

/// Discretization of the capillary force.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapillaryForm {
    /// `-∇·(eps ∇phi ⊗ ∇phi)` differenced at faces.
    Stress,
    /// `H ∇phi` with `H = -eps Δphi + W'(phi)/eps`, face-averaged. Differs
    /// from the stress form by a gradient, which the pressure absorbs.
    Potential,
}

impl std::str::FromStr for CapillaryForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stress" => Ok(Self::Stress),
            "potential" => Ok(Self::Potential),
            other => Err(Error::Config(format!("unknown capillary form '{other}'"))),
        }
    }
}

impl std::fmt::Display for CapillaryForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Stress => "stress",
            Self::Potential => "potential",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semi-implicit" => Ok(Self::SemiImplicit),
            "convex-split" => Ok(Self::ConvexSplit),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SemiImplicit => "semi-implicit",
            Self::ConvexSplit => "convex-split",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub poisson_tol: f64,
    pub pressure: PressureMethod,
    pub cfl_c1: f64,
    pub cfl_c2: f64,
    /// Switches for method tests; both are on for the physical model.
    pub viscosity: bool,
    pub capillarity: bool,
    pub capillary_form: CapillaryForm,
    /// Largest accepted `|∇·v|` after projection.
    pub divergence_tol: f64,
}

impl SolverConfig {
    /// Defaults with the largest admissible step.
    pub fn new(grid: Grid2D, eps: f64) -> Self {
        let (cfl_c1, cfl_c2) = (0.2, 0.4);
        Self {
            dt: max_stable_dt(grid.h(), eps, cfl_c1, cfl_c2),
            scheme: Scheme::ConvexSplit,
            poisson_tol: 1e-10,
            pressure: PressureMethod::Spectral,
            cfl_c1,
            cfl_c2,
            viscosity: true,
            capillarity: true,
            capillary_form: CapillaryForm::Potential,
            divergence_tol: 1e-8,
        }
    }

    /// Shrinks `dt` so that `t_end` is reached in a whole number of steps.
    /// Returns that number of steps.
    pub fn fit_horizon(&mut self, grid: Grid2D, eps: f64, t_end: f64) -> usize {
        let bound = max_stable_dt(grid.h(), eps, self.cfl_c1, self.cfl_c2);
        if t_end <= 0.0 {
            self.dt = bound;
            return 0;
        }
        let steps = (t_end / bound.min(self.dt)).ceil().max(1.0) as usize;
        self.dt = t_end / steps as f64;
        steps
    }

    pub fn validate(&self, grid: Grid2D, eps: f64) -> Result<()> {
        let bound = max_stable_dt(grid.h(), eps, self.cfl_c1, self.cfl_c2);
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if self.dt > bound * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "time step {} exceeds the stability bound {bound}",
                self.dt
            )));
        }
        if !(self.poisson_tol > 0.0) {
            return Err(Error::Config("poisson_tol must be positive".into()));
        }
        Ok(())
    }
}

/// `min(c1 h^2 / 4, c2 eps^2)`.
pub fn max_stable_dt(h: f64, eps: f64, c1: f64, c2: f64) -> f64 {
    (c1 * h * h / 4.0).min(c2 * eps * eps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub phi: ScalarField,
    /// Staggered velocity.
    pub v: VectorField,
    pub pressure: ScalarField,
    pub t: f64,
    pub eps: f64,
}

impl SimState {
    /// `phi = -1`, `v = 0`.
    pub fn rest(grid: Grid2D, eps: f64) -> Self {
        Self {
            phi: ScalarField::constant(grid, -1.0),
            v: VectorField::zeros(grid, Layout::Staggered),
            pressure: ScalarField::zeros(grid),
            t: 0.0,
            eps,
        }
    }

    pub fn grid(&self) -> Grid2D {
        self.phi.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.v.is_finite() && self.pressure.is_finite()
    }
}

/// Optimal profile of the initial signed distance, `phi0 = tanh(s / eps)`,
/// with the reference velocity. A prescribed velocity is sampled through its
/// stream function at grid nodes, so it is discretely solenoidal.
pub fn initialize_well_prepared(
    reference: &CircleReference,
    eps: f64,
    grid: Grid2D,
    well: &DoubleWellSpec,
) -> Result<SimState> {
    well.optimal_profile(0.0, eps)?;
    let s = reference.signed_distance_field(grid, 0.0)?;
    let phi = s.map(|sv| well.profile(sv, eps));
    let mut v = VectorField::zeros(grid, Layout::Staggered);
    if let VelocityMode::Prescribed { .. } = reference.v_mode {
        let h = grid.h();
        let q = |i: usize, j: usize| reference.stream_function([i as f64 * h, j as f64 * h]);
        for j in 0..grid.n() {
            for i in 0..grid.n() {
                let k = grid.idx(i, j);
                if !grid.is_wall_face(i) {
                    v.x[k] = (q(i, j + 1) - q(i, j)) / h;
                }
                if !grid.is_wall_face(j) {
                    v.y[k] = -(q(i + 1, j) - q(i, j)) / h;
                }
            }
        }
    }
    Ok(SimState {
        phi,
        v,
        pressure: ScalarField::zeros(grid),
        t: 0.0,
        eps,
    })
}

/// Data from one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub divergence_max: f64,
    pub pressure: SolveStats,
    pub phi_max: f64,
}

/// Stencil helpers for the staggered velocity with no-slip walls.
struct Faces<'a> {
    grid: Grid2D,
    v: &'a VectorField,
}

impl Faces<'_> {
    /// `x` component at face `i` of row `j`; rows outside the domain mirror
    /// with a sign flip (no-slip ghost), faces on the walls are zero.
    #[inline]
    fn u(&self, i: isize, j: isize) -> f64 {
        let n = self.grid.n() as isize;
        match self.grid.bc() {
            Boundary::Periodic => {
                self.v.x[self
                    .grid
                    .idx(i.rem_euclid(n) as usize, j.rem_euclid(n) as usize)]
            }
            Boundary::Dirichlet => {
                if i <= 0 || i >= n {
                    0.0
                } else if j < 0 {
                    -self.v.x[self.grid.idx(i as usize, 0)]
                } else if j >= n {
                    -self.v.x[self.grid.idx(i as usize, (n - 1) as usize)]
                } else {
                    self.v.x[self.grid.idx(i as usize, j as usize)]
                }
            }
        }
    }

    #[inline]
    fn w(&self, i: isize, j: isize) -> f64 {
        let n = self.grid.n() as isize;
        match self.grid.bc() {
            Boundary::Periodic => {
                self.v.y[self
                    .grid
                    .idx(i.rem_euclid(n) as usize, j.rem_euclid(n) as usize)]
            }
            Boundary::Dirichlet => {
                if j <= 0 || j >= n {
                    0.0
                } else if i < 0 {
                    -self.v.y[self.grid.idx(0, j as usize)]
                } else if i >= n {
                    -self.v.y[self.grid.idx((n - 1) as usize, j as usize)]
                } else {
                    self.v.y[self.grid.idx(i as usize, j as usize)]
                }
            }
        }
    }
}

/// Skew-symmetric (average of divergence and advective forms) discretization
/// of `(v·∇)v` on the staggered faces. Satisfies `sum v·A(v) = 0` exactly.
pub fn advection(v: &VectorField) -> Result<VectorField> {
    if v.layout() != Layout::Staggered {
        return Err(Error::Usage(
            "advection expects a staggered velocity".into(),
        ));
    }
    let g = v.grid();
    let n = g.n();
    let half_inv_h = 0.5 / g.h();
    let f = Faces { grid: g, v };
    let mut out = VectorField::zeros(g, Layout::Staggered);
    for j in 0..n {
        for i in 0..n {
            let k = g.idx(i, j);
            let (ii, jj) = (i as isize, j as isize);
            if !g.is_wall_face(i) {
                let ue = 0.5 * (f.u(ii, jj) + f.u(ii + 1, jj));
                let uw = 0.5 * (f.u(ii - 1, jj) + f.u(ii, jj));
                let vn = 0.5 * (f.w(ii - 1, jj + 1) + f.w(ii, jj + 1));
                let vs = 0.5 * (f.w(ii - 1, jj) + f.w(ii, jj));
                out.x[k] = half_inv_h
                    * (ue * f.u(ii + 1, jj) - uw * f.u(ii - 1, jj) + vn * f.u(ii, jj + 1)
                        - vs * f.u(ii, jj - 1));
            }
            if !g.is_wall_face(j) {
                let vn = 0.5 * (f.w(ii, jj) + f.w(ii, jj + 1));
                let vs = 0.5 * (f.w(ii, jj - 1) + f.w(ii, jj));
                let ue = 0.5 * (f.u(ii + 1, jj - 1) + f.u(ii + 1, jj));
                let uw = 0.5 * (f.u(ii, jj - 1) + f.u(ii, jj));
                out.y[k] = half_inv_h
                    * (vn * f.w(ii, jj + 1) - vs * f.w(ii, jj - 1) + ue * f.w(ii + 1, jj)
                        - uw * f.w(ii - 1, jj));
            }
        }
    }
    Ok(out)
}

/// `-∇·(eps ∇phi ⊗ ∇phi)` on the staggered faces, from the cell-centered
/// gradient. Wall faces carry zero.
pub fn capillary_force(phi: &ScalarField, eps: f64) -> VectorField {
    let g = phi.grid();
    let n = g.n();
    let inv_h = 1.0 / g.h();
    let grad = grid::gradient(phi);
    let txx = ScalarField::from_values(g, grad.x.iter().map(|a| eps * a * a).collect()).unwrap();
    let tyy = ScalarField::from_values(g, grad.y.iter().map(|b| eps * b * b).collect()).unwrap();
    let txy = ScalarField::from_values(
        g,
        grad.x
            .iter()
            .zip(&grad.y)
            .map(|(a, b)| eps * a * b)
            .collect(),
    )
    .unwrap();
    let dtxy = grid::gradient(&txy);
    let mut out = VectorField::zeros(g, Layout::Staggered);
    for j in 0..n {
        for i in 0..n {
            let k = g.idx(i, j);
            if !g.is_wall_face(i) {
                let kl = g.idx((i + n - 1) % n, j);
                out.x[k] = -((txx.values()[k] - txx.values()[kl]) * inv_h
                    + 0.5 * (dtxy.y[k] + dtxy.y[kl]));
            }
            if !g.is_wall_face(j) {
                let kb = g.idx(i, (j + n - 1) % n);
                out.y[k] = -((tyy.values()[k] - tyy.values()[kb]) * inv_h
                    + 0.5 * (dtxy.x[k] + dtxy.x[kb]));
            }
        }
    }
    out
}

/// `H ∇phi` on the staggered faces, `H` averaged from the two adjacent
/// cells. Summed against a face velocity it reproduces exactly the cell sum
/// of `H v·∇phi` from [`phase_advection`], so capillary work and interface
/// advection exchange energy without a discrete residual.
pub fn capillary_force_potential(
    phi: &ScalarField,
    eps: f64,
    well: &DoubleWellSpec,
) -> VectorField {
    let g = phi.grid();
    let n = g.n();
    let inv_h = 1.0 / g.h();
    let ghost = match g.bc() {
        Boundary::Dirichlet => grid::Ghost::Dirichlet(-1.0),
        Boundary::Periodic => grid::Ghost::Neumann,
    };
    let lap = grid::laplacian(phi, ghost);
    let curv: Vec<f64> = lap
        .values()
        .iter()
        .zip(phi.values())
        .map(|(l, &p)| -eps * l + well.dw(p) / eps)
        .collect();
    let p = phi.values();
    let mut out = VectorField::zeros(g, Layout::Staggered);
    for j in 0..n {
        for i in 0..n {
            let k = g.idx(i, j);
            if !g.is_wall_face(i) {
                let kl = g.idx((i + n - 1) % n, j);
                out.x[k] = 0.5 * (curv[k] + curv[kl]) * (p[k] - p[kl]) * inv_h;
            }
            if !g.is_wall_face(j) {
                let kb = g.idx(i, (j + n - 1) % n);
                out.y[k] = 0.5 * (curv[k] + curv[kb]) * (p[k] - p[kb]) * inv_h;
            }
        }
    }
    out
}

/// Centered `v·∇phi` at cell centers from the staggered velocity.
pub fn phase_advection(phi: &ScalarField, v: &VectorField) -> ScalarField {
    let g = phi.grid();
    let n = g.n();
    let half_inv_h = 0.5 / g.h();
    let mut out = ScalarField::zeros(g);
    let p = |i: isize, j: isize| -> f64 {
        let ni = n as isize;
        match g.bc() {
            Boundary::Periodic => phi.at(i.rem_euclid(ni) as usize, j.rem_euclid(ni) as usize),
            // wall faces carry zero velocity, so ghost values never contribute
            Boundary::Dirichlet => phi.at(i.clamp(0, ni - 1) as usize, j.clamp(0, ni - 1) as usize),
        }
    };
    for j in 0..n {
        for i in 0..n {
            let (ii, jj) = (i as isize, j as isize);
            let c = phi.at(i, j);
            let ul = v.x_face_value(ii, j);
            let ur = v.x_face_value(ii + 1, j);
            let vb = v.y_face_value(i, jj);
            let vt = v.y_face_value(i, jj + 1);
            let adv = ur * (p(ii + 1, jj) - c)
                + ul * (c - p(ii - 1, jj))
                + vt * (p(ii, jj + 1) - c)
                + vb * (c - p(ii, jj - 1));
            out.values_mut()[g.idx(i, j)] = half_inv_h * adv;
        }
    }
    out
}

/// `y = diag .* x - L0 x` on cells, with `L0` the Laplacian for homogeneous
/// Dirichlet ghosts (or wraparound).
fn apply_cell_operator(grid: Grid2D, diag: &[f64], x: &[f64], y: &mut [f64]) {
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
                l = if i > 0 { x[k - 1] } else { -c };
                r = if i + 1 < n { x[k + 1] } else { -c };
                d = if j > 0 { x[k - n] } else { -c };
                u = if j + 1 < n { x[k + n] } else { -c };
            }
            y[k] = diag[k] * c - (l + r + d + u - 4.0 * c) * inv_h2;
        }
    }
}

/// Number of wall sides of cell `(i, j)` on a Dirichlet grid.
#[inline]
fn wall_sides(n: usize, i: usize, j: usize) -> usize {
    (i == 0) as usize + (i + 1 == n) as usize + (j == 0) as usize + (j + 1 == n) as usize
}

/// `y = alpha x - L x` for one staggered component. `axis = 0` is the `x`
/// component. Wall slots are identity rows.
fn apply_face_operator(grid: Grid2D, axis: usize, alpha: f64, x: &[f64], y: &mut [f64]) {
    let n = grid.n();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let periodic = grid.bc() == Boundary::Periodic;
    // (normal, tangential) index -> storage
    let at = |a: usize, b: usize| if axis == 0 { b * n + a } else { a * n + b };
    for b in 0..n {
        for a in 0..n {
            let k = at(a, b);
            let c = x[k];
            if periodic {
                let sum = x[at((a + n - 1) % n, b)]
                    + x[at((a + 1) % n, b)]
                    + x[at(a, (b + n - 1) % n)]
                    + x[at(a, (b + 1) % n)];
                y[k] = alpha * c - (sum - 4.0 * c) * inv_h2;
                continue;
            }
            if a == 0 {
                y[k] = alpha * c;
                continue;
            }
            let lo = if a > 1 { x[at(a - 1, b)] } else { 0.0 };
            let hi = if a + 1 < n { x[at(a + 1, b)] } else { 0.0 };
            let down = if b > 0 { x[at(a, b - 1)] } else { -c };
            let up = if b + 1 < n { x[at(a, b + 1)] } else { -c };
            y[k] = alpha * c - (lo + hi + down + up - 4.0 * c) * inv_h2;
        }
    }
}

fn face_diagonal(grid: Grid2D, axis: usize, alpha: f64) -> Vec<f64> {
    let n = grid.n();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut d = vec![alpha + 4.0 * inv_h2; grid.len()];
    if grid.bc() == Boundary::Dirichlet {
        for j in 0..n {
            for i in 0..n {
                let (a, b) = if axis == 0 { (i, j) } else { (j, i) };
                let k = j * n + i;
                if a == 0 {
                    d[k] = alpha;
                } else if b == 0 || b + 1 == n {
                    d[k] += inv_h2;
                }
            }
        }
    }
    d
}

const INNER_TOL: f64 = 1e-12;

/// Reusable stepping context (transform plans and operator diagonals).
#[derive(Debug)]
pub struct Solver {
    cfg: SolverConfig,
    grid: Grid2D,
    eps: f64,
    well: DoubleWellSpec,
    poisson: PoissonSolver,
    face_diag: [Vec<f64>; 2],
}

impl Solver {
    pub fn new(cfg: SolverConfig, grid: Grid2D, eps: f64, well: DoubleWellSpec) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Config(format!("eps must be positive, got {eps}")));
        }
        cfg.validate(grid, eps)?;
        let alpha = 1.0 / cfg.dt;
        Ok(Self {
            poisson: PoissonSolver::new(grid, cfg.pressure, cfg.poisson_tol)?,
            face_diag: [face_diagonal(grid, 0, alpha), face_diagonal(grid, 1, alpha)],
            cfg,
            grid,
            eps,
            well,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn step(&mut self, state: &mut SimState) -> Result<StepInfo> {
        if state.grid() != self.grid || state.eps != self.eps {
            return Err(Error::Usage(
                "state does not match the solver grid or eps".into(),
            ));
        }
        let g = self.grid;
        let dt = self.cfg.dt;
        let alpha = 1.0 / dt;

        // momentum predictor
        let adv = advection(&state.v)?;
        let force = if self.cfg.capillarity {
            match self.cfg.capillary_form {
                CapillaryForm::Stress => capillary_force(&state.phi, self.eps),
                CapillaryForm::Potential => {
                    capillary_force_potential(&state.phi, self.eps, &self.well)
                }
            }
        } else {
            VectorField::zeros(g, Layout::Staggered)
        };
        let mut predicted = state.v.clone();
        for axis in 0..2 {
            let (old, a, f, out) = match axis {
                0 => (&state.v.x, &adv.x, &force.x, &mut predicted.x),
                _ => (&state.v.y, &adv.y, &force.y, &mut predicted.y),
            };
            let rhs: Vec<f64> = (0..g.len())
                .map(|k| {
                    let slot = if axis == 0 { k % g.n() } else { k / g.n() };
                    if g.is_wall_face(slot) {
                        0.0
                    } else {
                        old[k] * alpha - a[k] + f[k]
                    }
                })
                .collect();
            if self.cfg.viscosity {
                let apply = |x: &[f64], y: &mut [f64]| apply_face_operator(g, axis, alpha, x, y);
                linear::pcg(
                    apply,
                    &self.face_diag[axis],
                    &rhs,
                    out,
                    INNER_TOL,
                    10 * g.len(),
                    false,
                )?;
            } else {
                for (o, r) in out.iter_mut().zip(&rhs) {
                    *o = r * dt;
                }
            }
        }

        // projection
        let div = grid::divergence(&predicted)?;
        let rhs: Vec<f64> = div.values().iter().map(|d| d * alpha).collect();
        let mut pressure = state.pressure.values().to_vec();
        let stats = self.poisson.solve(&rhs, &mut pressure)?;
        state.pressure = ScalarField::from_values(g, pressure)?;
        let grad_p = grid::gradient_staggered(&state.pressure);
        state.v = predicted.axpby(1.0, &grad_p, -dt);
        let divergence_max = grid::divergence(&state.v)?.max_abs();
        if !(divergence_max <= self.cfg.divergence_tol) {
            if !divergence_max.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite velocity at t = {}",
                    state.t
                )));
            }
            return Err(Error::Solver {
                iterations: stats.iterations,
                residual: divergence_max,
            });
        }

        // phase field
        self.phase_step(state)?;
        state.t += dt;
        if !state.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite state at t = {}",
                state.t
            )));
        }
        Ok(StepInfo {
            divergence_max,
            pressure: stats,
            phi_max: state.phi.max_abs(),
        })
    }

    fn phase_step(&mut self, state: &mut SimState) -> Result<()> {
        let g = self.grid;
        let n = g.n();
        let dt = self.cfg.dt;
        let inv_e2 = 1.0 / (self.eps * self.eps);
        let inv_h2 = 1.0 / (g.h() * g.h());
        let adv = phase_advection(&state.phi, &state.v);
        let trace = -1.0;
        let mut diag = vec![1.0 / dt; g.len()];
        let mut rhs = vec![0.0; g.len()];
        for j in 0..n {
            for i in 0..n {
                let k = g.idx(i, j);
                let p = state.phi.values()[k];
                let mut r = p / dt - adv.values()[k];
                match self.cfg.scheme {
                    Scheme::SemiImplicit => r -= self.well.dw(p) * inv_e2,
                    Scheme::ConvexSplit => {
                        let (dc, ddc, de) = self.well.split_derivatives(p);
                        diag[k] += ddc * inv_e2;
                        r += (ddc * p - dc - de) * inv_e2;
                    }
                }
                if g.bc() == Boundary::Dirichlet {
                    // ghost = 2 trace - phi moves the trace to the right side
                    r += 2.0 * trace * wall_sides(n, i, j) as f64 * inv_h2;
                }
                rhs[k] = r;
            }
        }
        let jacobi: Vec<f64> = (0..g.len())
            .map(|k| {
                let extra = if g.bc() == Boundary::Dirichlet {
                    wall_sides(n, k % n, k / n) as f64
                } else {
                    0.0
                };
                diag[k] + (4.0 + extra) * inv_h2
            })
            .collect();
        let mut phi = state.phi.values().to_vec();
        let apply = |x: &[f64], y: &mut [f64]| apply_cell_operator(g, &diag, x, y);
        linear::pcg(
            apply,
            &jacobi,
            &rhs,
            &mut phi,
            INNER_TOL,
            10 * g.len(),
            false,
        )?;
        state.phi = ScalarField::from_values(g, phi)?;
        Ok(())
    }
}

/// Advances a copy of `state` by one step.
pub fn step(state: &SimState, cfg: &SolverConfig, well: &DoubleWellSpec) -> Result<SimState> {
    let mut solver = Solver::new(*cfg, state.grid(), state.eps, *well)?;
    let mut next = state.clone();
    solver.step(&mut next)?;
    Ok(next)
}

/// Kinetic, gradient and potential parts of the total energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub gradient: f64,
    pub potential: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.gradient + self.potential
    }
}

/// The discrete energy whose variation gives the five-point Laplacian:
/// squared differences across interior faces, plus `2 (phi_b - trace)^2` on
/// wall faces of a Dirichlet grid.
pub fn energy_parts(state: &SimState, well: &DoubleWellSpec) -> EnergyParts {
    let g = state.grid();
    let n = g.n();
    let h2 = g.h() * g.h();
    let eps = state.eps;
    let phi = &state.phi;
    let kinetic = 0.5 * grid::integrate_staggered_dot(&state.v, &state.v);
    let mut grad_sum = 0.0;
    let trace = -1.0;
    for j in 0..n {
        for i in 0..n {
            let c = phi.at(i, j);
            match g.bc() {
                Boundary::Periodic => {
                    let dx = phi.at((i + 1) % n, j) - c;
                    let dy = phi.at(i, (j + 1) % n) - c;
                    grad_sum += dx * dx + dy * dy;
                }
                Boundary::Dirichlet => {
                    if i + 1 < n {
                        let d = phi.at(i + 1, j) - c;
                        grad_sum += d * d;
                    }
                    if j + 1 < n {
                        let d = phi.at(i, j + 1) - c;
                        grad_sum += d * d;
                    }
                    let b = c - trace;
                    grad_sum += 2.0 * b * b * wall_sides(n, i, j) as f64;
                }
            }
        }
    }
    let potential: f64 = phi.values().iter().map(|&p| well.w(p)).sum::<f64>() * h2 / eps;
    EnergyParts {
        kinetic,
        gradient: 0.5 * eps * grad_sum,
        potential,
    }
}

/// `∫ |v|^2 / 2 + eps/2 |∇phi|^2 + W(phi) / eps`.
pub fn total_energy(state: &SimState, well: &DoubleWellSpec) -> f64 {
    energy_parts(state, well).total()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationCheck {
    pub d_e: f64,
    pub ok: bool,
}

pub fn dissipation_check(
    prev: &SimState,
    next: &SimState,
    well: &DoubleWellSpec,
    scheme: Scheme,
) -> DissipationCheck {
    let e0 = total_energy(prev, well);
    let d_e = total_energy(next, well) - e0;
    DissipationCheck {
        d_e,
        ok: d_e <= scheme.energy_tolerance() * (1.0 + e0),
    }
}

/// Rates entering the sharp dissipation inequality over one step:
/// `∫ |∇v|^2` (face differences of the new velocity) and
/// `eps ∫ |(phi_new - phi_old)/dt + v·∇phi_old|^2`.
pub fn dissipation_rates(prev: &SimState, next: &SimState, dt: f64) -> (f64, f64) {
    let g = next.grid();
    let h2 = g.h() * g.h();
    let cell = next.v.to_cell_centered();
    let jac = grid::jacobian(&cell).expect("cell-centered");
    let viscous: f64 = (0..g.len())
        .map(|k| jac.xx[k].powi(2) + jac.xy[k].powi(2) + jac.yx[k].powi(2) + jac.yy[k].powi(2))
        .sum::<f64>()
        * h2;
    let adv = phase_advection(&prev.phi, &next.v);
    let material: f64 = prev
        .phi
        .values()
        .iter()
        .zip(next.phi.values())
        .zip(adv.values())
        .map(|((a, b), c)| {
            let m = (b - a) / dt + c;
            m * m
        })
        .sum::<f64>()
        * h2;
    (viscous, next.eps * material)
}
