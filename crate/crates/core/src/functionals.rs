//! Relative energy, bulk error and the integrals that control their growth.
//!
//! Every quantity is a midpoint sum over cell centers with the centered
//! gradient of `phi`, so algebraic identities between integrands carry over
//! to the discrete sums. The staggered velocity is averaged to cell centers
//! before any contraction.

use std::io::{self, Write};

use crate::calibration::CalibrationSnapshot;
use crate::dwell::DoubleWellSpec;
use crate::error::{Error, Result};
use crate::grid::{self, Boundary, Ghost, Grid2D, Layout, ScalarField, TensorField, VectorField};
use crate::solver::{self, SimState};

/// Pointwise quantities derived from `phi` that every functional needs.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceFields {
    pub grad_phi: VectorField,
    /// `|∇phi|`
    pub grad_norm: ScalarField,
    /// `sqrt(2 W(phi))`
    pub root2w: ScalarField,
    pub psi: ScalarField,
    /// `sqrt(2 W(phi)) ∇phi`, the chain rule for `∇psi`
    pub grad_psi: VectorField,
    pub grad_psi_norm: ScalarField,
    pub normal: VectorField,
}

impl InterfaceFields {
    pub fn new(phi: &ScalarField, well: &DoubleWellSpec) -> Self {
        let g = phi.grid();
        let grad_phi = grid::gradient(phi);
        let grad_norm = grad_phi.norm();
        let root2w = phi.map(|p| well.root2w(p));
        let (psi, grad_psi) = psi_field(phi, well);
        let grad_psi_norm = ScalarField::from_values(
            g,
            root2w
                .values()
                .iter()
                .zip(grad_norm.values())
                .map(|(r, n)| r * n)
                .collect(),
        )
        .expect("same grid");
        let normal = normal_field_from_gradient(&grad_phi, FALLBACK_NORMAL);
        Self {
            grad_phi,
            grad_norm,
            root2w,
            psi,
            grad_psi,
            grad_psi_norm,
            normal,
        }
    }
}

/// Direction used where `∇phi` vanishes.
pub const FALLBACK_NORMAL: [f64; 2] = [1.0, 0.0];

/// `psi(phi)` and its gradient by the chain rule `sqrt(2 W(phi)) ∇phi`.
pub fn psi_field(phi: &ScalarField, well: &DoubleWellSpec) -> (ScalarField, VectorField) {
    let psi = phi.map(|p| well.psi(p));
    let mut grad = grid::gradient(phi);
    for (k, &p) in phi.values().iter().enumerate() {
        let r = well.root2w(p);
        grad.x[k] *= r;
        grad.y[k] *= r;
    }
    (psi, grad)
}

/// `∇phi / |∇phi|`, or `fallback` where `|∇phi|` is below
/// `1e-12 (max |∇phi| + 1)`.
pub fn normal_field(phi: &ScalarField, fallback: [f64; 2]) -> VectorField {
    normal_field_from_gradient(&grid::gradient(phi), fallback)
}

fn normal_field_from_gradient(grad: &VectorField, fallback: [f64; 2]) -> VectorField {
    let g = grad.grid();
    let norm = grad.norm();
    let tau = 1e-12 * (norm.max_abs() + 1.0);
    let fl = fallback[0].hypot(fallback[1]);
    let fallback = if fl > 0.0 {
        [fallback[0] / fl, fallback[1] / fl]
    } else {
        FALLBACK_NORMAL
    };
    let mut out = VectorField::zeros(g, Layout::CellCentered);
    for (k, &m) in norm.values().iter().enumerate() {
        let (nx, ny) = if m > tau {
            (grad.x[k] / m, grad.y[k] / m)
        } else {
            (fallback[0], fallback[1])
        };
        out.x[k] = nx;
        out.y[k] = ny;
    }
    out
}

/// `H = -eps Δphi + W'(phi) / eps`, with the wall value `-1` on a Dirichlet grid.
pub fn curvature_field(state: &SimState, well: &DoubleWellSpec) -> ScalarField {
    let eps = state.eps;
    let ghost = match state.grid().bc() {
        Boundary::Dirichlet => Ghost::Dirichlet(-1.0),
        Boundary::Periodic => Ghost::Neumann,
    };
    let lap = grid::laplacian(&state.phi, ghost);
    lap.zip_map(&state.phi, |l, p| -eps * l + well.dw(p) / eps)
}

/// The relative energy and its three nonnegative parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeEnergy {
    pub total: f64,
    pub kinetic: f64,
    pub equipartition: f64,
    pub tilt: f64,
}

fn check_cell_centered(v: &VectorField, what: &str) -> Result<()> {
    if v.layout() != Layout::CellCentered {
        return Err(Error::Usage(format!("{what} must be cell-centered")));
    }
    Ok(())
}

fn check_unit_bound(xi: &VectorField) -> Result<()> {
    for k in 0..xi.x.len() {
        let m = xi.x[k].hypot(xi.y[k]);
        if m > 1.0 + 1e-12 {
            let n = xi.grid().n();
            return Err(Error::Precondition(format!(
                "|xi| = {m} exceeds 1 at cell ({}, {})",
                k % n,
                k / n
            )));
        }
    }
    Ok(())
}

fn cell_velocity(v: &VectorField) -> VectorField {
    match v.layout() {
        Layout::Staggered => v.to_cell_centered(),
        Layout::CellCentered => v.clone(),
    }
}

/// `∫ |v_eps - v|^2/2 + eps/2 |∇phi|^2 + W(phi)/eps - xi·∇psi` with its
/// kinetic, equipartition and tilt parts.
pub fn relative_energy(
    state: &SimState,
    v_ref: &VectorField,
    xi: &VectorField,
    well: &DoubleWellSpec,
) -> Result<RelativeEnergy> {
    check_cell_centered(v_ref, "reference velocity")?;
    check_cell_centered(xi, "xi")?;
    let g = state.grid();
    if v_ref.grid() != g || xi.grid() != g {
        return Err(Error::Usage("fields live on different grids".into()));
    }
    check_unit_bound(xi)?;
    let f = InterfaceFields::new(&state.phi, well);
    Ok(relative_energy_with(state, &f, v_ref, xi, well))
}

fn relative_energy_with(
    state: &SimState,
    f: &InterfaceFields,
    v_ref: &VectorField,
    xi: &VectorField,
    well: &DoubleWellSpec,
) -> RelativeEnergy {
    let g = state.grid();
    let eps = state.eps;
    let se = eps.sqrt();
    let v = cell_velocity(&state.v);
    let (mut total, mut kinetic, mut equip, mut tilt) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..g.len() {
        let du = [v.x[k] - v_ref.x[k], v.y[k] - v_ref.y[k]];
        let kin = 0.5 * (du[0] * du[0] + du[1] * du[1]);
        let gn = f.grad_norm.values()[k];
        let p = state.phi.values()[k];
        let xi_grad_psi = xi.x[k] * f.grad_psi.x[k] + xi.y[k] * f.grad_psi.y[k];
        total += kin + 0.5 * eps * gn * gn + well.w(p) / eps - xi_grad_psi;
        kinetic += kin;
        let e = se * gn - f.root2w.values()[k] / se;
        equip += 0.5 * e * e;
        let xn = xi.x[k] * f.normal.x[k] + xi.y[k] * f.normal.y[k];
        tilt += (1.0 - xn) * f.grad_psi_norm.values()[k];
    }
    let area = g.h() * g.h();
    RelativeEnergy {
        total: total * area,
        kinetic: kinetic * area,
        equipartition: equip * area,
        tilt: tilt * area,
    }
}

/// `∫ |psi(phi) - c0 chi| |theta|`.
pub fn bulk_error(
    phi: &ScalarField,
    chi: &ScalarField,
    theta: &ScalarField,
    well: &DoubleWellSpec,
) -> f64 {
    let c0 = well.surface_tension_c0();
    let sum: f64 = phi
        .values()
        .iter()
        .zip(chi.values())
        .zip(theta.values())
        .map(|((&p, &c), &t)| (well.psi(p) - c0 * c).abs() * t.abs())
        .sum();
    let h = phi.grid().h();
    sum * h * h
}

/// A named integral in a list of right-hand-side contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NamedTerm {
    pub name: &'static str,
    pub value: f64,
}

/// Signed contributions to the time derivative of a functional. Their sum
/// bounds (or equals) that derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct TermList {
    pub terms: Vec<NamedTerm>,
}

impl TermList {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }

    pub fn sum(&self) -> f64 {
        self.terms.iter().map(|t| t.value).sum()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.terms.iter().map(|t| t.name).collect()
    }
}

/// Names of the relative energy contributions, in order.
pub const RELATIVE_ENERGY_TERMS: [&str; 15] = [
    "viscous",
    "phase_dissipation",
    "velocity_dissipation",
    "advection",
    "indicator",
    "velocity_compensation",
    "equipartition_compensation",
    "curvature_cross",
    "transport",
    "length_transport",
    "stretch",
    "tilt_compression",
    "equipartition_compression",
    "normal_alignment",
    "calibration_alignment",
];

/// Names of the bulk error contributions, in order.
pub const BULK_ERROR_TERMS: [&str; 9] = [
    "weight_transport",
    "weight_compression",
    "normal_mismatch",
    "relative_advection",
    "velocity_equipartition",
    "velocity_curvature",
    "curvature_equipartition",
    "divergence_equipartition",
    "weight_equipartition",
];

/// Everything the integrands need at one cell.
struct Cell {
    eps: f64,
    phi_root2w: f64,
    grad_norm: f64,
    grad_psi_norm: f64,
    psi: f64,
    n: [f64; 2],
    h_eps: f64,
    du: [f64; 2],
    grad_du: [[f64; 2]; 2],
    c0chi: f64,
    xi: [f64; 2],
    grad_xi: [[f64; 2]; 2],
    dt_xi: [f64; 2],
    div_xi: f64,
    grad_div_xi: [f64; 2],
    b: [f64; 2],
    grad_b: [[f64; 2]; 2],
    v: [f64; 2],
    grad_v: [[f64; 2]; 2],
    theta: f64,
    grad_theta: [f64; 2],
    dt_theta: f64,
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// `(u·∇) w` with `m[a][b] = d_b w_a`.
#[inline]
fn directional(m: [[f64; 2]; 2], u: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * u[0] + m[0][1] * u[1],
        m[1][0] * u[0] + m[1][1] * u[1],
    ]
}

/// `(∇w)^T u`, component `b` is `sum_a d_b w_a u_a`.
#[inline]
fn transposed(m: [[f64; 2]; 2], u: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * u[0] + m[1][0] * u[1],
        m[0][1] * u[0] + m[1][1] * u[1],
    ]
}

/// `∇w : a ⊗ b = sum d_b w_a a_a b_b`.
#[inline]
fn contract(m: [[f64; 2]; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    dot(a, directional(m, b))
}

impl Cell {
    fn equip_defect(&self) -> f64 {
        let se = self.eps.sqrt();
        se * self.grad_norm - self.phi_root2w / se
    }

    fn relative_energy_terms(&self) -> [f64; 15] {
        let eps = self.eps;
        let gn2 = self.grad_norm * self.grad_norm;
        let bv = sub(self.b, self.v);
        let n_minus_xi = sub(self.n, self.xi);
        let a = self.h_eps + self.phi_root2w * self.div_xi;
        let c = self.h_eps - dot(bv, self.xi) * eps * self.grad_norm;
        let grad_du_sq: f64 = self.grad_du.iter().flatten().map(|x| x * x).sum();
        let vel_comp = dot(bv, self.xi) + self.div_xi;
        let equip = self.equip_defect();
        let material_xi = [
            self.dt_xi[0] + directional(self.grad_xi, self.b)[0],
            self.dt_xi[1] + directional(self.grad_xi, self.b)[1],
        ];
        let bt_xi = transposed(self.grad_b, self.xi);
        let transport = [material_xi[0] + bt_xi[0], material_xi[1] + bt_xi[1]];
        let div_b = self.grad_b[0][0] + self.grad_b[1][1];
        let xn = dot(self.xi, self.n);
        let excess = eps * gn2 - self.grad_psi_norm;
        let nn = contract(self.grad_b, self.n, self.n);
        let xx = contract(self.grad_b, self.xi, self.xi);
        [
            -grad_du_sq,
            -a * a / (2.0 * eps),
            -c * c / (2.0 * eps),
            -dot(self.du, directional(self.grad_v, self.du)),
            -(self.c0chi - self.psi) * dot(self.du, self.grad_div_xi),
            vel_comp * vel_comp * eps * gn2,
            self.div_xi * self.div_xi * equip * equip,
            -a * dot(sub(self.v, self.b), n_minus_xi) * self.grad_norm,
            -dot(transport, n_minus_xi) * self.grad_psi_norm,
            -dot(self.xi, material_xi) * self.grad_psi_norm,
            -contract(self.grad_b, n_minus_xi, n_minus_xi) * self.grad_psi_norm,
            div_b * (1.0 - xn) * self.grad_psi_norm,
            div_b * 0.5 * equip * equip,
            -(nn - xx) * excess,
            -xx * excess,
        ]
    }

    fn bulk_error_terms(&self) -> [f64; 9] {
        let eps = self.eps;
        let se = eps.sqrt();
        let rel = self.psi - self.c0chi;
        let bv = sub(self.b, self.v);
        let div_b = self.grad_b[0][0] + self.grad_b[1][1];
        let equip = self.equip_defect();
        let sg = se * self.grad_norm;
        let th = self.theta;
        let v_eps = [self.v[0] + self.du[0], self.v[1] + self.du[1]];
        [
            rel * (self.dt_theta + dot(self.b, self.grad_theta)),
            rel * th * div_b,
            th * dot(bv, sub(self.n, self.xi)) * self.grad_psi_norm,
            -rel * dot(sub(self.v, v_eps), self.grad_theta),
            th * dot(bv, self.xi) * (self.grad_psi_norm - eps * self.grad_norm * self.grad_norm),
            (dot(bv, self.xi) * sg - self.h_eps / se) * th * sg,
            th * (self.h_eps / se + self.phi_root2w / se * self.div_xi) * equip,
            th * self.div_xi * equip * equip,
            -th * sg * equip,
        ]
    }
}

fn tensor(t: &TensorField, k: usize) -> [[f64; 2]; 2] {
    t.at(k)
}

fn check_alignment(state: &SimState, snap: &CalibrationSnapshot) -> Result<()> {
    if state.grid() != snap.grid {
        return Err(Error::Usage(
            "state and calibration live on different grids".into(),
        ));
    }
    if (state.t - snap.t).abs() > 1e-12 * (1.0 + snap.t.abs()) {
        return Err(Error::Usage(format!(
            "state at t = {} evaluated against calibration at t = {}",
            state.t, snap.t
        )));
    }
    Ok(())
}

fn cells(
    state: &SimState,
    snap: &CalibrationSnapshot,
    next: Option<&CalibrationSnapshot>,
    well: &DoubleWellSpec,
) -> Result<Vec<Cell>> {
    check_alignment(state, snap)?;
    let (dt_xi, dt_theta) = match next {
        Some(next) => snap.forward_time_derivatives(next)?,
        None => (
            VectorField::zeros(snap.grid, Layout::CellCentered),
            ScalarField::zeros(snap.grid),
        ),
    };
    let f = InterfaceFields::new(&state.phi, well);
    let h_eps = curvature_field(state, well);
    let v_eps = cell_velocity(&state.v);
    let grad_v_eps = grid::jacobian(&v_eps)?;
    let c0 = well.surface_tension_c0();
    let g = state.grid();
    Ok((0..g.len())
        .map(|k| {
            let gv = tensor(&snap.grad_v, k);
            let ge = grad_v_eps.at(k);
            let v = snap.v.at(k % g.n(), k / g.n());
            Cell {
                eps: state.eps,
                phi_root2w: f.root2w.values()[k],
                grad_norm: f.grad_norm.values()[k],
                grad_psi_norm: f.grad_psi_norm.values()[k],
                psi: f.psi.values()[k],
                n: [f.normal.x[k], f.normal.y[k]],
                h_eps: h_eps.values()[k],
                du: [v_eps.x[k] - v[0], v_eps.y[k] - v[1]],
                grad_du: [
                    [ge[0][0] - gv[0][0], ge[0][1] - gv[0][1]],
                    [ge[1][0] - gv[1][0], ge[1][1] - gv[1][1]],
                ],
                c0chi: c0 * snap.chi.values()[k],
                xi: [snap.xi.x[k], snap.xi.y[k]],
                grad_xi: tensor(&snap.grad_xi, k),
                dt_xi: [dt_xi.x[k], dt_xi.y[k]],
                div_xi: snap.div_xi.values()[k],
                grad_div_xi: [snap.grad_div_xi.x[k], snap.grad_div_xi.y[k]],
                b: [snap.b.x[k], snap.b.y[k]],
                grad_b: tensor(&snap.grad_b, k),
                v,
                grad_v: gv,
                theta: snap.theta.values()[k],
                grad_theta: [snap.grad_theta.x[k], snap.grad_theta.y[k]],
                dt_theta: dt_theta.values()[k],
            }
        })
        .collect())
}

fn integrate_terms<const N: usize>(
    grid: Grid2D,
    names: [&'static str; N],
    cells: &[Cell],
    f: impl Fn(&Cell) -> [f64; N],
) -> TermList {
    let mut sums = [0.0; N];
    for c in cells {
        for (s, v) in sums.iter_mut().zip(f(c)) {
            *s += v;
        }
    }
    let area = grid.h() * grid.h();
    TermList {
        terms: names
            .iter()
            .zip(sums)
            .map(|(&name, s)| NamedTerm {
                name,
                value: s * area,
            })
            .collect(),
    }
}

/// Instantaneous spatial integrals bounding the growth of the relative
/// energy, as signed contributions in [`RELATIVE_ENERGY_TERMS`] order. The
/// time derivative of `xi` is the forward difference to `next`.
pub fn rhs_terms_relative_energy(
    state: &SimState,
    snap: &CalibrationSnapshot,
    next: Option<&CalibrationSnapshot>,
    well: &DoubleWellSpec,
) -> Result<TermList> {
    let next = next.ok_or_else(|| {
        Error::Usage("the transport terms need a second calibration snapshot".into())
    })?;
    let cells = cells(state, snap, Some(next), well)?;
    Ok(integrate_terms(
        snap.grid,
        RELATIVE_ENERGY_TERMS,
        &cells,
        Cell::relative_energy_terms,
    ))
}

/// Instantaneous spatial integrals whose sum is the time derivative of the
/// bulk error, in [`BULK_ERROR_TERMS`] order.
pub fn rhs_terms_bulk_error(
    state: &SimState,
    snap: &CalibrationSnapshot,
    next: Option<&CalibrationSnapshot>,
    well: &DoubleWellSpec,
) -> Result<TermList> {
    let next = next.ok_or_else(|| {
        Error::Usage("the weight transport term needs a second calibration snapshot".into())
    })?;
    let cells = cells(state, snap, Some(next), well)?;
    Ok(integrate_terms(
        snap.grid,
        BULK_ERROR_TERMS,
        &cells,
        Cell::bulk_error_terms,
    ))
}

/// Left-hand sides of the coercivity estimates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Coercivity {
    /// `∫ |v_eps - v|^2 / 2`
    pub kinetic: f64,
    /// `∫ (1 - n·xi) |∇psi|`
    pub tilt: f64,
    /// `∫ (sqrt(eps)|∇phi| - sqrt(2W)/sqrt(eps))^2 / 2`
    pub equipartition: f64,
    /// `∫ |n - xi|^2 |∇psi| + ∫ min(s^2, 1) |∇psi|`
    pub normal_distance: f64,
    /// Same with `eps |∇phi|^2` in place of `|∇psi|`.
    pub normal_distance_gradient: f64,
    /// `∫ (min(|s|, 1) + sqrt(1 - n·xi)) |eps |∇phi|^2 - |∇psi||`
    pub mixed: f64,
    /// `∫ min(|s|, 1) |psi - c0 chi|`
    pub weighted_indicator: f64,
}

impl Coercivity {
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.kinetic,
            self.tilt,
            self.equipartition,
            self.normal_distance,
            self.normal_distance_gradient,
            self.mixed,
            self.weighted_indicator,
        ]
    }
}

/// Coercivity integrals plus the norms they control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityReport {
    pub relative: RelativeEnergy,
    pub bulk: f64,
    pub lhs: Coercivity,
    /// `‖c0 chi - psi‖_{L1}`
    pub l1_error: f64,
    /// `‖v_eps - v‖_{L2}`
    pub l2_velocity: f64,
    /// Measured constants `lhs / E` for the distance and mixed controls.
    pub c_normal_distance: f64,
    pub c_normal_distance_gradient: f64,
    pub c_mixed: f64,
    /// `‖c0 chi - psi‖_{L1}^2 / E_vol`
    pub c_l1: f64,
    /// Cells (i, j) where `2 (1 - n·xi) >= |n - xi|^2` fails beyond rounding.
    pub pointwise_violations: usize,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn coercivity_report(
    state: &SimState,
    snap: &CalibrationSnapshot,
    well: &DoubleWellSpec,
) -> Result<CoercivityReport> {
    check_alignment(state, snap)?;
    check_unit_bound(&snap.xi)?;
    let g = state.grid();
    let f = InterfaceFields::new(&state.phi, well);
    let relative = relative_energy_with(state, &f, &snap.v, &snap.xi, well);
    let bulk = bulk_error(&state.phi, &snap.chi, &snap.theta, well);
    let c0 = well.surface_tension_c0();
    let eps = state.eps;
    let mut lhs = Coercivity::default();
    let (mut l1, mut l2) = (0.0, 0.0);
    let mut violations = 0;
    let v_eps = cell_velocity(&state.v);
    for k in 0..g.len() {
        let n = [f.normal.x[k], f.normal.y[k]];
        let xi = [snap.xi.x[k], snap.xi.y[k]];
        let d = sub(n, xi);
        let d2 = dot(d, d);
        let one_minus = 1.0 - dot(n, xi);
        if 2.0 * one_minus < d2 - 1e-12 {
            violations += 1;
        }
        let gp = f.grad_psi_norm.values()[k];
        let gn = f.grad_norm.values()[k];
        let eg = eps * gn * gn;
        let dist = snap.s.values()[k].abs().min(1.0);
        lhs.normal_distance += d2 * gp + dist * dist * gp;
        lhs.normal_distance_gradient += d2 * eg + dist * dist * eg;
        lhs.mixed += (dist + one_minus.max(0.0).sqrt()) * (eg - gp).abs();
        let rel = (f.psi.values()[k] - c0 * snap.chi.values()[k]).abs();
        lhs.weighted_indicator += dist * rel;
        l1 += rel;
        let du = [v_eps.x[k] - snap.v.x[k], v_eps.y[k] - snap.v.y[k]];
        l2 += dot(du, du);
    }
    let area = g.h() * g.h();
    lhs.normal_distance *= area;
    lhs.normal_distance_gradient *= area;
    lhs.mixed *= area;
    lhs.weighted_indicator *= area;
    lhs.kinetic = relative.kinetic;
    lhs.tilt = relative.tilt;
    lhs.equipartition = relative.equipartition;
    let l1_error = l1 * area;
    Ok(CoercivityReport {
        relative,
        bulk,
        lhs,
        l1_error,
        l2_velocity: (l2 * area).sqrt(),
        c_normal_distance: ratio(lhs.normal_distance, relative.total),
        c_normal_distance_gradient: ratio(lhs.normal_distance_gradient, relative.total),
        c_mixed: ratio(lhs.mixed, relative.total),
        c_l1: ratio(l1_error * l1_error, bulk),
        pointwise_violations: violations,
    })
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub e: f64,
    pub e_kin: f64,
    pub e_equip: f64,
    pub e_tilt: f64,
    pub e_vol: f64,
    pub e_total: f64,
    pub d_visc: f64,
    pub d1: f64,
    pub d2: f64,
    pub l1_err: f64,
    pub l2_vel: f64,
    pub coercivity: Coercivity,
}

impl DiagnosticsRecord {
    pub const HEADER: &'static str = "t,E,E_kin,E_equip,E_tilt,E_vol,E_total,D_visc,D1,D2,L1_err,L2_vel,c36,c37,c38,c39,c310,c311,c319";
    pub const COLUMNS: usize = 19;

    pub fn values(&self) -> [f64; 19] {
        let c = self.coercivity.as_array();
        [
            self.t,
            self.e,
            self.e_kin,
            self.e_equip,
            self.e_tilt,
            self.e_vol,
            self.e_total,
            self.d_visc,
            self.d1,
            self.d2,
            self.l1_err,
            self.l2_vel,
            c[0],
            c[1],
            c[2],
            c[3],
            c[4],
            c[5],
            c[6],
        ]
    }

    pub fn write_csv_row<W: Write>(&self, mut out: W) -> io::Result<()> {
        let row: Vec<String> = self.values().iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", row.join(","))
    }

    /// Parses a row produced by [`Self::write_csv_row`].
    pub fn parse_csv_row(line: &str) -> Result<Self> {
        let vals: Vec<f64> = line
            .trim()
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Input(format!("bad value '{s}': {e}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != Self::COLUMNS {
            return Err(Error::Input(format!(
                "expected {} columns, found {}",
                Self::COLUMNS,
                vals.len()
            )));
        }
        Ok(Self {
            t: vals[0],
            e: vals[1],
            e_kin: vals[2],
            e_equip: vals[3],
            e_tilt: vals[4],
            e_vol: vals[5],
            e_total: vals[6],
            d_visc: vals[7],
            d1: vals[8],
            d2: vals[9],
            l1_err: vals[10],
            l2_vel: vals[11],
            coercivity: Coercivity {
                kinetic: vals[12],
                tilt: vals[13],
                equipartition: vals[14],
                normal_distance: vals[15],
                normal_distance_gradient: vals[16],
                mixed: vals[17],
                weighted_indicator: vals[18],
            },
        })
    }
}

/// Diagnostics of `state` against the calibration at the same time. The
/// dissipation squares need no time derivative.
pub fn diagnostics(
    state: &SimState,
    snap: &CalibrationSnapshot,
    well: &DoubleWellSpec,
) -> Result<DiagnosticsRecord> {
    let report = coercivity_report(state, snap, well)?;
    let cells = cells(state, snap, None, well)?;
    let area = snap.grid.h() * snap.grid.h();
    let (mut d_visc, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for c in &cells {
        let t = c.relative_energy_terms();
        d_visc -= t[0];
        d1 -= t[1];
        d2 -= t[2];
    }
    Ok(DiagnosticsRecord {
        t: state.t,
        e: report.relative.total,
        e_kin: report.relative.kinetic,
        e_equip: report.relative.equipartition,
        e_tilt: report.relative.tilt,
        e_vol: report.bulk,
        e_total: solver::total_energy(state, well),
        d_visc: d_visc * area,
        d1: d1 * area,
        d2: d2 * area,
        l1_err: report.l1_error,
        l2_vel: report.l2_velocity,
        coercivity: report.lhs,
    })
}

pub fn write_diagnostics_csv<W: Write>(
    records: &[DiagnosticsRecord],
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "{}", DiagnosticsRecord::HEADER)?;
    for r in records {
        r.write_csv_row(&mut out)?;
    }
    Ok(())
}
