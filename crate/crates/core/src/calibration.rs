//! Extension of the interface normal, its transport velocity and the bulk
//! weight, built from the signed distance of a [`CircleReference`].
//!
//! With `s` the signed distance and `delta` the tube half-width:
//!
//! * `xi = eta_bar(s/delta) ∇s`
//! * `B = ((v∘P)·∇s - (Δs)∘P) eta_tilde(s/delta) ∇s`, where `P` is the closest
//!   point projection and `(Δs)∘P = -1/R` for the circle
//! * `theta = theta_bar(s/delta)`
//!
//! Spatial derivatives are evaluated in closed form. Validation measures the
//! defining inequalities either with grid stencils or with time differences
//! between two snapshots.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::grid::{self, Grid2D, Layout, ScalarField, TensorField, VectorField};
use crate::reference::CircleReference;

/// Smooth cut-off profiles. Each function returns the value followed by
/// derivatives.
#[derive(Debug, Clone, Copy)]
pub struct CutoffProfiles {
    /// Even, supported in `[-1, 1]`, `1 - eta_bar(r) ~ r^2`. Returns value, first and second derivative.
    pub eta_bar: fn(f64) -> [f64; 3],
    /// Even, `1` on `[-1, 1]`, supported in `[-2, 2]`.
    pub eta_tilde: fn(f64) -> [f64; 2],
    /// Odd, `1` on `(-inf, -1]`, `-1` on `[1, inf)`.
    pub theta_bar: fn(f64) -> [f64; 2],
}

impl Default for CutoffProfiles {
    fn default() -> Self {
        default_profiles()
    }
}

fn eta_bar_cubic(r: f64) -> [f64; 3] {
    if r.abs() >= 1.0 {
        return [0.0; 3];
    }
    let q = 1.0 - r * r;
    [q * q * q, -6.0 * r * q * q, q * (30.0 * r * r - 6.0)]
}

fn eta_tilde_smoothstep(r: f64) -> [f64; 2] {
    let a = r.abs();
    if a <= 1.0 {
        [1.0, 0.0]
    } else if a >= 2.0 {
        [0.0, 0.0]
    } else {
        let t = a - 1.0;
        let value = 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        let slope = -30.0 * t * t * (1.0 - t) * (1.0 - t);
        [value, slope * r.signum()]
    }
}

fn theta_bar_cubic(r: f64) -> [f64; 2] {
    if r >= 1.0 {
        [-1.0, 0.0]
    } else if r <= -1.0 {
        [1.0, 0.0]
    } else {
        [-0.5 * r * (3.0 - r * r), -1.5 * (1.0 - r * r)]
    }
}

/// `eta_bar = (1 - r^2)^3`, quintic smoothstep roll-off for `eta_tilde`, and
/// `theta_bar = -r (3 - r^2) / 2` saturated at `∓1`.
pub fn default_profiles() -> CutoffProfiles {
    CutoffProfiles {
        eta_bar: eta_bar_cubic,
        eta_tilde: eta_tilde_smoothstep,
        theta_bar: theta_bar_cubic,
    }
}

/// Calibration data and its closed-form derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCalibration {
    pub s: f64,
    pub xi: [f64; 2],
    pub grad_xi: [[f64; 2]; 2],
    pub div_xi: f64,
    pub grad_div_xi: [f64; 2],
    pub dt_xi: [f64; 2],
    pub b: [f64; 2],
    pub grad_b: [[f64; 2]; 2],
    pub theta: f64,
    pub grad_theta: [f64; 2],
    pub dt_theta: f64,
}

/// Evaluates the calibration at `x`. At the exact center of the circle the
/// normal is undefined and every vector quantity is returned as zero.
pub fn evaluate_point(
    reference: &CircleReference,
    profiles: &CutoffProfiles,
    delta: f64,
    x: [f64; 2],
    t: f64,
) -> Result<PointCalibration> {
    let radius = reference.radius(t)?;
    let radius_rate = -1.0 / radius;
    let d = [x[0] - reference.center[0], x[1] - reference.center[1]];
    let r = d[0].hypot(d[1]);
    let s = radius - r;
    let [th, dth] = (profiles.theta_bar)(s / delta);
    let mut out = PointCalibration {
        s,
        xi: [0.0; 2],
        grad_xi: [[0.0; 2]; 2],
        div_xi: 0.0,
        grad_div_xi: [0.0; 2],
        dt_xi: [0.0; 2],
        b: [0.0; 2],
        grad_b: [[0.0; 2]; 2],
        theta: th,
        grad_theta: [0.0; 2],
        dt_theta: dth / delta * radius_rate,
    };
    if r == 0.0 {
        return Ok(out);
    }
    let n = [-d[0] / r, -d[1] / r];
    // d_b n_a = -(delta_ab - n_a n_b) / r
    let mut grad_n = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let id = if a == b { 1.0 } else { 0.0 };
            grad_n[a][b] = -(id - n[a] * n[b]) / r;
        }
    }
    let [eb, deb, d2eb] = (profiles.eta_bar)(s / delta);
    let (deb, d2eb) = (deb / delta, d2eb / (delta * delta));
    for a in 0..2 {
        out.xi[a] = eb * n[a];
        out.dt_xi[a] = deb * radius_rate * n[a];
        out.grad_theta[a] = dth / delta * n[a];
        for b in 0..2 {
            out.grad_xi[a][b] = deb * n[a] * n[b] + eb * grad_n[a][b];
        }
    }
    out.div_xi = deb - eb / r;
    let g = d2eb - deb / r - eb / (r * r);
    out.grad_div_xi = [g * n[0], g * n[1]];

    // B = beta * eta_tilde(s/delta) * n with beta = v(P)·n + 1/R
    let p = [
        reference.center[0] - radius * n[0],
        reference.center[1] - radius * n[1],
    ];
    let vp = reference.velocity(p);
    let gvp = reference.velocity_gradient(p);
    let beta = vp[0] * n[0] + vp[1] * n[1] + 1.0 / radius;
    let mut grad_beta = [0.0; 2];
    for (b, gb) in grad_beta.iter_mut().enumerate() {
        let mut acc = 0.0;
        for a in 0..2 {
            // d_b P_c = -R d_b n_c
            let mut dvp = 0.0;
            for c in 0..2 {
                dvp += gvp[a][c] * (-radius * grad_n[c][b]);
            }
            acc += dvp * n[a] + vp[a] * grad_n[a][b];
        }
        *gb = acc;
    }
    let [et, det] = (profiles.eta_tilde)(s / delta);
    let det = det / delta;
    let coeff = beta * et;
    for a in 0..2 {
        out.b[a] = coeff * n[a];
        for b in 0..2 {
            let d_coeff = grad_beta[b] * et + beta * det * n[b];
            out.grad_b[a][b] = d_coeff * n[a] + coeff * grad_n[a][b];
        }
    }
    Ok(out)
}

/// Grid realization of the calibration at one time. All fields are cell-centered.
#[derive(Debug, Clone)]
pub struct CalibrationSnapshot {
    pub t: f64,
    pub delta: f64,
    pub grid: Grid2D,
    pub profiles: CutoffProfiles,
    /// Signed distance to the reference circle (positive inside).
    pub s: ScalarField,
    pub chi: ScalarField,
    pub xi: VectorField,
    pub grad_xi: TensorField,
    pub div_xi: ScalarField,
    pub grad_div_xi: VectorField,
    /// Closed-form time derivative, kept for cross-checking the forward
    /// difference between snapshots.
    pub dt_xi_exact: VectorField,
    pub b: VectorField,
    pub grad_b: TensorField,
    pub theta: ScalarField,
    pub grad_theta: VectorField,
    pub dt_theta_exact: ScalarField,
    /// Limit-flow velocity and its gradient at cell centers.
    pub v: VectorField,
    pub grad_v: TensorField,
    /// Non-fatal configuration concerns.
    pub warnings: Vec<String>,
}

fn zero_tensor(len: usize) -> TensorField {
    TensorField {
        xx: vec![0.0; len],
        xy: vec![0.0; len],
        yx: vec![0.0; len],
        yy: vec![0.0; len],
    }
}

fn put_tensor(t: &mut TensorField, k: usize, m: [[f64; 2]; 2]) {
    t.xx[k] = m[0][0];
    t.xy[k] = m[0][1];
    t.yx[k] = m[1][0];
    t.yy[k] = m[1][1];
}

/// Builds the calibration fields on `grid` at time `t`.
///
/// Fails when the outer tube leaves the domain or when `delta` is below one
/// cell. Softer violations, such as a tube resolved by fewer than eight
/// cells, are recorded in [`CalibrationSnapshot::warnings`].
pub fn build_calibration(
    reference: &CircleReference,
    t: f64,
    delta: f64,
    grid: Grid2D,
    profiles: CutoffProfiles,
) -> Result<CalibrationSnapshot> {
    let mut warnings = reference.check_tube(delta)?;
    let h = grid.h();
    if delta < h {
        return Err(Error::Config(format!(
            "tube width {delta} is below the grid spacing {h}"
        )));
    }
    if delta < 8.0 * h {
        warnings.push(format!(
            "tube width {delta} is resolved by fewer than 8 cells (h = {h})"
        ));
    }
    reference.radius(t)?;
    let len = grid.len();
    let mut s = ScalarField::zeros(grid);
    let mut theta = ScalarField::zeros(grid);
    let mut div_xi = ScalarField::zeros(grid);
    let mut dt_theta = ScalarField::zeros(grid);
    let mut xi = VectorField::zeros(grid, Layout::CellCentered);
    let mut grad_div_xi = VectorField::zeros(grid, Layout::CellCentered);
    let mut dt_xi = VectorField::zeros(grid, Layout::CellCentered);
    let mut b = VectorField::zeros(grid, Layout::CellCentered);
    let mut grad_theta = VectorField::zeros(grid, Layout::CellCentered);
    let mut v = VectorField::zeros(grid, Layout::CellCentered);
    let mut grad_xi = zero_tensor(len);
    let mut grad_b = zero_tensor(len);
    let mut grad_v = zero_tensor(len);
    for j in 0..grid.n() {
        for i in 0..grid.n() {
            let k = grid.idx(i, j);
            let x = grid.center(i, j);
            let p = evaluate_point(reference, &profiles, delta, x, t)?;
            s.values_mut()[k] = p.s;
            theta.values_mut()[k] = p.theta;
            div_xi.values_mut()[k] = p.div_xi;
            dt_theta.values_mut()[k] = p.dt_theta;
            xi.x[k] = p.xi[0];
            xi.y[k] = p.xi[1];
            grad_div_xi.x[k] = p.grad_div_xi[0];
            grad_div_xi.y[k] = p.grad_div_xi[1];
            dt_xi.x[k] = p.dt_xi[0];
            dt_xi.y[k] = p.dt_xi[1];
            b.x[k] = p.b[0];
            b.y[k] = p.b[1];
            grad_theta.x[k] = p.grad_theta[0];
            grad_theta.y[k] = p.grad_theta[1];
            put_tensor(&mut grad_xi, k, p.grad_xi);
            put_tensor(&mut grad_b, k, p.grad_b);
            let vel = reference.velocity(x);
            v.x[k] = vel[0];
            v.y[k] = vel[1];
            put_tensor(&mut grad_v, k, reference.velocity_gradient(x));
        }
    }
    let chi = s.map(|sv| if sv > 0.0 { 1.0 } else { 0.0 });
    Ok(CalibrationSnapshot {
        t,
        delta,
        grid,
        profiles,
        s,
        chi,
        xi,
        grad_xi,
        div_xi,
        grad_div_xi,
        dt_xi_exact: dt_xi,
        b,
        grad_b,
        theta,
        grad_theta,
        dt_theta_exact: dt_theta,
        v,
        grad_v,
        warnings,
    })
}

impl CalibrationSnapshot {
    /// Forward difference `(next - self) / (next.t - self.t)` of `xi` and `theta`.
    pub fn forward_time_derivatives(&self, next: &Self) -> Result<(VectorField, ScalarField)> {
        let dt = next.t - self.t;
        if !(dt > 0.0) || next.grid != self.grid || next.delta != self.delta {
            return Err(Error::Usage(
                "time differences need a later snapshot on the same grid and tube".into(),
            ));
        }
        let dxi = next.xi.axpby(1.0 / dt, &self.xi, -1.0 / dt);
        let dtheta = next.theta.axpby(1.0 / dt, &self.theta, -1.0 / dt);
        Ok((dxi, dtheta))
    }
}

/// One validated condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResult {
    pub id: &'static str,
    /// Extremal constant: a lower bound for coercivity-type conditions, an
    /// upper bound for ratio-type conditions.
    pub measured_constant: f64,
    /// Largest absolute residual of the underlying quantity.
    pub max_residual: f64,
    pub argmax_cell: Option<(usize, usize)>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub t: f64,
    pub h: f64,
    pub conditions: Vec<ConditionResult>,
    /// Cells where the sign of the weight contradicts the phase.
    pub sign_violations: Vec<(usize, usize)>,
}

impl ConditionReport {
    pub fn get(&self, id: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.id == id)
    }

    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed) && self.sign_violations.is_empty()
    }

    /// CSV with header `condition_id,measured_constant,max_residual,argmax_cell`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "condition_id,measured_constant,max_residual,argmax_cell"
        )?;
        for c in &self.conditions {
            let cell = c
                .argmax_cell
                .map(|(i, j)| format!("{i}:{j}"))
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{}",
                c.id, c.measured_constant, c.max_residual, cell
            )?;
        }
        Ok(())
    }
}

/// Running maximum of `|residual| / weight` over cells with `min{dist, 1} >= guard`,
/// plus the largest residual over guard cells.
struct RatioTracker {
    guard: f64,
    ratio: f64,
    ratio_cell: Option<(usize, usize)>,
    max_residual: f64,
    residual_cell: Option<(usize, usize)>,
    guard_residual: f64,
}

impl RatioTracker {
    fn new(guard: f64) -> Self {
        Self {
            guard,
            ratio: 0.0,
            ratio_cell: None,
            max_residual: 0.0,
            residual_cell: None,
            guard_residual: 0.0,
        }
    }

    fn push(&mut self, cell: (usize, usize), residual: f64, weight: f64, dist: f64) {
        let r = residual.abs();
        if r > self.max_residual || self.residual_cell.is_none() {
            self.max_residual = r;
            self.residual_cell = Some(cell);
        }
        if dist.min(1.0) >= self.guard {
            let q = r / weight;
            if q > self.ratio || self.ratio_cell.is_none() {
                self.ratio = q;
                self.ratio_cell = Some(cell);
            }
        } else {
            self.guard_residual = self.guard_residual.max(r);
        }
    }

    /// Ratio conditions pass when the constant is finite and the guard cells
    /// respect `max(C, 1) * guard_bound`.
    fn finish(self, id: &'static str, guard_bound: f64) -> ConditionResult {
        let passed =
            self.ratio.is_finite() && self.guard_residual <= self.ratio.max(1.0) * guard_bound;
        ConditionResult {
            id,
            measured_constant: self.ratio,
            max_residual: self.max_residual,
            argmax_cell: self.ratio_cell.or(self.residual_cell),
            passed,
        }
    }
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `(m v)_a = sum_b m[a][b] v_b`.
#[inline]
fn mat_vec(m: [[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

/// `(m^T v)_b = sum_a m[a][b] v_a`.
#[inline]
fn mat_t_vec(m: [[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[1][0] * v[1],
        m[0][1] * v[0] + m[1][1] * v[1],
    ]
}

/// Centered-stencil divergence of the closed-form `xi`, applied at points of
/// the interface itself. Returns the worst deviation from `-H`.
fn interface_curvature_residual(
    reference: &CircleReference,
    profiles: &CutoffProfiles,
    delta: f64,
    t: f64,
    h: f64,
    samples: usize,
) -> Result<f64> {
    let radius = reference.radius(t)?;
    let xi = |x: [f64; 2]| evaluate_point(reference, profiles, delta, x, t).map(|p| p.xi);
    let mut worst: f64 = 0.0;
    for k in 0..samples {
        let a = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
        let [cx, cy] = reference.center;
        let (x, y) = (cx + radius * a.cos(), cy + radius * a.sin());
        let div = (xi([x + h, y])?[0] - xi([x - h, y])?[0] + xi([x, y + h])?[1]
            - xi([x, y - h])?[1])
            / (2.0 * h);
        worst = worst.max((div + 1.0 / radius).abs());
    }
    Ok(worst)
}

/// Measures every defining condition of the calibration at `snap.t`, using
/// `next` (a snapshot at a slightly later time) for time differences.
pub fn validate_calibration(
    snap: &CalibrationSnapshot,
    next: &CalibrationSnapshot,
    reference: &CircleReference,
) -> Result<ConditionReport> {
    let (dt_xi, dt_theta) = snap.forward_time_derivatives(next)?;
    let g = snap.grid;
    let n = g.n();
    let h = g.h();
    let guard = 2.0 * h;
    let dt_probe = next.t - snap.t;
    let mut conditions = Vec::new();

    // |xi| <= 1 - c min{s^2, 1}: largest admissible c
    let mut c_min = f64::INFINITY;
    let mut c_cell = None;
    let mut excess: f64 = 0.0;
    let mut excess_cell = None;
    for j in 0..n {
        for i in 0..n {
            let k = g.idx(i, j);
            let norm = snap.xi.x[k].hypot(snap.xi.y[k]);
            if norm - 1.0 > excess {
                excess = norm - 1.0;
                excess_cell = Some((i, j));
            }
            let s = snap.s.values()[k];
            let w = (s * s).min(1.0);
            if w > 0.0 {
                let c = (1.0 - norm) / w;
                if c < c_min {
                    c_min = c;
                    c_cell = Some((i, j));
                }
            }
        }
    }
    conditions.push(ConditionResult {
        id: "unit_bound",
        measured_constant: 1.0 + excess,
        max_residual: excess,
        argmax_cell: excess_cell,
        passed: excess <= 0.0,
    });
    conditions.push(ConditionResult {
        id: "coercivity",
        measured_constant: c_min,
        max_residual: excess,
        argmax_cell: c_cell,
        passed: c_min > 0.0 && excess <= 0.0,
    });

    // consistency on the interface: xi against the exact normal on cells
    // within one spacing, and the divergence stencil on the curve itself
    let mut normal_err: f64 = 0.0;
    let mut normal_cell = None;
    for j in 0..n {
        for i in 0..n {
            let k = g.idx(i, j);
            if snap.s.values()[k].abs() <= h {
                let nrm = reference.normal(g.center(i, j))?;
                let e = (snap.xi.x[k] - nrm[0]).hypot(snap.xi.y[k] - nrm[1]);
                if e > normal_err || normal_cell.is_none() {
                    normal_err = e;
                    normal_cell = Some((i, j));
                }
            }
        }
    }
    conditions.push(ConditionResult {
        id: "interface_normal",
        measured_constant: normal_err / (h * h),
        max_residual: normal_err,
        argmax_cell: normal_cell,
        passed: normal_err.is_finite(),
    });
    let curv_err =
        interface_curvature_residual(reference, &snap.profiles, snap.delta, snap.t, h, 8 * n)?;
    conditions.push(ConditionResult {
        id: "interface_curvature",
        measured_constant: curv_err / (h * h),
        max_residual: curv_err,
        argmax_cell: None,
        passed: curv_err.is_finite(),
    });

    let mut transport = RatioTracker::new(guard);
    let mut length = RatioTracker::new(guard);
    let mut velocity = RatioTracker::new(guard);
    let mut stretch = RatioTracker::new(guard);
    let mut weight_transport = RatioTracker::new(guard);
    let mut theta_upper = RatioTracker::new(guard);
    let mut theta_lower = f64::INFINITY;
    let mut theta_lower_cell = None;
    let mut sign_violations = Vec::new();
    let mut time_lipschitz: f64 = 0.0;
    let mut grad_b_max: f64 = 0.0;
    let mut support_leaks = 0usize;
    for j in 0..n {
        for i in 0..n {
            let k = g.idx(i, j);
            let cell = (i, j);
            let s = snap.s.values()[k];
            let dist = s.abs();
            let w1 = dist.min(1.0);
            let w2 = (dist * dist).min(1.0);
            let xi = [snap.xi.x[k], snap.xi.y[k]];
            let b = [snap.b.x[k], snap.b.y[k]];
            let v = [snap.v.x[k], snap.v.y[k]];
            let gxi = snap.grad_xi.at(k);
            let gb = snap.grad_b.at(k);
            let dxi = [dt_xi.x[k], dt_xi.y[k]];
            // (B·∇)xi
            let adv = mat_vec(gxi, b);
            let stretch_term = mat_t_vec(gb, xi);
            let r = [
                dxi[0] + adv[0] + stretch_term[0],
                dxi[1] + adv[1] + stretch_term[1],
            ];
            transport.push(cell, r[0].hypot(r[1]), w1, dist);
            let mat = [dxi[0] + adv[0], dxi[1] + adv[1]];
            length.push(cell, dot(xi, mat), w2, dist);
            let bv = [b[0] - v[0], b[1] - v[1]];
            velocity.push(cell, dot(bv, xi) + snap.div_xi.values()[k], w1, dist);
            // xi·(xi·∇)B
            stretch.push(cell, dot(xi, mat_vec(gb, xi)), w1, dist);

            let th = snap.theta.values()[k];
            let gth = [snap.grad_theta.x[k], snap.grad_theta.y[k]];
            weight_transport.push(cell, dt_theta.values()[k] + dot(b, gth), w1, dist);
            theta_upper.push(cell, th, w1, dist);
            if w1 >= guard {
                let q = th.abs() / w1;
                if q < theta_lower {
                    theta_lower = q;
                    theta_lower_cell = Some(cell);
                }
            }
            if s != 0.0 {
                let chi = snap.chi.values()[k];
                if (chi == 1.0 && th >= 0.0) || (chi == 0.0 && th <= 0.0) {
                    sign_violations.push(cell);
                }
            }
            time_lipschitz = time_lipschitz.max(dxi[0].hypot(dxi[1]));
            for row in gb {
                for e in row {
                    grad_b_max = grad_b_max.max(e.abs());
                }
            }
            let delta = snap.delta;
            if (dist > delta && (xi[0] != 0.0 || xi[1] != 0.0))
                || (dist > 2.0 * delta && (b[0] != 0.0 || b[1] != 0.0))
            {
                support_leaks += 1;
            }
        }
    }
    let guard_bound = guard;
    conditions.push(transport.finish("transport", guard_bound));
    conditions.push(length.finish("length_transport", guard_bound * guard));
    conditions.push(velocity.finish("normal_velocity", guard_bound));
    conditions.push(stretch.finish("normal_stretch", guard_bound));
    conditions.push(weight_transport.finish("weight_transport", guard_bound));
    let upper = theta_upper.finish("weight_upper", guard_bound);
    conditions.push(ConditionResult {
        id: "weight_lower",
        measured_constant: theta_lower,
        max_residual: 0.0,
        argmax_cell: theta_lower_cell,
        passed: theta_lower > 0.0 && theta_lower.is_finite(),
    });
    conditions.push(upper);
    conditions.push(ConditionResult {
        id: "weight_sign",
        measured_constant: sign_violations.len() as f64,
        max_residual: 0.0,
        argmax_cell: sign_violations.first().copied(),
        passed: sign_violations.is_empty(),
    });

    // regularity surrogates
    conditions.push(ConditionResult {
        id: "time_lipschitz",
        measured_constant: time_lipschitz,
        max_residual: time_lipschitz * dt_probe,
        argmax_cell: None,
        passed: time_lipschitz.is_finite(),
    });
    let second = grid::jacobian(&VectorField::from_components(
        g,
        Layout::CellCentered,
        snap.grad_xi.xx.clone(),
        snap.grad_xi.yy.clone(),
    )?)?;
    let second_off = grid::jacobian(&VectorField::from_components(
        g,
        Layout::CellCentered,
        snap.grad_xi.xy.clone(),
        snap.grad_xi.yx.clone(),
    )?)?;
    let mut second_max: f64 = 0.0;
    let mut second_cell = None;
    for t in [&second, &second_off] {
        for (k, _) in t.xx.iter().enumerate() {
            let m = t.xx[k]
                .abs()
                .max(t.xy[k].abs())
                .max(t.yx[k].abs())
                .max(t.yy[k].abs());
            if m > second_max {
                second_max = m;
                second_cell = Some((k % n, k / n));
            }
        }
    }
    conditions.push(ConditionResult {
        id: "second_derivative",
        measured_constant: second_max,
        max_residual: second_max,
        argmax_cell: second_cell,
        passed: second_max.is_finite(),
    });
    conditions.push(ConditionResult {
        id: "velocity_lipschitz",
        measured_constant: grad_b_max,
        max_residual: grad_b_max,
        argmax_cell: None,
        passed: grad_b_max.is_finite(),
    });
    conditions.push(ConditionResult {
        id: "support",
        measured_constant: support_leaks as f64,
        max_residual: 0.0,
        argmax_cell: None,
        passed: support_leaks == 0,
    });

    Ok(ConditionReport {
        t: snap.t,
        h,
        conditions,
        sign_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use crate::reference::VelocityMode;

    fn setup(n: usize) -> (CircleReference, Grid2D) {
        (
            CircleReference::default(),
            Grid2D::new(n, Boundary::Dirichlet).unwrap(),
        )
    }

    #[test]
    fn profile_examples() {
        let p = default_profiles();
        assert_eq!((p.eta_bar)(0.0)[0], 1.0);
        assert_eq!((p.eta_bar)(0.0)[1], 0.0);
        assert_eq!((p.theta_bar)(0.0)[0], 0.0);
        assert_eq!((p.eta_tilde)(0.5)[0], 1.0);
        assert_eq!((p.theta_bar)(1.0)[0], -1.0);
        assert_eq!((p.theta_bar)(-1.0)[0], 1.0);
        for k in 1..=200 {
            let r = 0.2 * k as f64 / 200.0;
            let ratio = (1.0 - (p.eta_bar)(r)[0]) / (r * r);
            assert!((2.5..=3.5).contains(&ratio), "r {r} ratio {ratio}");
        }
    }

    #[test]
    fn profile_shape_properties() {
        let p = default_profiles();
        for k in -400..=400 {
            let r = k as f64 / 100.0;
            let [eb, _, _] = (p.eta_bar)(r);
            let [et, _] = (p.eta_tilde)(r);
            let [th, _] = (p.theta_bar)(r);
            assert!((0.0..=1.0).contains(&eb) && (0.0..=1.0).contains(&et));
            assert_eq!(eb, (p.eta_bar)(-r)[0]);
            assert_eq!(et, (p.eta_tilde)(-r)[0]);
            assert_eq!(th, -(p.theta_bar)(-r)[0]);
            if r.abs() >= 1.0 {
                assert_eq!(eb, 0.0);
                assert_eq!(th, -r.signum());
            }
            if r.abs() <= 1.0 {
                assert_eq!(et, 1.0);
                // c r <= |theta| <= C r with c = 1, C = 3/2
                assert!(th.abs() >= r.abs() - 1e-15 && th.abs() <= 1.5 * r.abs() + 1e-15);
            }
            if r.abs() >= 2.0 {
                assert_eq!(et, 0.0);
            }
            if r > 0.0 && r < 1.0 {
                assert!(th < 0.0);
            }
        }
    }

    #[test]
    fn profile_derivatives_match_finite_differences() {
        let p = default_profiles();
        let e = 1e-6;
        for k in 0..97 {
            // offset keeps samples off the profile junctions at |r| = 1, 2
            let r = -2.4 + 0.05 * k as f64 + 0.013;
            let fd = |f: &dyn Fn(f64) -> f64| (f(r + e) - f(r - e)) / (2.0 * e);
            assert!((fd(&|x| (p.eta_bar)(x)[0]) - (p.eta_bar)(r)[1]).abs() < 1e-6);
            assert!((fd(&|x| (p.eta_bar)(x)[1]) - (p.eta_bar)(r)[2]).abs() < 1e-5);
            assert!((fd(&|x| (p.eta_tilde)(x)[0]) - (p.eta_tilde)(r)[1]).abs() < 1e-6);
            assert!((fd(&|x| (p.theta_bar)(x)[0]) - (p.theta_bar)(r)[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn point_derivatives_match_finite_differences() {
        for v_mode in [
            VelocityMode::Zero,
            VelocityMode::Prescribed { amplitude: 0.1 },
        ] {
            let c = CircleReference::new([0.5, 0.5], 0.25, v_mode).unwrap();
            let p = default_profiles();
            let delta = 0.1;
            let t = 0.005;
            let e = 1e-6;
            for k in 0..60 {
                let a = 0.37 * k as f64;
                let rho = 0.06 + 0.3 * (k as f64 / 60.0);
                let x = [0.5 + rho * a.cos(), 0.5 + rho * a.sin()];
                let at = |x: [f64; 2], t: f64| evaluate_point(&c, &p, delta, x, t).unwrap();
                let base = at(x, t);
                for b in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[b] += e;
                    xm[b] -= e;
                    let (hi, lo) = (at(xp, t), at(xm, t));
                    for a in 0..2 {
                        let d_xi = (hi.xi[a] - lo.xi[a]) / (2.0 * e);
                        let d_b = (hi.b[a] - lo.b[a]) / (2.0 * e);
                        assert!((d_xi - base.grad_xi[a][b]).abs() < 1e-5);
                        assert!(
                            (d_b - base.grad_b[a][b]).abs() < 1e-4,
                            "{d_b} {}",
                            base.grad_b[a][b]
                        );
                    }
                    let d_div = (hi.div_xi - lo.div_xi) / (2.0 * e);
                    assert!((d_div - base.grad_div_xi[b]).abs() < 1e-3 * (1.0 + d_div.abs()));
                    let d_th = (hi.theta - lo.theta) / (2.0 * e);
                    assert!((d_th - base.grad_theta[b]).abs() < 1e-5);
                }
                assert!((base.grad_xi[0][0] + base.grad_xi[1][1] - base.div_xi).abs() < 1e-10);
                let (hi, lo) = (at(x, t + e), at(x, t - e));
                for a in 0..2 {
                    assert!(((hi.xi[a] - lo.xi[a]) / (2.0 * e) - base.dt_xi[a]).abs() < 1e-5);
                }
                assert!(((hi.theta - lo.theta) / (2.0 * e) - base.dt_theta).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn snapshot_structure() {
        let (c, g) = setup(128);
        let snap = build_calibration(&c, 0.0, 0.1, g, default_profiles()).unwrap();
        for k in 0..g.len() {
            let s = snap.s.values()[k];
            let xi = [snap.xi.x[k], snap.xi.y[k]];
            let b = [snap.b.x[k], snap.b.y[k]];
            let norm = xi[0].hypot(xi[1]);
            assert!(norm <= 1.0);
            if s.abs() > 0.1 {
                assert_eq!(xi, [0.0, 0.0]);
            }
            if s.abs() > 0.2 {
                assert_eq!(b, [0.0, 0.0]);
            }
            let th = snap.theta.values()[k];
            assert!((-1.0..=1.0).contains(&th));
            // xi parallel to the normal
            let [x, y] = g.center(k % 128, k / 128);
            let nrm = c.normal([x, y]).unwrap();
            assert!((xi[0] * nrm[1] - xi[1] * nrm[0]).abs() <= 1e-12);
            assert!(((xi[0] * nrm[0] + xi[1] * nrm[1]) - norm).abs() <= 1e-12);
        }
        // zero-velocity B on the interface has magnitude 1/R
        let snap = build_calibration(&c, 0.01, 0.1, g, default_profiles()).unwrap();
        let r = c.radius(0.01).unwrap();
        let p = evaluate_point(&c, &default_profiles(), 0.1, [0.5 + r, 0.5], 0.01).unwrap();
        assert!((p.b[0].hypot(p.b[1]) - 1.0 / r).abs() < 1e-12);
        assert!(
            snap.warnings.iter().all(|w| w.contains("4 delta")),
            "{:?}",
            snap.warnings
        );
    }

    #[test]
    fn weight_saturates_inside() {
        let (c, g) = setup(64);
        let snap = build_calibration(&c, 0.0, 0.125, g, default_profiles()).unwrap();
        // the cell nearest the center sits deeper than delta
        let k = g.idx(32, 32);
        assert_eq!(snap.theta.values()[k], -1.0);
        assert_eq!(snap.chi.values()[k], 1.0);
        assert!(!snap.warnings.is_empty());
    }

    #[test]
    fn build_rejects_impossible_tubes() {
        let (c, g) = setup(64);
        assert!(matches!(
            build_calibration(&c, 0.0, 0.2, g, default_profiles()),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_calibration(&c, 0.0, 0.01, g, default_profiles()),
            Err(Error::Config(_))
        ));
        assert!(build_calibration(&c, 0.2, 0.1, g, default_profiles()).is_err());
    }

    #[test]
    fn forward_difference_needs_later_snapshot() {
        let (c, g) = setup(64);
        let a = build_calibration(&c, 0.01, 0.1, g, default_profiles()).unwrap();
        assert!(matches!(
            a.forward_time_derivatives(&a),
            Err(Error::Usage(_))
        ));
    }

    fn report(n: usize, t: f64, delta: f64) -> ConditionReport {
        let (c, g) = setup(n);
        let dt = 1e-8;
        let a = build_calibration(&c, t, delta, g, default_profiles()).unwrap();
        let b = build_calibration(&c, t + dt, delta, g, default_profiles()).unwrap();
        validate_calibration(&a, &b, &c).unwrap()
    }

    #[test]
    fn conditions_hold_for_the_circle() {
        let rep = report(128, 0.005, 0.1);
        assert!(rep.all_passed(), "{rep:#?}");
        assert!(rep.get("coercivity").unwrap().measured_constant > 0.0);
        // transport of xi and theta is exact up to the time difference
        assert!(rep.get("transport").unwrap().max_residual < 1e-3);
        assert!(rep.get("weight_transport").unwrap().max_residual < 1e-3);
        assert!(rep.get("length_transport").unwrap().max_residual < 1e-3);
        let mut csv = Vec::new();
        rep.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("condition_id,measured_constant,max_residual,argmax_cell\n"));
        assert_eq!(text.lines().count(), rep.conditions.len() + 1);
    }

    #[test]
    fn interface_curvature_converges_at_second_order() {
        let errs: Vec<f64> = [128, 256, 512]
            .iter()
            .map(|&n| {
                report(n, 0.0, 0.125)
                    .get("interface_curvature")
                    .unwrap()
                    .max_residual
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.8, "orders from {errs:?}");
        }
        // Taylor bound 10 h^2 max|d^3 s| over the support of xi, where the
        // third partials of |x - c| peak at (2 / sqrt 3) / r^2 with r = R - delta
        let h = 1.0 / 256.0;
        let third = 2.0 / 3f64.sqrt() / (0.125f64 * 0.125);
        assert!(
            errs[1] <= 10.0 * h * h * third,
            "{} > {}",
            errs[1],
            10.0 * h * h * third
        );
    }

    #[test]
    fn interface_normal_error_is_small() {
        let rep = report(256, 0.0, 0.125);
        let h = 1.0 / 256.0;
        // |xi - n| = 1 - eta_bar(s / delta) <= 1 - (1 - h^2 / delta^2)^3 for |s| <= h
        let q = 1.0 - h * h / (0.125 * 0.125);
        let err = rep.get("interface_normal").unwrap().max_residual;
        assert!(err <= 1.0 - q * q * q + 1e-15);
        assert!(err > 0.5 * (1.0 - q * q * q));
    }

    #[test]
    fn time_lipschitz_bound() {
        let (c, g) = setup(64);
        let dt = 1e-3;
        let a = build_calibration(&c, 0.0, 0.1, g, default_profiles()).unwrap();
        let b = build_calibration(&c, dt, 0.1, g, default_profiles()).unwrap();
        let (dxi, _) = a.forward_time_derivatives(&b).unwrap();
        let exact = a.dt_xi_exact.max_abs();
        assert!(dxi.max_abs() <= 1.1 * exact + 1e-12);
        assert!(dxi.axpby(1.0, &a.dt_xi_exact, -1.0).max_abs() < 0.1 * exact);
    }
}
