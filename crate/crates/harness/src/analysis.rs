//! Post-processing: log-log rate fits, exponential envelopes and the
//! interface radius.

use nsac_core::grid::ScalarField;
use nsac_core::Error;

use crate::error::Result;

/// `(eps, value)` rows with a least-squares slope of `log value` against `log eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub quantity: String,
    pub rows: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Every value sits below the saturation floor, so the slope carries no
    /// information.
    pub saturated: bool,
}

impl RateTable {
    /// Fits `value ≈ exp(intercept) eps^slope`. Rows must have strictly
    /// decreasing `eps` and positive values.
    pub fn fit(quantity: &str, rows: Vec<(f64, f64)>) -> Result<Self> {
        Self::fit_with_floor(quantity, rows, |_| 0.0)
    }

    /// Like [`Self::fit`], additionally marking the table saturated when
    /// every value is at or below `floor(eps)`. A saturated table may hold
    /// zeros, which are then left out of the fit.
    pub fn fit_with_floor(
        quantity: &str,
        rows: Vec<(f64, f64)>,
        floor: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Input(format!("{quantity}: a rate needs at least 2 rows")).into());
        }
        if rows.windows(2).any(|w| !(w[1].0 < w[0].0)) || rows.iter().any(|r| !(r.0 > 0.0)) {
            return Err(Error::Input(format!(
                "{quantity}: eps must be positive and strictly decreasing"
            ))
            .into());
        }
        let saturated = rows.iter().all(|&(e, v)| v.abs() <= floor(e));
        let usable: Vec<(f64, f64)> = rows
            .iter()
            .copied()
            .filter(|r| r.1 > 0.0 && r.1.is_finite())
            .collect();
        if usable.len() < rows.len() && !saturated {
            return Err(
                Error::Input(format!("{quantity}: values must be positive and finite")).into(),
            );
        }
        let (slope, intercept, r2) = if usable.len() >= 2 {
            least_squares(&usable)
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        };
        Ok(Self {
            quantity: quantity.to_string(),
            rows,
            slope,
            intercept,
            r2,
            saturated,
        })
    }

    pub fn predict(&self, eps: f64) -> f64 {
        (self.intercept + self.slope * eps.ln()).exp()
    }
}

fn least_squares(rows: &[(f64, f64)]) -> (f64, f64, f64) {
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(e, v)| (e.ln(), v.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    (slope, intercept, r2)
}

/// Tightest `exp(C t)` envelope of an error trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct GronwallFit {
    pub c_hat: f64,
    /// `exp(c_hat t) y(0) - y(t)` per sample, in input order.
    pub defects: Vec<(f64, f64)>,
    /// Smallest defect over all samples; negative means the envelope fails.
    pub min_defect: f64,
    pub max_violation: f64,
}

/// `c_hat = max (1/t) log(y(t) / y(0))` over samples with `t >= 10 dt`,
/// clipped below at zero.
pub fn gronwall_fit(series: &[(f64, f64)], dt: f64) -> Result<GronwallFit> {
    let (t0, y0) = *series
        .first()
        .ok_or_else(|| Error::Input("empty series".into()))?;
    if !(y0 > 0.0) {
        return Err(Error::Input(format!(
            "initial error {y0} is not positive; the exponential envelope is degenerate, report the absolute error instead"
        ))
        .into());
    }
    let guard = t0 + 10.0 * dt;
    let mut c_hat: f64 = 0.0;
    for &(t, y) in series {
        if t >= guard && t > t0 && y > 0.0 {
            c_hat = c_hat.max((y / y0).ln() / (t - t0));
        }
    }
    let defects: Vec<(f64, f64)> = series
        .iter()
        .map(|&(t, y)| (t, (c_hat * (t - t0)).exp() * y0 - y))
        .collect();
    let min_defect = defects.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
    let max_violation = defects
        .iter()
        .filter(|d| d.0 >= guard)
        .map(|d| (-d.1).max(0.0))
        .fold(0.0, f64::max);
    Ok(GronwallFit {
        c_hat,
        defects,
        min_defect,
        max_violation,
    })
}

/// Bilinear interpolation of cell-centered values, clamped to the outer
/// cell centers.
pub fn sample(phi: &ScalarField, x: [f64; 2]) -> f64 {
    let g = phi.grid();
    let n = g.n();
    let h = g.h();
    let locate = |c: f64| {
        let f = (c / h - 0.5).clamp(0.0, (n - 1) as f64);
        let i = (f.floor() as usize).min(n - 2);
        (i, f - i as f64)
    };
    let (i, a) = locate(x[0]);
    let (j, b) = locate(x[1]);
    let p = |i, j| phi.at(i, j);
    (1.0 - a) * (1.0 - b) * p(i, j)
        + a * (1.0 - b) * p(i + 1, j)
        + (1.0 - a) * b * p(i, j + 1)
        + a * b * p(i + 1, j + 1)
}

/// Mean radius of the zero level set of `phi` seen from `center`, over
/// `rays` equally spaced directions. `None` if some ray finds no crossing.
pub fn measure_radius(
    phi: &ScalarField,
    center: [f64; 2],
    max_radius: f64,
    rays: usize,
) -> Option<f64> {
    let h = phi.grid().h();
    let step = 0.25 * h;
    let mut total = 0.0;
    for k in 0..rays {
        let angle = std::f64::consts::TAU * k as f64 / rays as f64;
        let dir = [angle.cos(), angle.sin()];
        let at = |r: f64| sample(phi, [center[0] + r * dir[0], center[1] + r * dir[1]]);
        let mut r = 0.0;
        let mut prev = at(0.0);
        if prev <= 0.0 {
            return None;
        }
        let mut found = None;
        while r + step <= max_radius {
            let next = at(r + step);
            if next <= 0.0 {
                found = Some(r + step * prev / (prev - next));
                break;
            }
            r += step;
            prev = next;
        }
        total += found?;
    }
    Some(total / rays as f64)
}
