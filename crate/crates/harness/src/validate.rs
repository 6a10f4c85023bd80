//! Calibration checks on the configured grid and under refinement.

use nsac_core::calibration::{
    build_calibration, default_profiles, validate_calibration, ConditionReport,
};
use nsac_core::grid::Grid2D;

use crate::config::RunConfig;
use crate::error::Result;

/// Time offset of the second snapshot used for time differences.
pub const TIME_PROBE: f64 = 1e-9;

pub const CONDITIONS_FILE: &str = "conditions.csv";

/// Validates the calibration of `cfg` on an `n`-grid at time `t`.
pub fn check_calibration(cfg: &RunConfig, n: usize, t: f64) -> Result<ConditionReport> {
    let reference = cfg.reference()?;
    let grid = Grid2D::new(n, cfg.bc)?;
    let profiles = default_profiles();
    let snap = build_calibration(&reference, t, cfg.delta, grid, profiles)?;
    let next = build_calibration(&reference, t + TIME_PROBE, cfg.delta, grid, profiles)?;
    Ok(validate_calibration(&snap, &next, &reference)?)
}

/// Residuals of the interface conditions over a refinement sequence.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub reports: Vec<(usize, ConditionReport)>,
    /// Observed order between consecutive grids, per interface condition.
    pub normal_orders: Vec<f64>,
    pub curvature_orders: Vec<f64>,
}

impl Refinement {
    pub fn min_order(&self) -> f64 {
        self.normal_orders
            .iter()
            .chain(&self.curvature_orders)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn orders(reports: &[(usize, ConditionReport)], id: &str) -> Vec<f64> {
    reports
        .windows(2)
        .map(|w| {
            let a = w[0].1.get(id).map_or(f64::NAN, |c| c.max_residual);
            let b = w[1].1.get(id).map_or(f64::NAN, |c| c.max_residual);
            (a / b).ln() / (w[1].0 as f64 / w[0].0 as f64).ln()
        })
        .collect()
}

pub fn refinement_study(cfg: &RunConfig, sizes: &[usize], t: f64) -> Result<Refinement> {
    let reports = sizes
        .iter()
        .map(|&n| check_calibration(cfg, n, t).map(|r| (n, r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Refinement {
        normal_orders: orders(&reports, "interface_normal"),
        curvature_orders: orders(&reports, "interface_curvature"),
        reports,
    })
}
