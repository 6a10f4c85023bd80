//! A single simulation with diagnostics at snapshot times.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nsac_core::calibration::{build_calibration, default_profiles, CalibrationSnapshot};
use nsac_core::dwell::DoubleWellSpec;
use nsac_core::functionals::{
    self, DiagnosticsRecord, TermList, BULK_ERROR_TERMS, RELATIVE_ENERGY_TERMS,
};
use nsac_core::reference::CircleReference;
use nsac_core::solver::{self, initialize_well_prepared, SimState, Solver};

use crate::analysis::measure_radius;
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};

/// Target number of snapshots when `snapshot_every` is unset.
pub const DEFAULT_SNAPSHOTS: usize = 50;
/// Rays used for the interface radius.
pub const RADIUS_RAYS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusSample {
    pub t: f64,
    pub measured: Option<f64>,
    pub exact: f64,
}

impl RadiusSample {
    pub fn error(&self) -> f64 {
        self.measured
            .map_or(f64::INFINITY, |m| (m - self.exact).abs())
    }
}

/// Per-step energy bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLedger {
    /// Largest `dE / (1 + E)` over all steps.
    pub max_relative_growth: f64,
    /// Steps where the dissipation check failed.
    pub violations: usize,
    /// `E(T) + ∫ (|∇v|^2 + eps |D_t phi|^2) - E(0)`; nonpositive for sharp dissipation.
    pub sharp_defect: f64,
    pub max_abs_phi: f64,
    pub max_divergence: f64,
}

/// Time-accumulated right-hand side of the relative energy inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityEcho {
    pub accumulated_rhs: f64,
    /// `E(T) - E(0) - accumulated_rhs`; the inequality asks for `<= tolerance`.
    pub defect: f64,
    pub tolerance: f64,
}

impl InequalityEcho {
    pub fn holds(&self) -> bool {
        self.defect <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub dt: f64,
    pub steps: usize,
    pub warnings: Vec<String>,
    pub records: Vec<DiagnosticsRecord>,
    pub relative_terms: Vec<TermList>,
    pub bulk_terms: Vec<TermList>,
    pub radii: Vec<RadiusSample>,
    pub energy: EnergyLedger,
    pub inequality: InequalityEcho,
    /// Largest `L1_err^2 / E_vol` over the snapshots.
    pub l1_bridge_constant: f64,
    /// Final state, for inspection.
    pub final_state: SimState,
}

impl RunOutput {
    pub fn initial(&self) -> &DiagnosticsRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &DiagnosticsRecord {
        self.records.last().expect("at least one record")
    }

    /// `(t, E + E_vol)` per snapshot.
    pub fn error_series(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, r.e + r.e_vol)).collect()
    }

    pub fn max_radius_error(&self) -> f64 {
        self.radii
            .iter()
            .map(RadiusSample::error)
            .fold(0.0, f64::max)
    }
}

fn snapshot_every(cfg: &RunConfig, steps: usize) -> usize {
    cfg.snapshot_every
        .unwrap_or_else(|| ((steps as f64 / DEFAULT_SNAPSHOTS as f64).round() as usize).max(1))
}

struct Probe<'a> {
    reference: &'a CircleReference,
    delta: f64,
    well: DoubleWellSpec,
    dt: f64,
}

impl Probe<'_> {
    fn calibrate(&self, state: &SimState) -> Result<(CalibrationSnapshot, CalibrationSnapshot)> {
        let grid = state.grid();
        let profiles = default_profiles();
        let now = build_calibration(self.reference, state.t, self.delta, grid, profiles)?;
        let next = build_calibration(
            self.reference,
            state.t + self.dt,
            self.delta,
            grid,
            profiles,
        )?;
        Ok((now, next))
    }

    fn record(
        &self,
        state: &SimState,
    ) -> Result<(DiagnosticsRecord, TermList, TermList, RadiusSample)> {
        let (now, next) = self.calibrate(state)?;
        let record = functionals::diagnostics(state, &now, &self.well)?;
        let rel = functionals::rhs_terms_relative_energy(state, &now, Some(&next), &self.well)?;
        let bulk = functionals::rhs_terms_bulk_error(state, &now, Some(&next), &self.well)?;
        let radius = RadiusSample {
            t: state.t,
            measured: measure_radius(
                &state.phi,
                self.reference.center,
                self.reference.wall_distance(),
                RADIUS_RAYS,
            ),
            exact: self.reference.radius(state.t)?,
        };
        Ok((record, rel, bulk, radius))
    }
}

/// Initializes well-prepared data, advances to `t_end` and evaluates the
/// diagnostics at every snapshot. Field dumps go to `output_dir` when
/// `dump_fields` is set.
pub fn run_simulation(cfg: &RunConfig) -> Result<RunOutput> {
    let warnings = cfg.validate()?;
    let reference = cfg.reference()?;
    let grid = cfg.grid()?;
    let well = DoubleWellSpec::quartic();
    let (sc, steps) = cfg.solver_config()?;
    let every = snapshot_every(cfg, steps);
    let dump_dir = match (&cfg.output_dir, cfg.dump_fields) {
        (Some(dir), true) => Some(dir.join("fields")),
        _ => None,
    };
    if let Some(dir) = &dump_dir {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }

    let mut state = initialize_well_prepared(&reference, cfg.eps, grid, &well)?;
    let mut solver = Solver::new(sc, grid, cfg.eps, well)?;
    let probe = Probe {
        reference: &reference,
        delta: cfg.delta,
        well,
        dt: sc.dt,
    };

    let mut records = Vec::new();
    let mut relative_terms = Vec::new();
    let mut bulk_terms = Vec::new();
    let mut radii = Vec::new();
    let mut take = |state: &SimState, step: usize| -> Result<()> {
        let (r, rel, bulk, rad) = probe.record(state).map_err(|e| match e {
            HarnessError::Core(c) => HarnessError::at_step(step, c),
            other => other,
        })?;
        records.push(r);
        relative_terms.push(rel);
        bulk_terms.push(bulk);
        radii.push(rad);
        if let Some(dir) = &dump_dir {
            dump(dir, step, state)?;
        }
        Ok(())
    };
    take(&state, 0)?;

    let e0 = solver::total_energy(&state, &well);
    let mut energy = EnergyLedger {
        max_relative_growth: f64::NEG_INFINITY,
        violations: 0,
        sharp_defect: 0.0,
        max_abs_phi: state.phi.max_abs(),
        max_divergence: 0.0,
    };
    let mut dissipated = 0.0;
    let mut e_prev = e0;
    for step in 1..=steps {
        let prev = state.clone();
        let info = solver
            .step(&mut state)
            .map_err(|e| HarnessError::at_step(step, e))?;
        state.t = step as f64 * sc.dt;
        let e = solver::total_energy(&state, &well);
        let growth = (e - e_prev) / (1.0 + e_prev);
        energy.max_relative_growth = energy.max_relative_growth.max(growth);
        if growth > sc.scheme.energy_tolerance() {
            energy.violations += 1;
        }
        let (visc, material) = solver::dissipation_rates(&prev, &state, sc.dt);
        dissipated += sc.dt * (visc + material);
        energy.max_abs_phi = energy.max_abs_phi.max(info.phi_max);
        energy.max_divergence = energy.max_divergence.max(info.divergence_max);
        e_prev = e;
        if step % every == 0 || step == steps {
            take(&state, step)?;
        }
    }
    if steps == 0 {
        energy.max_relative_growth = 0.0;
    }
    energy.sharp_defect = e_prev + dissipated - e0;

    let mut accumulated = 0.0;
    for k in 1..records.len() {
        let dt = records[k].t - records[k - 1].t;
        accumulated += 0.5 * dt * (relative_terms[k].sum() + relative_terms[k - 1].sum());
    }
    let e_start = records[0].e;
    let e_end = records.last().unwrap().e;
    let inequality = InequalityEcho {
        accumulated_rhs: accumulated,
        defect: e_end - e_start - accumulated,
        tolerance: 1e-3 * (1.0 + e_start),
    };
    let l1_bridge_constant = records
        .iter()
        .map(|r| {
            if r.e_vol > 0.0 {
                r.l1_err * r.l1_err / r.e_vol
            } else if r.l1_err == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);

    Ok(RunOutput {
        config: cfg.clone(),
        dt: sc.dt,
        steps,
        warnings,
        records,
        relative_terms,
        bulk_terms,
        radii,
        energy,
        inequality,
        l1_bridge_constant,
        final_state: state,
    })
}

fn dump(dir: &Path, step: usize, state: &SimState) -> Result<()> {
    let phi_path = dir.join(format!("phi_{step:07}.csv"));
    let f = File::create(&phi_path).map_err(|e| HarnessError::io(&phi_path, e))?;
    state
        .phi
        .write_csv(BufWriter::new(f))
        .map_err(|e| HarnessError::io(&phi_path, e))?;
    let v_path = dir.join(format!("v_{step:07}.csv"));
    let f = File::create(&v_path).map_err(|e| HarnessError::io(&v_path, e))?;
    state
        .v
        .write_csv(BufWriter::new(f))
        .map_err(|e| HarnessError::io(&v_path, e))?;
    Ok(())
}

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const TERMS_FILE: &str = "terms.csv";
pub const RADIUS_FILE: &str = "radius.csv";
pub const RUN_SUMMARY_FILE: &str = "run.txt";

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(f);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| HarnessError::io(path, e))
}

/// Writes the diagnostics, term lists, radius samples and a key = value
/// summary into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_file(&dir.join(DIAGNOSTICS_FILE), |w| {
        functionals::write_diagnostics_csv(&out.records, w)
    })?;
    write_file(&dir.join(TERMS_FILE), |w| {
        let names: Vec<&str> = RELATIVE_ENERGY_TERMS
            .iter()
            .chain(BULK_ERROR_TERMS.iter())
            .copied()
            .collect();
        writeln!(w, "t,{}", names.join(","))?;
        for ((r, rel), bulk) in out
            .records
            .iter()
            .zip(&out.relative_terms)
            .zip(&out.bulk_terms)
        {
            let vals: Vec<String> = rel
                .terms
                .iter()
                .chain(&bulk.terms)
                .map(|t| format!("{:e}", t.value))
                .collect();
            writeln!(w, "{:e},{}", r.t, vals.join(","))?;
        }
        Ok(())
    })?;
    write_file(&dir.join(RADIUS_FILE), |w| {
        writeln!(w, "t,measured,exact")?;
        for r in &out.radii {
            let m = r.measured.map_or("nan".to_string(), |m| format!("{m:e}"));
            writeln!(w, "{:e},{m},{:e}", r.t, r.exact)?;
        }
        Ok(())
    })?;
    write_file(&dir.join(RUN_SUMMARY_FILE), |w| {
        writeln!(w, "{}", out.config.to_text().trim_end())?;
        writeln!(w, "dt = {:e}", out.dt)?;
        writeln!(w, "steps = {}", out.steps)?;
        writeln!(w, "max_radius_error = {:e}", out.max_radius_error())?;
        writeln!(
            w,
            "max_relative_energy_growth = {:e}",
            out.energy.max_relative_growth
        )?;
        writeln!(w, "energy_violations = {}", out.energy.violations)?;
        writeln!(
            w,
            "sharp_dissipation_defect = {:e}",
            out.energy.sharp_defect
        )?;
        writeln!(w, "max_abs_phi = {:e}", out.energy.max_abs_phi)?;
        writeln!(w, "max_divergence = {:e}", out.energy.max_divergence)?;
        writeln!(
            w,
            "relative_inequality_defect = {:e}",
            out.inequality.defect
        )?;
        writeln!(
            w,
            "relative_inequality_tolerance = {:e}",
            out.inequality.tolerance
        )?;
        writeln!(w, "l1_bridge_constant = {:e}", out.l1_bridge_constant)?;
        for m in &out.warnings {
            writeln!(w, "# warning: {m}")?;
        }
        Ok(())
    })
}
