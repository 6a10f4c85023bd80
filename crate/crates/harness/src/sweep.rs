//! Epsilon sweeps with the grid refined alongside `eps`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::RateTable;
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::run::{run_simulation, write_outputs, RunOutput};

pub const SWEEP_FILE: &str = "sweep.csv";

/// Velocity errors below `VELOCITY_FLOOR * eps` count as saturated.
pub const VELOCITY_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub n: usize,
    /// `‖c0 chi - psi‖_{L1}` at the end time.
    pub l1_final: f64,
    /// `E(0) + E_vol(0)`.
    pub initial_error: f64,
    /// `‖v_eps - v‖_{L2}` at the end time.
    pub l2_final: f64,
}

#[derive(Debug)]
pub struct SweepResult {
    /// One entry per requested `eps`, in request order.
    pub members: Vec<(f64, std::result::Result<RunOutput, String>)>,
    pub rows: Vec<SweepRow>,
    /// `None` when fewer than two members succeeded.
    pub l1: Option<RateTable>,
    pub initial: Option<RateTable>,
    pub l2_velocity: Option<RateTable>,
}

impl SweepResult {
    pub fn failures(&self) -> Vec<(f64, &str)> {
        self.members
            .iter()
            .filter_map(|(e, r)| r.as_ref().err().map(|m| (*e, m.as_str())))
            .collect()
    }
}

/// Parses `0.16,0.08,0.04`.
pub fn parse_eps_list(text: &str) -> Result<Vec<f64>> {
    let list: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| nsac_core::Error::Config(format!("eps list entry '{s}': {e}")).into())
        })
        .collect::<Result<_>>()?;
    check_eps_list(&list)?;
    Ok(list)
}

fn check_eps_list(list: &[f64]) -> Result<()> {
    if list.len() < 2 {
        return Err(
            nsac_core::Error::Config("a sweep needs at least two eps values".into()).into(),
        );
    }
    if list.windows(2).any(|w| !(w[1] < w[0])) || list.iter().any(|e| !(*e > 0.0)) {
        return Err(nsac_core::Error::Config(
            "eps values must be positive and strictly decreasing".into(),
        )
        .into());
    }
    Ok(())
}

/// Runs every `eps` (concurrently when `parallel`) and fits the three
/// rates. Results do not depend on `parallel`.
pub fn sweep_epsilon(cfg: &RunConfig, eps_list: &[f64], parallel: bool) -> Result<SweepResult> {
    check_eps_list(eps_list)?;
    let configs: Vec<RunConfig> = eps_list
        .iter()
        .map(|&e| RunConfig {
            output_dir: cfg.output_dir.as_ref().map(|d| member_dir(d, e)),
            ..cfg.for_eps(e)
        })
        .collect();
    let run = |c: &RunConfig| run_simulation(c).map_err(|e| e.to_string());
    let outcomes: Vec<std::result::Result<RunOutput, String>> = if parallel {
        configs.par_iter().map(run).collect()
    } else {
        configs.iter().map(run).collect()
    };
    let members: Vec<(f64, std::result::Result<RunOutput, String>)> =
        eps_list.iter().copied().zip(outcomes).collect();
    let rows: Vec<SweepRow> = members
        .iter()
        .filter_map(|(eps, r)| {
            r.as_ref().ok().map(|out| SweepRow {
                eps: *eps,
                n: out.config.n,
                l1_final: out.last().l1_err,
                initial_error: out.initial().e + out.initial().e_vol,
                l2_final: out.last().l2_vel,
            })
        })
        .collect();
    let (l1, initial, l2_velocity) = if rows.len() >= 2 {
        (
            Some(RateTable::fit(
                "L1_err",
                rows.iter().map(|r| (r.eps, r.l1_final)).collect(),
            )?),
            Some(RateTable::fit(
                "E0_plus_Evol0",
                rows.iter().map(|r| (r.eps, r.initial_error)).collect(),
            )?),
            Some(RateTable::fit_with_floor(
                "L2_vel",
                rows.iter().map(|r| (r.eps, r.l2_final)).collect(),
                |e| VELOCITY_FLOOR * e,
            )?),
        )
    } else {
        (None, None, None)
    };
    Ok(SweepResult {
        members,
        rows,
        l1,
        initial,
        l2_velocity,
    })
}

pub fn member_dir(root: &Path, eps: f64) -> PathBuf {
    root.join(format!("eps_{eps}"))
}

/// Writes `sweep.csv` and each member's outputs under `dir`.
pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    for (eps, r) in &result.members {
        if let Ok(out) = r {
            write_outputs(out, &member_dir(dir, *eps))?;
        }
    }
    let path = dir.join(SWEEP_FILE);
    let f = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
    let mut w = BufWriter::new(f);
    let body = (|| -> std::io::Result<()> {
        writeln!(w, "eps,n,status,L1_err,E0_plus_Evol0,L2_vel")?;
        for (eps, r) in &result.members {
            match r {
                Ok(_) => {
                    let row = result
                        .rows
                        .iter()
                        .find(|row| row.eps == *eps)
                        .expect("row of a successful run");
                    writeln!(
                        w,
                        "{eps},{},ok,{:e},{:e},{:e}",
                        row.n, row.l1_final, row.initial_error, row.l2_final
                    )?;
                }
                Err(msg) => writeln!(w, "{eps},,failed: {},,,", msg.replace(',', ";"))?,
            }
        }
        w.flush()
    })();
    body.map_err(|e| HarnessError::io(&path, e))
}

/// Reads `sweep.csv` back into rows; failed members are skipped.
pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 || f[2] != "ok" {
            continue;
        }
        let num = |s: &str| {
            s.parse::<f64>().map_err(|e| {
                HarnessError::from(nsac_core::Error::Input(format!(
                    "{}: '{s}': {e}",
                    path.display()
                )))
            })
        };
        rows.push(SweepRow {
            eps: num(f[0])?,
            n: num(f[1])? as usize,
            l1_final: num(f[3])?,
            initial_error: num(f[4])?,
            l2_final: num(f[5])?,
        });
    }
    Ok(rows)
}
