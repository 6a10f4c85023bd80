use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nsac_harness::analysis::gronwall_fit;
use nsac_harness::error::{HarnessError, Result};
use nsac_harness::report::render_report;
use nsac_harness::run::{run_simulation, write_outputs};
use nsac_harness::sweep::{parse_eps_list, sweep_epsilon, write_sweep};
use nsac_harness::validate::{check_calibration, CONDITIONS_FILE};
use nsac_harness::RunConfig;

#[derive(Parser)]
#[command(
    name = "nsac",
    about = "Diffuse-interface Navier-Stokes/Allen-Cahn experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its diagnostics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Exit with status 4 if the circle law or energy checks fail.
        #[arg(long)]
        assert: bool,
    },
    /// Run the configuration for several eps and fit convergence rates.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma separated, strictly decreasing.
        #[arg(long, default_value = "0.16,0.08,0.04")]
        eps: String,
        #[arg(long)]
        out: PathBuf,
        /// Run members one after another instead of concurrently.
        #[arg(long)]
        serial: bool,
        /// Exit with status 4 if a fitted rate is outside its expected range.
        #[arg(long)]
        assert: bool,
    },
    /// Measure the defining conditions of the calibration fields.
    ValidateCalibration {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Time at which the calibration is built.
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long)]
        assert: bool,
    },
    /// Render summary.csv and SVG plots for a run or sweep directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn check(failures: &mut Vec<String>, ok: bool, what: String) {
    println!("{} {what}", if ok { "ok  " } else { "FAIL" });
    if !ok {
        failures.push(what);
    }
}

fn finish(assert: bool, failures: Vec<String>) -> Result<()> {
    if assert && !failures.is_empty() {
        return Err(HarnessError::Assertion(failures.join("; ")));
    }
    Ok(())
}

fn simulate(config: &Path, out: &Path, assert: bool) -> Result<()> {
    let mut cfg = RunConfig::from_file(config)?;
    cfg.output_dir = Some(out.to_path_buf());
    let run = run_simulation(&cfg)?;
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    write_outputs(&run, out)?;
    println!("steps {} dt {:e}", run.steps, run.dt);
    let last = run.last();
    println!(
        "t_end {:e} E {:e} E_vol {:e} L1_err {:e} L2_vel {:e}",
        last.t, last.e, last.e_vol, last.l1_err, last.l2_vel
    );
    let mut failures = Vec::new();
    if !cfg.reference()?.is_synthetic() {
        let err = run.max_radius_error();
        check(
            &mut failures,
            err <= 3.0 * cfg.eps,
            format!("radius error {err:e} <= 3 eps"),
        );
    }
    check(
        &mut failures,
        run.energy.violations == 0,
        format!(
            "energy growth {:e} per step within tolerance",
            run.energy.max_relative_growth
        ),
    );
    check(
        &mut failures,
        run.energy.max_abs_phi <= 1.0 + 1e-3,
        format!("max |phi| = {}", run.energy.max_abs_phi),
    );
    match gronwall_fit(&run.error_series(), run.dt) {
        Ok(fit) => check(
            &mut failures,
            fit.min_defect >= -1e-12,
            format!(
                "envelope C_hat = {:e}, smallest defect {:e}",
                fit.c_hat, fit.min_defect
            ),
        ),
        Err(e) => println!("envelope not fitted: {e}"),
    }
    println!(
        "relative energy inequality defect {:e} (tolerance {:e})",
        run.inequality.defect, run.inequality.tolerance
    );
    finish(assert, failures)
}

fn sweep(config: &Path, eps: &str, out: &Path, serial: bool, assert: bool) -> Result<()> {
    let mut cfg = RunConfig::from_file(config)?;
    cfg.output_dir = Some(out.to_path_buf());
    let list = parse_eps_list(eps)?;
    let result = sweep_epsilon(&cfg, &list, !serial)?;
    write_sweep(&result, out)?;
    let mut failures = Vec::new();
    for (e, msg) in result.failures() {
        check(
            &mut failures,
            false,
            format!("member eps = {e} failed: {msg}"),
        );
    }
    if let (Some(l1), Some(init), Some(l2)) = (&result.l1, &result.initial, &result.l2_velocity) {
        check(
            &mut failures,
            (0.8..=1.3).contains(&l1.slope) && l1.r2 >= 0.95,
            format!("L1 slope {:.3} (r2 {:.3}) in [0.8, 1.3]", l1.slope, l1.r2),
        );
        check(
            &mut failures,
            (1.7..=2.3).contains(&init.slope),
            format!("initial error slope {:.3} in [1.7, 2.3]", init.slope),
        );
        check(
            &mut failures,
            l2.saturated || l2.slope >= 0.8,
            format!(
                "L2 velocity slope {:.3} >= 0.8 (saturated: {})",
                l2.slope, l2.saturated
            ),
        );
    }
    finish(assert, failures)
}

fn validate(config: &Path, out: &Path, t: f64, assert: bool) -> Result<()> {
    let cfg = RunConfig::from_file(config)?;
    let report = check_calibration(&cfg, cfg.n, t)?;
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let path = out.join(CONDITIONS_FILE);
    let f = fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
    report
        .write_csv(std::io::BufWriter::new(f))
        .map_err(|e| HarnessError::io(&path, e))?;
    let mut failures = Vec::new();
    for c in &report.conditions {
        check(
            &mut failures,
            c.passed,
            format!(
                "{} constant {:e} residual {:e}",
                c.id, c.measured_constant, c.max_residual
            ),
        );
    }
    finish(assert, failures)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate {
            config,
            out,
            assert,
        } => simulate(config, out, *assert),
        Command::Sweep {
            config,
            eps,
            out,
            serial,
            assert,
        } => sweep(config, eps, out, *serial, *assert),
        Command::ValidateCalibration {
            config,
            out,
            t,
            assert,
        } => validate(config, out, *t, *assert),
        Command::Report { input } => render_report(input).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
