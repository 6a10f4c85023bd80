//! Summary CSV and self-contained SVG plots from a run or sweep directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nsac_core::functionals::DiagnosticsRecord;

use crate::analysis::{gronwall_fit, GronwallFit, RateTable};
use crate::error::{HarnessError, Result};
use crate::run::{DIAGNOSTICS_FILE, RUN_SUMMARY_FILE};
use crate::sweep::{member_dir, read_sweep, SWEEP_FILE, VELOCITY_FLOOR};

pub const SUMMARY_FILE: &str = "summary.csv";

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Coordinate transform from data to the plot box.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for (x, y) in points.filter(|p| p.0.is_finite() && p.1.is_finite()) {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |a: f64, b: f64| {
            if b > a {
                ((b - a) * 0.05, 0.0)
            } else {
                (0.5 * a.abs().max(1.0), 0.0)
            }
        };
        let (px, _) = pad(x0, x1);
        let (py, _) = pad(y0, y1);
        Self {
            x: (x0 - px, x1 + px),
            y: (y0 - py, y1 + py),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn svg_open(title: &str, xlabel: &str, ylabel: &str, frame: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{title}</text>"#,
        WIDTH / 2.0
    );
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<rect class="axes" x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{xlabel}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {})">{ylabel}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (v, anchor, x, y) in [
        (frame.x.0, "start", l, b + 16.0),
        (frame.x.1, "end", r, b + 16.0),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="10">{v:.3e}</text>"#
        );
    }
    for (v, y) in [(frame.y.0, b), (frame.y.1, t + 10.0)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" text-anchor="end" font-size="10">{v:.3e}</text>"#,
            l - 4.0
        );
    }
    s
}

/// Line plot of several `(x, y)` series on linear axes.
pub fn line_plot(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(&str, Vec<(f64, f64)>)],
) -> String {
    let frame = Frame::new(series.iter().flat_map(|s| s.1.iter().copied()));
    let mut s = svg_open(title, xlabel, ylabel, &frame);
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = pts
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text class="legend" x="{}" y="{}" font-size="12" fill="{color}">{name}</text>"#,
            WIDTH - MARGIN - 110.0,
            MARGIN + 16.0 * (k as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Log-log plot of a rate table: one marker per row and the fitted line.
pub fn rate_plot(table: &RateTable) -> String {
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.0 > 0.0 && r.1 > 0.0)
        .map(|r| (r.0.log10(), r.1.log10()))
        .collect();
    let frame = Frame::new(pts.iter().copied());
    let title = format!(
        "{}: slope {:.3} (r2 {:.3})",
        table.quantity, table.slope, table.r2
    );
    let mut s = svg_open(
        &title,
        "log10 eps",
        &format!("log10 {}", table.quantity),
        &frame,
    );
    for &(x, y) in &pts {
        let _ = writeln!(
            s,
            r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"#,
            frame.px(x),
            frame.py(y),
            COLORS[0]
        );
    }
    if table.slope.is_finite() && pts.len() >= 2 {
        let (x0, x1) = (
            pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
            pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
        );
        let fit = |x: f64| {
            (table.intercept + table.slope * x * std::f64::consts::LN_10) / std::f64::consts::LN_10
        };
        let _ = writeln!(
            s,
            r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-dasharray="6 3"/>"#,
            frame.px(x0),
            frame.py(fit(x0)),
            frame.px(x1),
            frame.py(fit(x1)),
            COLORS[1]
        );
    }
    s.push_str("</svg>\n");
    s
}

fn write(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    written.push(path);
    Ok(())
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == DiagnosticsRecord::HEADER => {}
        _ => {
            return Err(HarnessError::MissingInput(format!(
                "{} does not start with the diagnostics header",
                path.display()
            )))
        }
    }
    let records = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| DiagnosticsRecord::parse_csv_row(l).map_err(HarnessError::from))
        .collect::<Result<Vec<_>>>()?;
    if records.is_empty() {
        return Err(HarnessError::MissingInput(format!(
            "{} holds no records",
            path.display()
        )));
    }
    Ok(records)
}

/// `dt` recorded in a run summary, if present.
fn read_dt(dir: &Path) -> Option<f64> {
    let text = fs::read_to_string(dir.join(RUN_SUMMARY_FILE)).ok()?;
    text.lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "dt")
        .and_then(|(_, v)| v.trim().parse().ok())
}

fn fit_run(dir: &Path, records: &[DiagnosticsRecord]) -> Option<GronwallFit> {
    let series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.e + r.e_vol)).collect();
    gronwall_fit(&series, read_dt(dir).unwrap_or(0.0)).ok()
}

fn fmt_fit(fit: &Option<GronwallFit>) -> (String, String) {
    match fit {
        Some(f) => (format!("{:e}", f.c_hat), format!("{:e}", f.min_defect)),
        None => ("nan".into(), "nan".into()),
    }
}

/// Reads a run directory (with `diagnostics.csv`) or a sweep directory
/// (with `sweep.csv`) and writes `summary.csv` plus SVG plots. Returns the
/// written paths.
pub fn render_report(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let sweep = dir.join(SWEEP_FILE);
    let single = dir.join(DIAGNOSTICS_FILE);
    if sweep.exists() {
        let rows = read_sweep(&sweep)?;
        let tables = [
            RateTable::fit("L1_err", rows.iter().map(|r| (r.eps, r.l1_final)).collect())?,
            RateTable::fit(
                "E0_plus_Evol0",
                rows.iter().map(|r| (r.eps, r.initial_error)).collect(),
            )?,
            RateTable::fit_with_floor(
                "L2_vel",
                rows.iter().map(|r| (r.eps, r.l2_final)).collect(),
                |e| VELOCITY_FLOOR * e,
            )?,
        ];
        let mut summary = String::from("kind,name,eps,value,slope,r2,saturated,c_hat,min_defect\n");
        for t in &tables {
            let _ = writeln!(
                summary,
                "rate,{},,,{:e},{:e},{},,",
                t.quantity, t.slope, t.r2, t.saturated
            );
        }
        for r in &rows {
            let member = member_dir(dir, r.eps);
            let fit = read_diagnostics(&member.join(DIAGNOSTICS_FILE))
                .ok()
                .and_then(|recs| fit_run(&member, &recs));
            let (c, d) = fmt_fit(&fit);
            let _ = writeln!(
                summary,
                "gronwall,run,{},{:e},,,,{c},{d}",
                r.eps, r.initial_error
            );
        }
        write(dir.join(SUMMARY_FILE), &summary, &mut written)?;
        for t in &tables {
            write(
                dir.join(format!("rate_{}.svg", t.quantity)),
                &rate_plot(t),
                &mut written,
            )?;
        }
        return Ok(written);
    }
    if !single.exists() {
        return Err(HarnessError::MissingInput(format!(
            "{} contains neither {DIAGNOSTICS_FILE} (single run) nor {SWEEP_FILE} (sweep)",
            dir.display()
        )));
    }
    let records = read_diagnostics(&single)?;
    let fit = fit_run(dir, &records);
    let last = records.last().unwrap();
    let first = &records[0];
    let (c, d) = fmt_fit(&fit);
    let mut summary = String::from("quantity,value\n");
    for (k, v) in [
        ("t_end", format!("{:e}", last.t)),
        ("E_0", format!("{:e}", first.e)),
        ("E_vol_0", format!("{:e}", first.e_vol)),
        ("E_end", format!("{:e}", last.e)),
        ("E_vol_end", format!("{:e}", last.e_vol)),
        ("L1_err_end", format!("{:e}", last.l1_err)),
        ("L2_vel_end", format!("{:e}", last.l2_vel)),
        ("c_hat", c),
        ("min_envelope_defect", d),
    ] {
        let _ = writeln!(summary, "{k},{v}");
    }
    write(dir.join(SUMMARY_FILE), &summary, &mut written)?;
    let col =
        |f: fn(&DiagnosticsRecord) -> f64| records.iter().map(|r| (r.t, f(r))).collect::<Vec<_>>();
    write(
        dir.join("energy.svg"),
        &line_plot(
            "Energies",
            "t",
            "energy",
            &[
                ("E", col(|r| r.e)),
                ("E_vol", col(|r| r.e_vol)),
                ("E_total", col(|r| r.e_total)),
            ],
        ),
        &mut written,
    )?;
    write(
        dir.join("errors.svg"),
        &line_plot(
            "Errors",
            "t",
            "norm",
            &[("L1_err", col(|r| r.l1_err)), ("L2_vel", col(|r| r.l2_vel))],
        ),
        &mut written,
    )?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_plot_structure() {
        let t = RateTable::fit("q", vec![(0.16, 1.0), (0.08, 0.5), (0.04, 0.26)]).unwrap();
        let svg = rate_plot(&t);
        assert_eq!(svg.matches(r#"class="marker""#).count(), 3);
        assert_eq!(svg.matches(r#"class="fit""#).count(), 1);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn line_plot_handles_constant_series() {
        let svg = line_plot("t", "x", "y", &[("a", vec![(0.0, 1.0), (1.0, 1.0)])]);
        assert!(!svg.contains("NaN") && svg.contains("polyline"));
    }

    #[test]
    fn empty_directory_names_expected_file() {
        let dir = tempfile::tempdir().unwrap();
        let err = render_report(dir.path()).unwrap_err();
        assert!(err.to_string().contains(DIAGNOSTICS_FILE), "{err}");
    }
}
