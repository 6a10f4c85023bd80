//! Line-oriented `key = value` run configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use nsac_core::grid::{Boundary, Grid2D};
use nsac_core::reference::{CircleReference, VelocityMode};
use nsac_core::solver::{CapillaryForm, PressureMethod, Scheme, SolverConfig};
use nsac_core::Error;

use crate::error::{HarnessError, Result};

/// Latest admissible horizon as a fraction of the extinction time.
pub const MAX_HORIZON_FRACTION: f64 = 0.8;
/// Horizon used when `t_end` is not given.
pub const DEFAULT_HORIZON_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub eps: f64,
    pub cfl_c1: f64,
    pub cfl_c2: f64,
    /// Absolute end time; half the extinction time when unset.
    pub t_end: Option<f64>,
    pub r0: f64,
    pub center: [f64; 2],
    pub delta: f64,
    pub bc: Boundary,
    pub scheme: Scheme,
    /// Steps between diagnostics; about fifty snapshots per run when unset.
    pub snapshot_every: Option<usize>,
    pub output_dir: Option<PathBuf>,
    /// Seed for randomized checks only. Runs themselves are deterministic.
    pub seed: u64,
    /// Sweeps set `n` from `h = eps / h_over_eps`.
    pub h_over_eps: f64,
    pub v_mode: VelocityMode,
    pub poisson_tol: f64,
    pub pressure: PressureMethod,
    pub capillary_form: CapillaryForm,
    pub dump_fields: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 128,
            eps: 0.04,
            cfl_c1: 0.2,
            cfl_c2: 0.4,
            t_end: None,
            r0: 0.25,
            center: [0.5, 0.5],
            delta: 0.125,
            bc: Boundary::Dirichlet,
            scheme: Scheme::ConvexSplit,
            snapshot_every: None,
            output_dir: None,
            seed: 0,
            h_over_eps: 4.0,
            v_mode: VelocityMode::Zero,
            poisson_tol: 1e-10,
            pressure: PressureMethod::Spectral,
            capillary_form: CapillaryForm::Potential,
            dump_fields: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::Config(format!("{key}: cannot parse '{value}': {e}")).into())
}

fn parse_center(value: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::Config(format!("center: expected 'x,y', got '{value}'")).into());
    }
    Ok([parse("center", parts[0])?, parse("center", parts[1])?])
}

impl RunConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse_str(&text)
    }

    /// Sets one field by its config key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "cfl_c1" => self.cfl_c1 = parse(key, value)?,
            "cfl_c2" => self.cfl_c2 = parse(key, value)?,
            "t_end" => self.t_end = Some(parse(key, value)?),
            "r0" => self.r0 = parse(key, value)?,
            "center" => self.center = parse_center(value)?,
            "delta" => self.delta = parse(key, value)?,
            "bc" => self.bc = value.parse()?,
            "scheme" => self.scheme = value.parse()?,
            "snapshot_every" => {
                let k: usize = parse(key, value)?;
                if k == 0 {
                    return Err(Error::Config("snapshot_every must be at least 1".into()).into());
                }
                self.snapshot_every = Some(k);
            }
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "seed" => self.seed = parse(key, value)?,
            "h_over_eps" => self.h_over_eps = parse(key, value)?,
            "v_mode" => self.v_mode = value.parse()?,
            "poisson_tol" => self.poisson_tol = parse(key, value)?,
            "pressure" => self.pressure = value.parse()?,
            "capillary_form" => self.capillary_form = value.parse()?,
            "dump_fields" => self.dump_fields = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'")).into()),
        }
        Ok(())
    }

    pub fn reference(&self) -> Result<CircleReference> {
        Ok(CircleReference::new(self.center, self.r0, self.v_mode)?)
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Ok(Grid2D::new(self.n, self.bc)?)
    }

    pub fn horizon(&self) -> Result<f64> {
        let t_ext = self.reference()?.extinction_time();
        Ok(self.t_end.unwrap_or(DEFAULT_HORIZON_FRACTION * t_ext))
    }

    /// Smallest even `n` with `1/n <= eps / h_over_eps`.
    pub fn n_for_eps(&self, eps: f64) -> usize {
        let n = (self.h_over_eps / eps - 1e-9).ceil() as usize;
        (n + n % 2).max(16)
    }

    /// Copy set up for one member of an epsilon sweep.
    pub fn for_eps(&self, eps: f64) -> Self {
        Self {
            eps,
            n: self.n_for_eps(eps),
            ..self.clone()
        }
    }

    pub fn solver_config(&self) -> Result<(SolverConfig, usize)> {
        let grid = self.grid()?;
        let mut sc = SolverConfig::new(grid, self.eps);
        sc.cfl_c1 = self.cfl_c1;
        sc.cfl_c2 = self.cfl_c2;
        sc.scheme = self.scheme;
        sc.poisson_tol = self.poisson_tol;
        sc.pressure = self.pressure;
        sc.capillary_form = self.capillary_form;
        let steps = sc.fit_horizon(grid, self.eps, self.horizon()?);
        sc.validate(grid, self.eps)?;
        Ok((sc, steps))
    }

    /// Rejects configurations that cannot run. Returns warnings for those
    /// that run outside the regime where the rate estimates apply.
    pub fn validate(&self) -> Result<Vec<String>> {
        let reference = self.reference()?;
        let grid = self.grid()?;
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)).into());
        }
        if !(self.cfl_c1 > 0.0 && self.cfl_c2 > 0.0) {
            return Err(Error::Config("cfl factors must be positive".into()).into());
        }
        if !(self.h_over_eps > 0.0) {
            return Err(Error::Config("h_over_eps must be positive".into()).into());
        }
        let t_ext = reference.extinction_time();
        let t_end = self.horizon()?;
        if !(t_end >= 0.0) || t_end > MAX_HORIZON_FRACTION * t_ext {
            return Err(Error::Config(format!(
                "t_end = {t_end} must lie in [0, {MAX_HORIZON_FRACTION} t_ext] = [0, {}]",
                MAX_HORIZON_FRACTION * t_ext
            ))
            .into());
        }
        if self.bc == Boundary::Periodic {
            return Err(Error::Config("circle runs need Dirichlet walls".into()).into());
        }
        let mut warnings = reference.check_tube(self.delta)?;
        let h = grid.h();
        if self.delta < h {
            return Err(Error::Config(format!(
                "delta = {} is below the grid spacing {h}",
                self.delta
            ))
            .into());
        }
        if self.delta < 8.0 * h {
            warnings.push(format!(
                "delta = {} is resolved by fewer than 8 cells (h = {h})",
                self.delta
            ));
        }
        if self.eps > self.delta / 4.0 {
            warnings.push(format!(
                "eps = {} exceeds delta/4 = {}; the initial energy is not yet in its asymptotic regime",
                self.eps,
                self.delta / 4.0
            ));
        }
        self.solver_config()?;
        Ok(warnings)
    }

    /// Serializes back to the file format; parsing the result gives `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("n", self.n.to_string());
        put("eps", self.eps.to_string());
        put("cfl_c1", self.cfl_c1.to_string());
        put("cfl_c2", self.cfl_c2.to_string());
        if let Some(t) = self.t_end {
            put("t_end", t.to_string());
        }
        put("r0", self.r0.to_string());
        put("center", format!("{},{}", self.center[0], self.center[1]));
        put("delta", self.delta.to_string());
        put("bc", self.bc.to_string());
        put("scheme", self.scheme.to_string());
        if let Some(k) = self.snapshot_every {
            put("snapshot_every", k.to_string());
        }
        if let Some(d) = &self.output_dir {
            put("output_dir", d.display().to_string());
        }
        put("seed", self.seed.to_string());
        put("h_over_eps", self.h_over_eps.to_string());
        put(
            "v_mode",
            match self.v_mode {
                VelocityMode::Zero => "zero".to_string(),
                VelocityMode::Prescribed { amplitude } => format!("prescribed:{amplitude}"),
            },
        );
        put("poisson_tol", self.poisson_tol.to_string());
        put(
            "pressure",
            match self.pressure {
                PressureMethod::Spectral => "spectral".into(),
                PressureMethod::ConjugateGradient => "cg".into(),
            },
        );
        put("capillary_form", self.capillary_form.to_string());
        put("dump_fields", self.dump_fields.to_string());
        out
    }
}
