//! Analytic sharp-interface reference: a circle shrinking by curvature.
//!
//! The disc is the phase `chi = 1`. Its radius obeys `-R' = 1/R`, so
//! `R(t) = sqrt(r0^2 - 2t)` until extinction at `r0^2 / 2`. The signed
//! distance `s = R - |x - c|` is positive inside, its gradient is the unit
//! normal pointing into the disc, and the curvature is `H = -Δs = 1/R` on the
//! circle.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField};

/// Limit-flow velocity attached to the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityMode {
    /// `v = 0`, the exact solution of the limit system for a circle.
    Zero,
    /// Solenoidal field from the stream function `A sin^2(pi x) sin^2(pi y)`.
    /// It does not solve the limit flow; only for exercising `v`-dependent
    /// terms.
    Prescribed { amplitude: f64 },
}

impl std::str::FromStr for VelocityMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "prescribed" => Ok(Self::Prescribed { amplitude: 0.05 }),
            other => match other.strip_prefix("prescribed:") {
                Some(a) => a
                    .parse::<f64>()
                    .ok()
                    .filter(|a| a.is_finite())
                    .map(|amplitude| Self::Prescribed { amplitude })
                    .ok_or_else(|| Error::Config(format!("bad amplitude in v_mode '{other}'"))),
                None => Err(Error::Config(format!("unknown v_mode '{other}'"))),
            },
        }
    }
}

/// Geometric data at the closest point of the circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    /// Unit normal pointing into the disc.
    pub normal: [f64; 2],
    pub curvature: f64,
    pub normal_speed: f64,
    /// Closest point on the circle.
    pub projection: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleReference {
    pub center: [f64; 2],
    pub r0: f64,
    pub v_mode: VelocityMode,
}

impl Default for CircleReference {
    fn default() -> Self {
        Self {
            center: [0.5, 0.5],
            r0: 0.25,
            v_mode: VelocityMode::Zero,
        }
    }
}

impl CircleReference {
    pub fn new(center: [f64; 2], r0: f64, v_mode: VelocityMode) -> Result<Self> {
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(Error::Config(format!(
                "initial radius must be positive, got {r0}"
            )));
        }
        if !center.iter().all(|c| c.is_finite() && *c > 0.0 && *c < 1.0) {
            return Err(Error::Config(format!(
                "center {center:?} must lie inside the unit square"
            )));
        }
        Ok(Self { center, r0, v_mode })
    }

    pub fn extinction_time(&self) -> f64 {
        0.5 * self.r0 * self.r0
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self.v_mode, VelocityMode::Prescribed { .. })
    }

    /// Distance from the center to the nearest wall.
    pub fn wall_distance(&self) -> f64 {
        let [cx, cy] = self.center;
        cx.min(cy).min(1.0 - cx).min(1.0 - cy)
    }

    /// Checks the tube half-width `delta` against the domain. Returns an error
    /// when the outer tube `r0 + 2 delta` (support of the transport field)
    /// reaches past the wall, and warnings for weaker violations.
    pub fn check_tube(&self, delta: f64) -> Result<Vec<String>> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Config(format!(
                "tube width delta must be positive, got {delta}"
            )));
        }
        let wall = self.wall_distance();
        if self.r0 + 2.0 * delta > wall {
            return Err(Error::Config(format!(
                "r0 + 2 delta = {} exceeds the wall distance {wall}",
                self.r0 + 2.0 * delta
            )));
        }
        let mut warnings = Vec::new();
        if self.r0 + 4.0 * delta >= wall {
            warnings.push(format!(
                "r0 + 4 delta = {} is not below the wall distance {wall}",
                self.r0 + 4.0 * delta
            ));
        }
        if 2.0 * delta >= self.r0 {
            warnings.push(format!(
                "outer tube 2 delta = {} reaches the center of the disc (r0 = {})",
                2.0 * delta,
                self.r0
            ));
        }
        Ok(warnings)
    }

    pub fn radius(&self, t: f64) -> Result<f64> {
        let t_ext = self.extinction_time();
        if !(t >= 0.0) || t >= t_ext {
            return Err(Error::Domain(format!("time {t} outside [0, {t_ext})")));
        }
        Ok((self.r0 * self.r0 - 2.0 * t).sqrt())
    }

    /// `dR/dt = -1/R`.
    pub fn radius_rate(&self, t: f64) -> Result<f64> {
        Ok(-1.0 / self.radius(t)?)
    }

    #[inline]
    fn offset(&self, x: [f64; 2]) -> ([f64; 2], f64) {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        (d, d[0].hypot(d[1]))
    }

    pub fn signed_distance(&self, x: [f64; 2], t: f64) -> Result<f64> {
        Ok(self.radius(t)? - self.offset(x).1)
    }

    /// Unit normal `∇s`, pointing into the disc. Undefined at the center.
    pub fn normal(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let (d, r) = self.offset(x);
        if r == 0.0 {
            return Err(Error::Singularity(
                "normal at the center of the circle".into(),
            ));
        }
        Ok([-d[0] / r, -d[1] / r])
    }

    /// `Δs(x) = -1/|x - c|`.
    pub fn laplacian_distance(&self, x: [f64; 2]) -> Result<f64> {
        let r = self.offset(x).1;
        if r == 0.0 {
            return Err(Error::Singularity(
                "distance Laplacian at the center".into(),
            ));
        }
        Ok(-1.0 / r)
    }

    pub fn geometry(&self, x: [f64; 2], t: f64) -> Result<Geometry> {
        let radius = self.radius(t)?;
        let normal = self.normal(x)?;
        let projection = [
            self.center[0] - radius * normal[0],
            self.center[1] - radius * normal[1],
        ];
        Ok(Geometry {
            normal,
            curvature: 1.0 / radius,
            normal_speed: 1.0 / radius,
            projection,
        })
    }

    /// 1 inside the disc, 0 elsewhere.
    pub fn indicator(&self, x: [f64; 2], t: f64) -> Result<f64> {
        Ok(if self.signed_distance(x, t)? > 0.0 {
            1.0
        } else {
            0.0
        })
    }

    /// Stream function `q` with `v = (d_y q, -d_x q)`; zero in [`VelocityMode::Zero`].
    pub fn stream_function(&self, x: [f64; 2]) -> f64 {
        match self.v_mode {
            VelocityMode::Zero => 0.0,
            VelocityMode::Prescribed { amplitude: a } => {
                let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
                a * sx * sx * sy * sy
            }
        }
    }

    pub fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        match self.v_mode {
            VelocityMode::Zero => [0.0, 0.0],
            VelocityMode::Prescribed { amplitude: a } => {
                let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
                [
                    a * PI * sx * sx * (2.0 * PI * x[1]).sin(),
                    -a * PI * (2.0 * PI * x[0]).sin() * sy * sy,
                ]
            }
        }
    }

    /// `m[a][b] = d_b v_a`.
    pub fn velocity_gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        match self.v_mode {
            VelocityMode::Zero => [[0.0; 2]; 2],
            VelocityMode::Prescribed { amplitude: a } => {
                let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
                let (s2x, s2y) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).sin());
                let (c2x, c2y) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).cos());
                let k = a * PI * PI;
                [
                    [k * s2x * s2y, 2.0 * k * sx * sx * c2y],
                    [-2.0 * k * c2x * sy * sy, -k * s2x * s2y],
                ]
            }
        }
    }

    pub fn signed_distance_field(&self, grid: Grid2D, t: f64) -> Result<ScalarField> {
        let radius = self.radius(t)?;
        Ok(ScalarField::from_fn(grid, |x, y| {
            radius - self.offset([x, y]).1
        }))
    }

    pub fn indicator_field(&self, grid: Grid2D, t: f64) -> Result<ScalarField> {
        Ok(self
            .signed_distance_field(grid, t)?
            .map(|s| if s > 0.0 { 1.0 } else { 0.0 }))
    }
}
