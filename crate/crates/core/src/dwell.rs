//! Double-well potential, its primitive and the optimal transition profile.
//!
//! The only well shipped is the quartic `W(r) = a/2 (1 - r^2)^2` on `[-1, 1]`
//! (`a = 1` by default). For it `sqrt(2W(r)) = sqrt(a) (1 - r^2)`, the
//! primitive `psi` is a cubic and the heteroclinic profile is a `tanh`.

use crate::error::{Error, Result};
use crate::quadrature;

/// Available well shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WellKind {
    /// `W(r) = scale/2 (1 - r^2)^2`.
    Quartic { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWellSpec {
    pub kind: WellKind,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for DoubleWellSpec {
    fn default() -> Self {
        Self::quartic()
    }
}

/// `W(r)`, `W'(r)` and `sqrt(2 W(clamp(r)))` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    pub w: f64,
    pub dw: f64,
    pub root2w: f64,
}

impl DoubleWellSpec {
    pub fn quartic() -> Self {
        Self::scaled_quartic(1.0)
    }

    /// The quartic well multiplied by `scale > 0`.
    pub fn scaled_quartic(scale: f64) -> Self {
        Self {
            kind: WellKind::Quartic { scale },
            r_min: -1.0,
            r_max: 1.0,
        }
    }

    fn scale(&self) -> f64 {
        match self.kind {
            WellKind::Quartic { scale } => scale,
        }
    }

    pub fn clamp(&self, r: f64) -> f64 {
        r.clamp(self.r_min, self.r_max)
    }

    /// `W(r)`, no validation. Hot loops use this directly.
    #[inline]
    pub fn w(&self, r: f64) -> f64 {
        let q = 1.0 - r * r;
        0.5 * self.scale() * q * q
    }

    #[inline]
    pub fn dw(&self, r: f64) -> f64 {
        -2.0 * self.scale() * r * (1.0 - r * r)
    }

    /// `sqrt(2 W(clamp(r)))`.
    #[inline]
    pub fn root2w(&self, r: f64) -> f64 {
        let r = self.clamp(r);
        self.scale().sqrt() * (1.0 - r * r)
    }

    /// Derivatives of the convex and concave parts of `W = W_convex + W_concave`,
    /// with `W_convex = scale/2 (r^4 + 1)` and `W_concave = -scale r^2`.
    /// Returns `(W_convex', W_convex'', W_concave')`.
    #[inline]
    pub fn split_derivatives(&self, r: f64) -> (f64, f64, f64) {
        let a = self.scale();
        (2.0 * a * r * r * r, 6.0 * a * r * r, -2.0 * a * r)
    }

    pub fn potential(&self, r: f64) -> Result<Potential> {
        if !r.is_finite() {
            return Err(Error::Input(format!(
                "potential evaluated at non-finite r = {r}"
            )));
        }
        Ok(Potential {
            w: self.w(r),
            dw: self.dw(r),
            root2w: self.root2w(r),
        })
    }

    /// `psi(r) = \int_{-1}^{clamp(r)} sqrt(2 W(s)) ds` in closed form.
    #[inline]
    pub fn psi(&self, r: f64) -> f64 {
        let r = self.clamp(r);
        // factored form of r - r^3/3 + 2/3, exact at both endpoints
        self.scale().sqrt() * (r + 1.0) * (r + 1.0) * (2.0 - r) / 3.0
    }

    pub fn psi_primitive(&self, r: f64) -> Result<f64> {
        if !r.is_finite() {
            return Err(Error::Input(format!("psi evaluated at non-finite r = {r}")));
        }
        Ok(self.psi(r))
    }

    /// Surface tension `c0 = \int_{-1}^{1} sqrt(2 W(r)) dr`, by adaptive quadrature.
    pub fn surface_tension_c0(&self) -> f64 {
        quadrature::integrate(|r| self.root2w(r), self.r_min, self.r_max, 1e-13)
    }

    /// Heteroclinic solution of `eps phi' = sqrt(2 W(phi))` with `phi(0) = 0`,
    /// evaluated at `s`.
    pub fn optimal_profile(&self, s: f64, eps: f64) -> Result<f64> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Parameter(format!(
                "profile width eps = {eps} must be positive"
            )));
        }
        if s.is_nan() {
            return Err(Error::Input("profile evaluated at NaN".into()));
        }
        Ok(self.profile(s, eps))
    }

    #[inline]
    pub(crate) fn profile(&self, s: f64, eps: f64) -> f64 {
        (self.scale().sqrt() * s / eps).tanh()
    }

    /// Analytic `d/ds` of [`Self::optimal_profile`].
    pub fn profile_slope(&self, s: f64, eps: f64) -> f64 {
        let k = self.scale().sqrt() / eps;
        let t = (k * s).tanh();
        k * (1.0 - t * t)
    }

    /// Analytic `d^2/ds^2` of [`Self::optimal_profile`].
    pub fn profile_curvature(&self, s: f64, eps: f64) -> f64 {
        let k = self.scale().sqrt() / eps;
        let t = (k * s).tanh();
        -2.0 * k * k * t * (1.0 - t * t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS_LIST: [f64; 3] = [0.16, 0.04, 0.01];

    #[test]
    fn potential_examples() {
        let w = DoubleWellSpec::quartic();
        let p = w.potential(0.0).unwrap();
        assert_eq!((p.w, p.dw, p.root2w), (0.5, 0.0, 1.0));
        let p = w.potential(1.0).unwrap();
        assert_eq!((p.w, p.dw, p.root2w), (0.0, 0.0, 0.0));
        let p = w.potential(0.5).unwrap();
        assert!((p.w - 0.28125).abs() < 1e-15);
        assert!((p.dw + 0.75).abs() < 1e-15);
        assert!((p.root2w - 0.75).abs() < 1e-15);
        assert!(w.potential(f64::NAN).is_err());
        assert!(w.potential(f64::INFINITY).is_err());
    }

    #[test]
    fn root2w_is_clamped() {
        let w = DoubleWellSpec::quartic();
        assert_eq!(w.root2w(1.2), 0.0);
        assert_eq!(w.root2w(-3.0), 0.0);
        assert!(w.root2w(0.999) > 0.0);
    }

    #[test]
    fn well_endpoints() {
        let w = DoubleWellSpec::quartic();
        for r in [w.r_min, w.r_max] {
            assert_eq!(w.w(r), 0.0);
            assert_eq!(w.dw(r), 0.0);
        }
        for k in 1..200 {
            let r = -1.0 + 2.0 * k as f64 / 200.0;
            assert!(w.w(r) > 0.0);
        }
    }

    #[test]
    fn psi_examples() {
        let w = DoubleWellSpec::quartic();
        assert_eq!(w.psi_primitive(-1.0).unwrap(), 0.0);
        let quad_one = quadrature::integrate(|s| 1.0 - s * s, -1.0, 1.0, 1e-13);
        assert!((w.psi_primitive(1.0).unwrap() - quad_one).abs() < 1e-13);
        let quad_zero = quadrature::integrate(|s| 1.0 - s * s, -1.0, 0.0, 1e-13);
        assert!((w.psi_primitive(0.0).unwrap() - quad_zero).abs() < 1e-13);
        assert!((quad_zero - 2.0 / 3.0).abs() < 1e-13);
        // clamped outside the well interval
        assert_eq!(w.psi(2.0), w.psi(1.0));
        assert_eq!(w.psi(-2.0), 0.0);
    }

    #[test]
    fn psi_matches_quadrature_everywhere() {
        let w = DoubleWellSpec::scaled_quartic(2.5);
        for k in 0..=40 {
            let r = -1.0 + k as f64 / 20.0;
            let q = quadrature::integrate(|s| w.root2w(s), -1.0, r, 1e-13);
            assert!((w.psi(r) - q).abs() < 1e-12, "r = {r}");
        }
    }

    #[test]
    fn surface_tension() {
        let w = DoubleWellSpec::quartic();
        let c0 = w.surface_tension_c0();
        assert!((c0 - 4.0 / 3.0).abs() / (4.0 / 3.0) < 1e-10);
        assert!((c0 - w.psi(1.0)).abs() < 1e-12);
        let scaled = DoubleWellSpec::scaled_quartic(4.0).surface_tension_c0();
        assert!((scaled - 2.0 * c0).abs() < 1e-12);
    }

    #[test]
    fn profile_examples() {
        let w = DoubleWellSpec::quartic();
        for eps in EPS_LIST {
            assert_eq!(w.optimal_profile(0.0, eps).unwrap(), 0.0);
            assert!((w.optimal_profile(50.0 * eps, eps).unwrap() - 1.0).abs() < 1e-12);
            assert!((w.optimal_profile(-50.0 * eps, eps).unwrap() + 1.0).abs() < 1e-12);
        }
        assert!(w.optimal_profile(0.1, 0.0).is_err());
        assert!(w.optimal_profile(0.1, -1.0).is_err());
    }

    /// RK4 integration of `eps phi' = 1 - phi^2` from `phi(0) = 0` to `s = eps`.
    #[test]
    fn profile_matches_ode_integration() {
        let w = DoubleWellSpec::quartic();
        let eps = 0.04;
        let steps = 4000;
        let ds = eps / steps as f64;
        let rhs = |p: f64| w.root2w(p) / eps;
        let mut p = 0.0;
        for _ in 0..steps {
            let k1 = rhs(p);
            let k2 = rhs(p + 0.5 * ds * k1);
            let k3 = rhs(p + 0.5 * ds * k2);
            let k4 = rhs(p + ds * k3);
            p += ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let tanh1 = w.optimal_profile(eps, eps).unwrap();
        assert!((p - tanh1).abs() < 1e-12);
        assert!((tanh1 - 0.761_594_155_955_764_9).abs() < 1e-15);
    }

    #[test]
    fn profile_is_odd() {
        let w = DoubleWellSpec::quartic();
        for k in 0..100 {
            let s = 0.003 * k as f64;
            assert_eq!(w.profile(s, 0.04), -w.profile(-s, 0.04));
        }
    }

    #[test]
    fn equipartition_along_profile() {
        for well in [
            DoubleWellSpec::quartic(),
            DoubleWellSpec::scaled_quartic(3.0),
        ] {
            for eps in EPS_LIST {
                for k in -50..=50 {
                    let s = 0.1 * eps * k as f64;
                    let phi = well.profile(s, eps);
                    let slope = well.profile_slope(s, eps);
                    let lhs = eps * slope * slope;
                    let rhs = 2.0 * well.w(phi) / eps;
                    assert!(
                        (lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()),
                        "eps {eps} s {s}"
                    );
                }
            }
        }
    }

    #[test]
    fn flat_profile_has_zero_curvature() {
        let w = DoubleWellSpec::quartic();
        for eps in EPS_LIST {
            for k in 0..100 {
                let s = (k as f64 - 50.0) * 0.08 * eps;
                let phi = w.profile(s, eps);
                let h = -eps * w.profile_curvature(s, eps) + w.dw(phi) / eps;
                assert!(h.abs() < 1e-10, "eps {eps} s {s}: {h}");
            }
        }
    }

    #[test]
    fn dw_matches_finite_difference() {
        let w = DoubleWellSpec::quartic();
        let step = 1e-6;
        for k in 0..=100 {
            let r = -1.5 + 0.03 * k as f64;
            let fd = (w.w(r + step) - w.w(r - step)) / (2.0 * step);
            assert!((fd - w.dw(r)).abs() < 1e-6);
        }
    }

    #[test]
    fn convex_concave_split_recovers_dw() {
        let w = DoubleWellSpec::scaled_quartic(1.7);
        for k in 0..=40 {
            let r = -1.2 + 0.06 * k as f64;
            let (cvx, cvx2, ccv) = w.split_derivatives(r);
            assert!((cvx + ccv - w.dw(r)).abs() < 1e-13);
            assert!(cvx2 >= 0.0);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]
            #[test]
            fn psi_is_monotone(a in -1.0f64..=1.0, b in -1.0f64..=1.0) {
                let w = DoubleWellSpec::quartic();
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(w.psi(lo) <= w.psi(hi));
            }
        }
    }
}
