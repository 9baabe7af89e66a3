//! Weierstrass model of the neighborhood of the nodal fiber: over `tau` in
//! the base disk the fiber is the cubic
//!
//! ```text
//! F(x, y) = y^2 - 4x^3 - x^2 + g2(tau) x + g3(tau) = 0
//! g2(tau) = 20 sum_n n^3 tau^n / (1 - tau^n)
//! g3(tau) = (1/3) sum_n (7n^5 + 5n^3) tau^n / (1 - tau^n)
//! ```
//!
//! which is nodal at `tau = 0` and smooth elsewhere.
//!
//! Substituting `x = X - 1/12` removes the quadratic term:
//! `4x^3 + x^2 - g2 x - g3 = 4X^3 - G2 X - G3` with
//! `G2 = g2 + 1/12` and `G3 = g3 - g2/12 - 1/216`, so the discriminant is
//! `G2^3 - 27 G3^2` and `j = 1728 G2^3 / (G2^3 - 27 G3^2)`.
//!
//! Near the rim of the base disk `G2^3` exceeds the discriminant by a factor
//! `j / 1728` (about `1e11` at `|tau| = 0.3`), so the series and the
//! discriminant are accumulated in double-double arithmetic.

use std::io::Write;

use serde::Serialize;

use crate::dd::{CDd, Dd};
use crate::error::{GeomError, Result};
use crate::numerics::{ensure_finite, Cx};

/// Series are refused for `|tau| > 1 - DEFAULT_MARGIN`.
pub const DEFAULT_MARGIN: f64 = 0.05;

/// Default absolute truncation tolerance of the public series.
pub const DEFAULT_SERIES_TOL: f64 = 1e-16;

/// Truncation tolerance used internally for the discriminant and `j`.
const INVARIANT_SERIES_TOL: f64 = 1e-30;

/// `|Delta|` below which the fiber is treated as the nodal one by [`j_from_weierstrass`].
pub const POLE_TOL: f64 = 1e-24;

const MAX_TERMS: usize = 100_000;

/// A truncated series value with its certified tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: Cx,
    pub terms: usize,
    pub tail_bound: f64,
}

#[derive(Clone, Copy)]
enum Kind {
    G2,
    G3,
}

impl Kind {
    fn degree(self) -> i32 {
        match self {
            Kind::G2 => 3,
            Kind::G3 => 5,
        }
    }

    // Coefficient of tau^n / (1 - tau^n), as a bound in f64 and exactly in Dd.
    fn coef_f64(self, n: f64) -> f64 {
        match self {
            Kind::G2 => 20.0 * n.powi(3),
            Kind::G3 => (7.0 * n.powi(5) + 5.0 * n.powi(3)) / 3.0,
        }
    }

    fn coef_dd(self, n: usize) -> Dd {
        let n = Dd::from_f64(n as f64);
        let n3 = n * n * n;
        match self {
            Kind::G2 => n3 * 20.0,
            Kind::G3 => n3 * n * n * 7.0 + n3 * 5.0,
        }
    }

    fn prefactor(self) -> Dd {
        match self {
            Kind::G2 => Dd::ONE,
            Kind::G3 => Dd::ONE / Dd::from_f64(3.0),
        }
    }
}

fn check_tau(tau: Cx) -> Result<()> {
    ensure_finite(tau, "tau")?;
    let bound = 1.0 - DEFAULT_MARGIN;
    if tau.norm() > bound {
        return Err(GeomError::ConvergenceMargin {
            what: "tau",
            modulus: tau.norm(),
            bound,
        });
    }
    Ok(())
}

/// Sums the Lambert-type series until the geometric bound on the remaining
/// tail drops below `tol`. With `T(n) = c(n) |tau|^n / (1 - |tau|)` bounding
/// the n-th term, and `T(n+1)/T(n) <= r = ((N+2)/(N+1))^deg |tau|` for all
/// `n > N`, the tail after `N` terms is at most `T(N+1) / (1 - r)`.
fn lambert(kind: Kind, tau: Cx, tol: f64) -> Result<(CDd, usize, f64)> {
    check_tau(tau)?;
    if !(tol > 0.0) {
        return Err(GeomError::Domain(format!("series tolerance must be positive, got {tol}")));
    }
    let m = tau.norm();
    let t = CDd::from_cx(tau);
    let mut pow = CDd::ONE;
    let mut sum = CDd::ZERO;
    let deg = kind.degree();
    for n in 0..MAX_TERMS {
        let next = (n + 1) as f64;
        let ratio = ((next + 1.0) / next).powi(deg) * m;
        let bound_next = kind.coef_f64(next) * m.powi(n as i32 + 1) / (1.0 - m);
        if ratio < 1.0 {
            let tail = bound_next / (1.0 - ratio);
            if tail < tol {
                return Ok((sum * CDd::from_real(kind.prefactor()), n, tail));
            }
        }
        pow = pow * t;
        let term = (pow / (CDd::ONE - pow)) * CDd::from_real(kind.coef_dd(n + 1));
        sum = sum + term;
    }
    Err(GeomError::ConvergenceMargin {
        what: "tau (term budget)",
        modulus: m,
        bound: 1.0 - DEFAULT_MARGIN,
    })
}

pub fn g2_certified(tau: Cx, tol: f64) -> Result<SeriesValue> {
    let (v, terms, tail_bound) = lambert(Kind::G2, tau, tol)?;
    Ok(SeriesValue {
        value: v.to_cx(),
        terms,
        tail_bound,
    })
}

pub fn g3_certified(tau: Cx, tol: f64) -> Result<SeriesValue> {
    let (v, terms, tail_bound) = lambert(Kind::G3, tau, tol)?;
    Ok(SeriesValue {
        value: v.to_cx(),
        terms,
        tail_bound,
    })
}

pub fn g2_series(tau: Cx, tol: f64) -> Result<Cx> {
    Ok(g2_certified(tau, tol)?.value)
}

pub fn g3_series(tau: Cx, tol: f64) -> Result<Cx> {
    Ok(g3_certified(tau, tol)?.value)
}

/// The fiber over `tau` in the affine chart `(x, y) = (z0/z2, z1/z2)`.
/// Its single point at infinity `[0:1:0]` is not represented.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeierstrassFiber {
    pub tau: Cx,
    pub g2: Cx,
    pub g3: Cx,
}

/// Coefficients of `F(x, y) = y^2 - 4x^3 - x^2 + g2 x + g3`.
pub type FiberCubic = WeierstrassFiber;

impl WeierstrassFiber {
    pub fn new(tau: Cx) -> Result<Self> {
        Ok(Self {
            tau,
            g2: g2_series(tau, DEFAULT_SERIES_TOL)?,
            g3: g3_series(tau, DEFAULT_SERIES_TOL)?,
        })
    }

    pub fn eval(&self, x: Cx, y: Cx) -> Cx {
        y * y - 4.0 * x * x * x - x * x + self.g2 * x + self.g3
    }

    pub fn fx(&self, x: Cx) -> Cx {
        -12.0 * x * x - 2.0 * x + self.g2
    }

    pub fn fy(&self, y: Cx) -> Cx {
        2.0 * y
    }

    pub fn fxx(&self, x: Cx) -> Cx {
        -24.0 * x - 2.0
    }

    pub fn fyy(&self) -> Cx {
        Cx::new(2.0, 0.0)
    }

    pub fn fxy(&self) -> Cx {
        Cx::new(0.0, 0.0)
    }

    pub fn hessian_det(&self, x: Cx) -> Cx {
        self.fxx(x) * self.fyy() - self.fxy() * self.fxy()
    }

    /// Right-hand side `4x^3 + x^2 - g2 x - g3` of `y^2 = ...`.
    pub fn cubic(&self, x: Cx) -> Cx {
        4.0 * x * x * x + x * x - self.g2 * x - self.g3
    }

    /// The affine point over `x` on the sheet selected by `upper`.
    pub fn point_over(&self, x: Cx, upper: bool) -> (Cx, Cx) {
        let y = self.cubic(x).sqrt();
        (x, if upper { y } else { -y })
    }
}

pub fn fiber_cubic(tau: Cx) -> Result<FiberCubic> {
    WeierstrassFiber::new(tau)
}

/// `(G2, G3)` of the depressed cubic `4X^3 - G2 X - G3`, in double-double.
fn depressed_dd(tau: Cx) -> Result<(CDd, CDd)> {
    let (g2, _, _) = lambert(Kind::G2, tau, INVARIANT_SERIES_TOL)?;
    let (g3, _, _) = lambert(Kind::G3, tau, INVARIANT_SERIES_TOL)?;
    let twelfth = CDd::from_real(Dd::ONE / Dd::from_f64(12.0));
    let inv216 = CDd::from_real(Dd::ONE / Dd::from_f64(216.0));
    let big_g2 = g2 + twelfth;
    let big_g3 = g3 - g2 * twelfth - inv216;
    Ok((big_g2, big_g3))
}

fn discriminant_dd(g2: CDd, g3: CDd) -> CDd {
    g2 * g2 * g2 - (g3 * g3).scale(Dd::from_f64(27.0))
}

/// `(G2, G3)` after the shift `x = X - 1/12`.
pub fn depressed_invariants(tau: Cx) -> Result<(Cx, Cx)> {
    let (a, b) = depressed_dd(tau)?;
    Ok((a.to_cx(), b.to_cx()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularityTest {
    pub singular: bool,
    pub discriminant: Cx,
}

/// Discriminant `G2^3 - 27 G3^2` of the fiber over `tau`, flagged singular when `|Delta| < tol`.
pub fn is_singular_fiber(tau: Cx, tol: f64) -> Result<SingularityTest> {
    let (g2, g3) = depressed_dd(tau)?;
    let d = discriminant_dd(g2, g3).to_cx();
    Ok(SingularityTest {
        singular: d.norm() < tol,
        discriminant: d,
    })
}

/// `j = 1728 G2^3 / (G2^3 - 27 G3^2)`; a pole error on the nodal fiber.
pub fn j_from_weierstrass(tau: Cx) -> Result<Cx> {
    let (g2, g3) = depressed_dd(tau)?;
    let cube = g2 * g2 * g2;
    let delta = discriminant_dd(g2, g3);
    if delta.to_cx().norm() < POLE_TOL {
        return Err(GeomError::Pole(format!("fiber over tau = {tau} is nodal")));
    }
    let j = (cube / delta).scale(Dd::from_f64(1728.0)).to_cx();
    ensure_finite(j, "j_from_weierstrass")
}

/// Writes `tau_re,tau_im,j_re,j_im` rows with a header line.
pub fn write_jscan_csv<W: Write>(out: &mut W, rows: &[(Cx, Cx)]) -> std::io::Result<()> {
    writeln!(out, "tau_re,tau_im,j_re,j_im")?;
    for (t, j) in rows {
        writeln!(out, "{:?},{:?},{:?},{:?}", t.re, t.im, j.re, j.im)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Cx {
        Cx::new(re, im)
    }

    // Plain partial sum with a fixed number of terms.
    fn direct(kind: Kind, tau: Cx, terms: usize) -> Cx {
        let mut s = c(0.0, 0.0);
        for n in 1..=terms {
            let p = tau.powi(n as i32);
            s += kind.coef_f64(n as f64) * p / (1.0 - p);
        }
        s
    }

    #[test]
    fn zero_base_point() {
        assert_eq!(g2_series(c(0.0, 0.0), DEFAULT_SERIES_TOL).unwrap(), c(0.0, 0.0));
        assert_eq!(g3_series(c(0.0, 0.0), DEFAULT_SERIES_TOL).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn matches_direct_summation() {
        for tau in [c(0.1, 0.0), c(0.05, 0.0), c(0.2, 0.0), c(0.1, 0.1)] {
            let g2 = g2_series(tau, DEFAULT_SERIES_TOL).unwrap();
            let g3 = g3_series(tau, DEFAULT_SERIES_TOL).unwrap();
            assert!((g2 - direct(Kind::G2, tau, 200)).norm() < 1e-12);
            assert!((g3 - direct(Kind::G3, tau, 200)).norm() < 1e-12);
        }
    }

    #[test]
    fn g3_leading_order() {
        let tau = c(1e-6, 0.0);
        let r = g3_series(tau, DEFAULT_SERIES_TOL).unwrap() / tau;
        assert!((r - c(4.0, 0.0)).norm() < 1e-4);
    }

    #[test]
    fn margin_is_enforced() {
        assert!(matches!(
            g2_series(c(0.96, 0.0), 1e-12),
            Err(GeomError::ConvergenceMargin { .. })
        ));
        assert!(g2_series(c(0.94, 0.0), 1e-10).is_ok());
        assert!(g2_series(c(0.1, 0.0), 0.0).is_err());
    }

    #[test]
    fn nodal_fiber_at_zero() {
        let f = fiber_cubic(c(0.0, 0.0)).unwrap();
        let o = c(0.0, 0.0);
        assert_eq!(f.eval(o, o), o);
        assert_eq!(f.fx(o), o);
        assert_eq!(f.fy(o), o);
        assert_eq!(f.hessian_det(o), c(-4.0, 0.0));
        // F = y^2 - 4x^3 - x^2 at tau = 0
        let (x, y) = (c(0.3, -0.2), c(1.1, 0.4));
        assert!((f.eval(x, y) - (y * y - 4.0 * x * x * x - x * x)).norm() < 1e-15);
    }

    #[test]
    fn depressed_form_at_zero() {
        let (g2, g3) = depressed_invariants(c(0.0, 0.0)).unwrap();
        assert!((g2 - c(1.0 / 12.0, 0.0)).norm() < 1e-17);
        assert!((g3 - c(-1.0 / 216.0, 0.0)).norm() < 1e-17);
        let s = is_singular_fiber(c(0.0, 0.0), 1e-14).unwrap();
        assert!(s.singular && s.discriminant.norm() < 1e-14);
        assert!(matches!(j_from_weierstrass(c(0.0, 0.0)), Err(GeomError::Pole(_))));
    }

    #[test]
    fn shift_removes_the_quadratic_term() {
        let f = fiber_cubic(c(0.07, 0.03)).unwrap();
        let (g2, g3) = depressed_invariants(f.tau).unwrap();
        for xr in [-0.5, 0.0, 0.4, 1.3] {
            let big_x = c(xr, 0.2);
            let lhs = f.cubic(big_x - 1.0 / 12.0);
            let rhs = 4.0 * big_x * big_x * big_x - g2 * big_x - g3;
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }

    #[test]
    fn smooth_away_from_zero_and_discriminant_agrees_with_resultant() {
        let tau = c(0.05, 0.0);
        let s = is_singular_fiber(tau, 1e-14).unwrap();
        assert!(!s.singular);
        // discriminant of a x^3 + b x^2 + c x + d with a=4, b=1, c=-g2, d=-g3 equals 16 Delta
        let f = fiber_cubic(tau).unwrap();
        let (a, b, cc, d) = (c(4.0, 0.0), c(1.0, 0.0), -f.g2, -f.g3);
        let disc = 18.0 * a * b * cc * d - 4.0 * b * b * b * d + b * b * cc * cc
            - 4.0 * a * cc * cc * cc
            - 27.0 * a * a * d * d;
        assert!((disc / 16.0 - s.discriminant).norm() < 1e-12 * disc.norm());
    }

    #[test]
    fn conjugation_symmetry() {
        let t = c(0.05, 0.02);
        let a = is_singular_fiber(t, 1e-14).unwrap().discriminant;
        let b = is_singular_fiber(t.conj(), 1e-14).unwrap().discriminant;
        assert!((a.conj() - b).norm() < 1e-16);
        let ja = j_from_weierstrass(t).unwrap();
        let jb = j_from_weierstrass(t.conj()).unwrap();
        assert!((ja.conj() - jb).norm() < 1e-12 * ja.norm());
    }

    #[test]
    fn j_blows_up_at_the_nodal_fiber() {
        let j = j_from_weierstrass(c(1e-8, 0.0)).unwrap();
        assert!(j.norm() > 1e7);
        let j2 = j_from_weierstrass(c(1e-10, 0.0)).unwrap();
        assert!(j2.norm() > 50.0 * j.norm());
    }

    #[test]
    fn points_over_x_lie_on_the_fiber() {
        let f = fiber_cubic(c(0.1, -0.05)).unwrap();
        for (i, xr) in [-0.3, 0.2, 0.9].into_iter().enumerate() {
            let (x, y) = f.point_over(c(xr, 0.1), i % 2 == 0);
            assert!(f.eval(x, y).norm() < 1e-13);
        }
    }
}
