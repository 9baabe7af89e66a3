//! Complex-number conventions shared by every other module: the principal
//! logarithm and its branches, open annuli and their conformal modulus, the
//! moduli triple `(rho0, rho1, rho2)`, and a finite-difference
//! Cauchy-Riemann residual used as a numerical holomorphicity witness.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};

pub type Cx = Complex64;

/// Base step of the Cauchy-Riemann stencil before magnitude scaling.
pub const DEFAULT_CR_STEP: f64 = 1e-4;

pub const I: Cx = Cx::new(0.0, 1.0);

pub fn ensure_finite(z: Cx, what: &'static str) -> Result<Cx> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(GeomError::NonFinite(what))
    }
}

/// Principal argument in `(-pi, pi]`.
///
/// `atan2` returns `-pi` for a negative real axis approached with a negative
/// zero imaginary part; that value is folded onto `+pi`.
pub fn principal_arg(z: Cx) -> f64 {
    let a = z.im.atan2(z.re);
    if a <= -PI {
        a + TAU
    } else {
        a
    }
}

pub fn principal_log(z: Cx) -> Cx {
    Cx::new(z.norm().ln(), principal_arg(z))
}

/// A logarithm together with the integer branch it lives on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchedLog {
    pub principal: Cx,
    pub branch: i64,
}

impl BranchedLog {
    /// `principal + 2 pi i k`.
    pub fn value(&self) -> Cx {
        self.principal + Cx::new(0.0, TAU * self.branch as f64)
    }
}

pub fn branched_log(w: Cx, k: i64) -> Result<BranchedLog> {
    ensure_finite(w, "branched_log input")?;
    if w == Cx::new(0.0, 0.0) {
        return Err(GeomError::Domain("logarithm of zero".into()));
    }
    Ok(BranchedLog {
        principal: principal_log(w),
        branch: k,
    })
}

/// Estimate of `|df/dz-bar|` at `at` from the four-point central stencil
///
/// `[(f(z+h) - f(z-h)) + i (f(z+ih) - f(z-ih))] / (4h)`
///
/// with `h = step * max(1, |at|)`. The stencil is second order: for a
/// holomorphic `f` the result is `|f'''(z)| h^2 / 6 + O(h^6)` plus rounding.
pub fn cr_residual<F>(f: F, at: Cx, step: f64) -> Result<f64>
where
    F: Fn(Cx) -> Result<Cx>,
{
    ensure_finite(at, "cr_residual point")?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(GeomError::Domain(format!("stencil step must be positive, got {step}")));
    }
    let h = step * at.norm().max(1.0);
    let dx = Cx::new(h, 0.0);
    let dy = Cx::new(0.0, h);
    let e = f(at + dx)? - f(at - dx)?;
    let n = f(at + dy)? - f(at - dy)?;
    let r = ((e + I * n) / (4.0 * h)).norm();
    if r.is_finite() {
        Ok(r)
    } else {
        Err(GeomError::NonFinite("cr_residual"))
    }
}

/// Open annulus `r_in < |z| < r_out`; `r_in = 0` is a punctured disk and
/// `r_out = f64::INFINITY` an unbounded domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub r_in: f64,
    pub r_out: f64,
}

impl AnnulusSpec {
    pub fn new(r_in: f64, r_out: f64) -> Result<Self> {
        if !(r_in >= 0.0 && r_in < r_out) || r_in.is_nan() || r_out.is_nan() {
            return Err(GeomError::Domain(format!(
                "annulus radii must satisfy 0 <= r_in < r_out, got {r_in}, {r_out}"
            )));
        }
        Ok(Self { r_in, r_out })
    }

    /// Open unit-free disk `|z| < r`.
    pub fn disk(r: f64) -> Result<Self> {
        Self::new(0.0, r)
    }

    pub fn contains(&self, z: Cx) -> bool {
        let m = z.norm();
        self.r_in < m && m < self.r_out
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(GeomError::Domain(format!("scale factor must be positive, got {c}")));
        }
        Self::new(self.r_in * c, self.r_out * c)
    }
}

/// `log(r_out / r_in) / 2 pi`, the complete conformal invariant of a bounded
/// annulus with non-degenerate inner boundary.
pub fn annulus_modulus(a: AnnulusSpec) -> Result<f64> {
    if !(a.r_in > 0.0) || !a.r_out.is_finite() {
        return Err(GeomError::NotConformalAnnulus {
            r_in: a.r_in,
            r_out: a.r_out,
        });
    }
    Ok((a.r_out / a.r_in).ln() / TAU)
}

/// Two annuli are biholomorphic iff their moduli agree.
pub fn annuli_equivalent(a: AnnulusSpec, b: AnnulusSpec, tol: f64) -> Result<bool> {
    Ok((annulus_modulus(a)? - annulus_modulus(b)?).abs() <= tol)
}

/// The triple defining `E(rho1, rho2)`, with the auxiliary gluing radius `rho0`.
///
/// Invariant: `0 < rho0 < rho1 < 1 < rho2 < 1/rho1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuliParams {
    rho0: f64,
    rho1: f64,
    rho2: f64,
}

impl ModuliParams {
    pub fn new(rho0: f64, rho1: f64, rho2: f64) -> Result<Self> {
        let ok = rho0 > 0.0 && rho0 < rho1 && rho1 < 1.0 && rho2 > 1.0 && rho2 * rho1 < 1.0;
        if !ok || !(rho0.is_finite() && rho1.is_finite() && rho2.is_finite()) {
            return Err(GeomError::Domain(format!(
                "moduli must satisfy 0 < rho0 < rho1 < 1 < rho2 < 1/rho1, got ({rho0}, {rho1}, {rho2})"
            )));
        }
        Ok(Self { rho0, rho1, rho2 })
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    pub fn rho2(&self) -> f64 {
        self.rho2
    }

    /// Fiber annulus of the product chart, `Delta(1, rho2)`.
    pub fn fiber_annulus(&self) -> AnnulusSpec {
        AnnulusSpec {
            r_in: 1.0,
            r_out: self.rho2,
        }
    }

    /// Overlap of the two base charts in the `w` coordinate, `Delta(rho0, rho1)`.
    pub fn overlap_w(&self) -> AnnulusSpec {
        AnnulusSpec {
            r_in: self.rho0,
            r_out: self.rho1,
        }
    }

    /// Overlap in the `u = 1/w` coordinate, `Delta(1/rho1, 1/rho0)`.
    pub fn overlap_u(&self) -> AnnulusSpec {
        AnnulusSpec {
            r_in: 1.0 / self.rho1,
            r_out: 1.0 / self.rho0,
        }
    }
}

impl Default for ModuliParams {
    fn default() -> Self {
        Self {
            rho0: 0.1,
            rho1: 0.3,
            rho2: 2.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn log_examples() {
        assert_eq!(branched_log(Cx::new(1.0, 0.0), 0).unwrap().value(), Cx::new(0.0, 0.0));
        let l = branched_log(Cx::new(-1.0, 0.0), 0).unwrap().value();
        assert!((l - Cx::new(0.0, PI)).norm() < 1e-15);
        let l = branched_log(Cx::new(E, 0.0), 1).unwrap().value();
        assert!((l - Cx::new(1.0, TAU)).norm() < 1e-15);
    }

    #[test]
    fn negative_zero_imaginary_part_stays_on_principal_branch() {
        let l = branched_log(Cx::new(-2.0, -0.0), 0).unwrap();
        assert_eq!(l.principal.im, PI);
    }

    #[test]
    fn log_of_zero_is_rejected() {
        assert!(matches!(branched_log(Cx::new(0.0, 0.0), 3), Err(GeomError::Domain(_))));
        assert!(branched_log(Cx::new(f64::NAN, 0.0), 0).is_err());
    }

    #[test]
    fn cr_residual_examples() {
        let sq = |z: Cx| Ok(z * z);
        assert!(cr_residual(sq, Cx::new(1.0, 1.0), 1e-4).unwrap() < 1e-9);
        let conj = |z: Cx| Ok(z.conj());
        let r = cr_residual(conj, Cx::new(0.3, -2.0), 1e-4).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
        // d/dz-bar of z z-bar is z
        let z0 = Cx::new(0.7, -1.3);
        let r = cr_residual(|z: Cx| Ok(Cx::new(z.norm_sqr(), 0.0)), z0, 1e-4).unwrap();
        assert!((r - z0.norm()).abs() < 1e-8);
    }

    #[test]
    fn cr_residual_propagates_evaluation_errors() {
        let f = |z: Cx| {
            if z.re > 1.0 {
                Err(GeomError::Domain("outside".into()))
            } else {
                Ok(z)
            }
        };
        assert!(cr_residual(f, Cx::new(1.0, 0.0), 1e-3).is_err());
        assert!(cr_residual(|z: Cx| Ok(z), Cx::new(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn annulus_examples() {
        let m = annulus_modulus(AnnulusSpec::new(1.0, TAU.exp()).unwrap()).unwrap();
        assert!((m - 1.0).abs() < 1e-15);
        let rho2 = 1.7;
        let a = AnnulusSpec::new(1.0, rho2).unwrap();
        let b = AnnulusSpec::new(2.0, 2.0 * rho2).unwrap();
        assert!(annuli_equivalent(a, b, 1e-14).unwrap());
        let c = AnnulusSpec::new(1.0, 2.0).unwrap();
        let d = AnnulusSpec::new(1.0, 3.0).unwrap();
        assert!(!annuli_equivalent(c, d, 1e-6).unwrap());
    }

    #[test]
    fn degenerate_annuli_have_no_modulus() {
        assert!(matches!(
            annulus_modulus(AnnulusSpec::disk(1.0).unwrap()),
            Err(GeomError::NotConformalAnnulus { .. })
        ));
        assert!(annulus_modulus(AnnulusSpec::new(1.0, f64::INFINITY).unwrap()).is_err());
        assert!(AnnulusSpec::new(2.0, 1.0).is_err());
    }

    #[test]
    fn moduli_region() {
        assert!(ModuliParams::new(0.1, 0.3, 2.0).is_ok());
        assert!(ModuliParams::new(0.1, 0.6, 2.0).is_err());
        assert!(ModuliParams::new(0.3, 0.3, 2.0).is_err());
        assert!(ModuliParams::new(0.1, 0.3, 1.0).is_err());
        assert!(ModuliParams::new(0.1, 1.0, 1.0).is_err());
        assert!(ModuliParams::new(f64::NAN, 0.3, 2.0).is_err());
    }
}
