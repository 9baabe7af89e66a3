//! The multivalued transition function
//!
//! `phi(w) = exp(L^2 / (4 pi i) - L / 2)`, `L` a logarithm of `w`,
//!
//! the region `Y` of the quotient chart that it identifies with the product
//! chart, and the attaching map `(z, u) -> [z phi(1/u), 1/u]`. Moving `L` to
//! the next branch multiplies `phi` by `w`, so every branch lands in the same
//! `Z`-orbit and the attaching map is well defined on the quotient.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::numerics::{branched_log, ensure_finite, principal_log, Cx, ModuliParams, I};
use crate::quotient::{powi, reduce, QuotientPoint};

/// Fewest continuation steps accepted per full turn of a loop.
pub const MIN_STEPS_PER_TURN: usize = 64;
pub const DEFAULT_STEPS_PER_TURN: usize = 256;

/// One branch of `phi` at `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchedPhi {
    pub w: Cx,
    pub k: i64,
    pub value: Cx,
}

/// `phi` as a function of the logarithm it is built from.
pub fn phi_from_log(l: Cx) -> Cx {
    (l * l / (4.0 * PI * I) - l / 2.0).exp()
}

/// Branch `k` of `phi`, both logarithms taken as `Log w + 2 pi i k`.
pub fn phi(w: Cx, k: i64) -> Result<BranchedPhi> {
    let l = branched_log(w, k)?.value();
    let value = ensure_finite(phi_from_log(l), "phi")?;
    if value == Cx::new(0.0, 0.0) {
        return Err(GeomError::NonFinite("phi underflowed to zero"));
    }
    Ok(BranchedPhi { w, k, value })
}

/// The branch of `phi` continued from `(w0, l0)` to a nearby `w`; valid while
/// the segment avoids the ray opposite `w0`.
pub fn phi_near(w: Cx, w0: Cx, l0: Cx) -> Result<Cx> {
    ensure_finite(w, "phi_near")?;
    if w == Cx::new(0.0, 0.0) {
        return Err(GeomError::Domain("phi is undefined at w = 0".into()));
    }
    ensure_finite(phi_from_log(l0 + principal_log(w / w0)), "phi_near")
}

fn check_overlap_w(w: Cx, params: &ModuliParams) -> Result<()> {
    ensure_finite(w, "base coordinate")?;
    if !params.overlap_w().contains(w) {
        return Err(GeomError::Domain(format!(
            "|w| = {} lies outside the overlap annulus ({}, {})",
            w.norm(),
            params.rho0(),
            params.rho1()
        )));
    }
    Ok(())
}

fn check_fiber_annulus(z: Cx, params: &ModuliParams) -> Result<()> {
    ensure_finite(z, "fiber coordinate")?;
    if !params.fiber_annulus().contains(z) {
        return Err(GeomError::Domain(format!(
            "|z| = {} lies outside the fiber annulus (1, {})",
            z.norm(),
            params.rho2()
        )));
    }
    Ok(())
}

/// The branch `k` with `1 < |z / phi_k(w)| < rho2`, if any. At most one
/// exists because `|w|^-1 > rho1^-1 > rho2`.
pub fn in_region_y(z: Cx, w: Cx, params: &ModuliParams) -> Result<Option<i64>> {
    check_overlap_w(w, params)?;
    ensure_finite(z, "fiber coordinate")?;
    if z == Cx::new(0.0, 0.0) {
        return Err(GeomError::Domain("fiber coordinate must be nonzero".into()));
    }
    // ln|z / phi_k| = a + k |ln|w||
    let gap = -w.norm().ln();
    let a = z.norm().ln() - phi(w, 0)?.value.norm().ln();
    let guess = (-a / gap).floor() as i64 + 1;
    for k in guess - 2..=guess + 2 {
        let r = (z / phi(w, k)?.value).norm();
        if 1.0 < r && r < params.rho2() {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// The attaching map from the product chart into the quotient chart, using
/// branch `k` of `phi` before reduction.
pub fn glue_map_with_branch(z: Cx, u: Cx, k: i64, params: &ModuliParams) -> Result<QuotientPoint> {
    check_fiber_annulus(z, params)?;
    ensure_finite(u, "base coordinate")?;
    if !params.overlap_u().contains(u) {
        return Err(GeomError::Domain(format!(
            "|u| = {} lies outside the overlap annulus ({}, {})",
            u.norm(),
            1.0 / params.rho1(),
            1.0 / params.rho0()
        )));
    }
    let w = u.inv();
    reduce(z * phi(w, k)?.value, w)
}

pub fn glue_map(z: Cx, u: Cx, params: &ModuliParams) -> Result<QuotientPoint> {
    glue_map_with_branch(z, u, 0, params)
}

/// Inverse of [`glue_map`] on its image: returns `(z, u)`.
pub fn unglue(p: &QuotientPoint, params: &ModuliParams) -> Result<(Cx, Cx)> {
    let k = in_region_y(p.z, p.w, params)?
        .ok_or_else(|| GeomError::Domain(format!("({}, {}) is not in the region Y", p.z, p.w)))?;
    Ok((p.z / phi(p.w, k)?.value, p.w.inv()))
}

/// Unreduced fiber coordinate `z phi(w) w^shift` continued from the anchor
/// `(u0, l0)` with `l0` a logarithm of `1/u0`; holomorphic in `(z, u)` near the anchor.
pub fn glue_lift(z: Cx, u: Cx, u0: Cx, l0: Cx, shift: i64) -> Result<Cx> {
    let w = u.inv();
    Ok(z * phi_near(w, u0.inv(), l0)? * powi(w, shift))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub theta: f64,
    pub z: Cx,
    pub branch: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monodromy {
    pub winding: i64,
    pub trace: Vec<TracePoint>,
}

fn domain_index(z: Cx, rho: f64) -> i64 {
    // rho^(m+1) < |z| <= rho^m
    (z.norm().ln() / rho.ln()).floor() as i64
}

/// Continues `z0 phi(w)` around `w = rho e^{i theta}` for `turns` full turns
/// (negative turns run backwards) and counts the net fundamental-domain shifts.
pub fn longitude_monodromy(
    rho: f64,
    z0: Cx,
    turns: i32,
    steps_per_turn: usize,
    params: &ModuliParams,
) -> Result<Monodromy> {
    if steps_per_turn < MIN_STEPS_PER_TURN {
        return Err(GeomError::TooFewSteps {
            steps: steps_per_turn,
            min: MIN_STEPS_PER_TURN,
        });
    }
    if !(params.rho0() < rho && rho < params.rho1()) {
        return Err(GeomError::Domain(format!(
            "loop radius {rho} must lie in ({}, {})",
            params.rho0(),
            params.rho1()
        )));
    }
    check_fiber_annulus(z0, params)?;

    let total = steps_per_turn * turns.unsigned_abs() as usize;
    let dir = f64::from(turns.signum());
    let mut trace = Vec::with_capacity(total + 1);
    let mut l = Cx::new(rho.ln(), 0.0);
    let mut branch = 0i64;
    trace.push(TracePoint {
        theta: 0.0,
        z: z0 * phi_from_log(l),
        branch,
    });
    for step in 1..=total {
        let theta = dir * TAU * step as f64 / steps_per_turn as f64;
        let w = Cx::from_polar(rho, theta);
        let p = principal_log(w);
        // the branch whose logarithm is nearest the previous one
        let k = ((l.im - p.im) / TAU).round() as i64;
        let next = p + Cx::new(0.0, TAU * k as f64);
        let jump = (next - l).norm();
        if jump > PI {
            return Err(GeomError::Tracking { step, jump });
        }
        l = next;
        branch = k;
        trace.push(TracePoint {
            theta,
            z: ensure_finite(z0 * phi_from_log(l), "continued fiber coordinate")?,
            branch,
        });
    }
    let first = trace[0].z;
    let last = trace[trace.len() - 1].z;
    let winding = domain_index(last, rho) - domain_index(first, rho);
    Ok(Monodromy { winding, trace })
}

pub fn write_trace_csv<W: Write>(out: &mut W, trace: &[TracePoint]) -> std::io::Result<()> {
    writeln!(out, "theta,re_z,im_z,branch")?;
    for t in trace {
        writeln!(out, "{:?},{:?},{:?},{}", t.theta, t.z.re, t.z.im, t.branch)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::cr_residual;

    fn c(re: f64, im: f64) -> Cx {
        Cx::new(re, im)
    }

    #[test]
    fn branch_shift_multiplies_by_w() {
        let w = c(0.12, -0.2);
        for k in -5..5 {
            let a = phi(w, k + 1).unwrap().value;
            let b = w * phi(w, k).unwrap().value;
            assert!((a - b).norm() <= 1e-13 * a.norm());
        }
    }

    #[test]
    fn modulus_and_real_axis() {
        let rho: f64 = 0.2;
        for theta in [-3.0, -1.0, 0.0, 0.5, PI] {
            let v = phi(Cx::from_polar(rho, theta), 0).unwrap().value.norm();
            assert!((v - rho.powf(theta / TAU - 0.5)).abs() < 1e-13);
        }
        let l = rho.ln();
        let expect = rho.powf(-0.5) * Cx::from_polar(1.0, -l * l / (4.0 * PI));
        assert!((phi(c(rho, 0.0), 0).unwrap().value - expect).norm() < 1e-14);
        assert!(phi(c(0.0, 0.0), 0).is_err());
    }

    #[test]
    fn region_y_examples() {
        let p = ModuliParams::default();
        let w = c(0.15, 0.1);
        let f0 = phi(w, 0).unwrap().value;
        assert_eq!(in_region_y(f0 * p.rho2().sqrt(), w, &p).unwrap(), Some(0));
        assert_eq!(in_region_y(f0, w, &p).unwrap(), None);
        assert_eq!(in_region_y(f0 * w.powi(3) * 1.5, w, &p).unwrap(), Some(3));
        assert!(in_region_y(f0, c(0.5, 0.0), &p).is_err());
    }

    #[test]
    fn glue_examples() {
        let p = ModuliParams::default();
        let (z, u) = (c(1.2, 0.5), c(-2.0, 4.0));
        let a = glue_map(z, u, &p).unwrap();
        let b = glue_map_with_branch(z, u, 3, &p).unwrap();
        assert!((a.z - b.z).norm() < 1e-12);
        assert_eq!(b.shift - a.shift, -3);
        assert_eq!(a.w, u.inv());
        let (z2, u2) = unglue(&a, &p).unwrap();
        assert!((z2 - z).norm() < 1e-12 && (u2 - u).norm() < 1e-12);
        assert!(glue_map(c(0.5, 0.0), u, &p).is_err());
        assert!(glue_map(z, c(2.0, 0.0), &p).is_err());
    }

    #[test]
    fn glue_is_holomorphic_in_both_variables() {
        let p = ModuliParams::default();
        let (z, u) = (c(1.3, -0.4), c(3.0, 5.0));
        let q = glue_map(z, u, &p).unwrap();
        let l0 = principal_log(u.inv());
        let rz = cr_residual(|s| glue_lift(s, u, u, l0, q.shift), z, 1e-4).unwrap();
        let ru = cr_residual(|s| glue_lift(z, s, u, l0, q.shift), u, 1e-4).unwrap();
        assert!(rz < 1e-9, "{rz}");
        assert!(ru < 1e-6, "{ru}");
        assert!((glue_lift(z, u, u, l0, q.shift).unwrap() - q.z).norm() < 1e-13);
    }

    #[test]
    fn winding_follows_the_loop() {
        let p = ModuliParams::default();
        let z0 = c(1.1, 0.7);
        for (turns, expect) in [(1, 1), (-1, -1), (2, 2)] {
            let m = longitude_monodromy(0.2, z0, turns, 256, &p).unwrap();
            assert_eq!(m.winding, expect);
            assert_eq!(m.trace.len(), 256 * turns.unsigned_abs() as usize + 1);
        }
        assert!(matches!(
            longitude_monodromy(0.2, z0, 1, 32, &p),
            Err(GeomError::TooFewSteps { .. })
        ));
        assert!(longitude_monodromy(0.05, z0, 1, 256, &p).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let p = ModuliParams::default();
        let m = longitude_monodromy(0.2, c(1.5, 0.0), 1, 64, &p).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &m.trace).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("theta,re_z,im_z,branch\n"));
        assert_eq!(s.lines().count(), 66);
        assert!(s.lines().last().unwrap().ends_with(",1"));
    }
}
