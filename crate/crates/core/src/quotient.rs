//! The quotient model `W = (C* x Delta(0, rho1)) / Z` with `n . (z, w) = (z w^n, w)`:
//! reduction to the fundamental annulus `|w| < |z| <= 1`, the lattice
//! parameter `v = log(w) / 2 pi i` of the fiber torus `C / (Z + Z v)`, and
//! its `j`-invariant.
//!
//! `j` is evaluated by moving `v` into the standard fundamental domain of
//! `SL(2, Z)` and summing the q-expansion there, where `|q| <= exp(-pi sqrt 3)`
//! and forty coefficients certify the value to far below double precision.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::numerics::{ensure_finite, Cx};

/// Number of q-expansion coefficients `c(1)..=c(J_TERMS)` summed.
pub const J_TERMS: usize = 40;

/// Largest `|w|` for which `j_torus` reports a certified value.
pub const J_CERTIFIED_RADIUS: f64 = 0.5;

/// Relative bound required of the q-series tail.
const J_TAIL_TOL: f64 = 1e-15;

/// A point of `C* x Delta*` in canonical form `|w| < |z| <= 1`; `shift` is
/// the `n` with `z = z_in * w^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuotientPoint {
    pub z: Cx,
    pub w: Cx,
    pub shift: i64,
}

/// Point of the upper half-plane with `T_w = C / (Z + Z v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeParam {
    pub v: Cx,
}

fn check_base(w: Cx) -> Result<f64> {
    ensure_finite(w, "base coordinate")?;
    let m = w.norm();
    if !(m > 0.0 && m < 1.0) {
        return Err(GeomError::Domain(format!("need 0 < |w| < 1, got |w| = {m}")));
    }
    Ok(m)
}

/// Canonical representative of the orbit of `(z, w)`.
pub fn reduce(z: Cx, w: Cx) -> Result<QuotientPoint> {
    ensure_finite(z, "fiber coordinate")?;
    let mw = check_base(w)?;
    if z.norm() == 0.0 {
        return Err(GeomError::Domain("fiber coordinate must be nonzero".into()));
    }
    // need 0 <= ln|z| / ln|w| + n < 1
    let t = z.norm().ln() / mw.ln();
    let mut n = -t.floor() as i64;
    let mut out = z * powi(w, n);
    // rounding at the two boundary circles
    for _ in 0..4 {
        if out.norm() > 1.0 {
            n += 1;
        } else if out.norm() <= mw {
            n -= 1;
        } else {
            break;
        }
        out = z * powi(w, n);
    }
    ensure_finite(out, "reduce")?;
    Ok(QuotientPoint { z: out, w, shift: n })
}

pub(crate) fn powi(w: Cx, n: i64) -> Cx {
    let p = w.powi(n.unsigned_abs() as i32);
    if n < 0 {
        p.inv()
    } else {
        p
    }
}

/// `v = arg(w)/2 pi - i log|w| / 2 pi` with `arg w` taken in `[0, 2 pi)`.
pub fn lattice_param(w: Cx) -> Result<LatticeParam> {
    let m = check_base(w)?;
    let mut arg = w.im.atan2(w.re);
    if arg < 0.0 {
        arg += TAU;
    }
    if arg >= TAU {
        arg = 0.0;
    }
    Ok(LatticeParam {
        v: Cx::new(arg / TAU, -m.ln() / TAU),
    })
}

/// Moves `v` into `|Re v| <= 1/2, |v| >= 1` by translations and inversions.
pub fn reduce_to_fundamental_domain(mut v: Cx) -> Result<Cx> {
    if !(v.im > 0.0) {
        return Err(GeomError::Domain(format!("lattice parameter must lie in the upper half-plane, got {v}")));
    }
    for _ in 0..10_000 {
        v.re -= v.re.round();
        if v.norm_sqr() < 1.0 - 1e-15 {
            v = -v.inv();
        } else {
            return Ok(v);
        }
    }
    Err(GeomError::Domain("lattice reduction did not terminate".into()))
}

/// `c(1), ..., c(J_TERMS)` in `j(q) = 1/q + 744 + sum c(n) q^n`, computed as
/// `E4(q)^3 / (q prod (1 - q^n)^24)`.
pub fn j_coefficients() -> &'static [f64] {
    static COEFFS: OnceLock<Vec<f64>> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let len = J_TERMS + 2;
        // E4 = 1 + 240 sum sigma_3(n) q^n
        let mut e4 = vec![0u128; len];
        e4[0] = 1;
        for (n, c) in e4.iter_mut().enumerate().skip(1) {
            let s3: u128 = (1..=n as u128).filter(|d| n as u128 % d == 0).map(|d| d * d * d).sum();
            *c = 240 * s3;
        }
        let e4sq = convolve_u128(&e4, &e4);
        let e4cube = convolve_u128(&e4sq, &e4);
        // 1 / prod (1 - q^n)^24 has nonnegative coefficients
        let mut inv_eta24 = vec![0u128; len];
        inv_eta24[0] = 1;
        for n in 1..len {
            for _ in 0..24 {
                for k in n..len {
                    inv_eta24[k] += inv_eta24[k - n];
                }
            }
        }
        // both factors are nonnegative, so the f64 convolution has no cancellation
        let mut prod = vec![0f64; len];
        for (i, a) in e4cube.iter().enumerate() {
            for (k, b) in inv_eta24.iter().enumerate().take(len - i) {
                prod[i + k] += *a as f64 * *b as f64;
            }
        }
        // prod[m] is the coefficient of q^(m-1) in j
        prod[2..].to_vec()
    })
}

fn convolve_u128(a: &[u128], b: &[u128]) -> Vec<u128> {
    let len = a.len();
    let mut out = vec![0u128; len];
    for i in 0..len {
        for k in 0..len - i {
            out[i + k] += a[i] * b[k];
        }
    }
    out
}

/// Bound on `sum_{n > J_TERMS} c(n) |q|^n` from `c(n) <= exp(4 pi sqrt n)`.
pub fn j_tail_bound(q_abs: f64) -> f64 {
    let mut sum = 0.0;
    for n in (J_TERMS + 1)..(J_TERMS + 4000) {
        let t = (4.0 * PI * (n as f64).sqrt() + n as f64 * q_abs.ln()).exp();
        sum += t;
        if t < 1e-30 * sum.max(f64::MIN_POSITIVE) || t == 0.0 {
            break;
        }
    }
    sum
}

/// `j` of the lattice `Z + Z v`, with the certified relative tail bound.
pub fn j_of_tau(v: Cx) -> Result<(Cx, f64)> {
    let v = reduce_to_fundamental_domain(v)?;
    let q = (Cx::new(0.0, TAU) * v).exp();
    let mut sum = Cx::new(0.0, 0.0);
    let mut p = q;
    for c in j_coefficients() {
        sum += *c * p;
        p *= q;
    }
    let j = q.inv() + 744.0 + sum;
    let rel_tail = j_tail_bound(q.norm()) / j.norm().max(1.0);
    ensure_finite(j, "j")?;
    Ok((j, rel_tail))
}

/// `j` of the fiber torus over `w` without the certification radius check.
pub fn j_torus_uncertified(w: Cx) -> Result<Cx> {
    let v = lattice_param(w)?.v;
    Ok(j_of_tau(v)?.0)
}

/// `j` of the fiber torus `T_w = C* / w^Z`, defined for `0 < |w| <= J_CERTIFIED_RADIUS`.
pub fn j_torus(w: Cx) -> Result<Cx> {
    let m = check_base(w)?;
    if m > J_CERTIFIED_RADIUS {
        return Err(GeomError::ConvergenceMargin {
            what: "w",
            modulus: m,
            bound: J_CERTIFIED_RADIUS,
        });
    }
    let (j, tail) = j_of_tau(lattice_param(w)?.v)?;
    if tail > J_TAIL_TOL {
        return Err(GeomError::ConvergenceMargin {
            what: "reduced q",
            modulus: m,
            bound: J_CERTIFIED_RADIUS,
        });
    }
    Ok(j)
}

/// Decides `T_w ~ T_w'` by comparing `j` at relative tolerance `tol`.
pub fn tori_isomorphic(w: Cx, w2: Cx, tol: f64) -> Result<bool> {
    let a = j_torus(w)?;
    let b = j_torus(w2)?;
    Ok((a - b).norm() <= tol * (1.0 + a.norm()))
}
