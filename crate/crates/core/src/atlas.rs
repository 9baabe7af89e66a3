//! The assembled surface: the quotient chart over `|w| < rho1` glued to the
//! product chart `Delta(1, rho2) x Delta(1/rho0)` along the attaching map,
//! the projection to the Riemann sphere, fiber types, and the invariants that
//! tell two parameter choices apart.

use std::f64::consts::TAU;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::numerics::{annulus_modulus, cr_residual, principal_log, Cx, ModuliParams, DEFAULT_CR_STEP};
use crate::quotient::{j_torus_uncertified, reduce, QuotientPoint, J_CERTIFIED_RADIUS};
use crate::transition::{glue_lift, glue_map, unglue};
use crate::weierstrass::WeierstrassFiber;

/// Parameters compare equal below this difference.
pub const PARAM_TOL: f64 = 1e-12;

/// Real points sampled when checking that `j` increases along a segment.
const MONOTONE_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "chart", rename_all = "snake_case")]
pub enum AtlasPoint {
    /// Quotient coordinates, used for `rho1 / 2 <= |w| < rho1`.
    Quotient(QuotientPoint),
    /// Affine point `(x, y)` of the cubic over `tau`, used for `|tau| < rho1 / 2`.
    Weierstrass { tau: Cx, x: Cx, y: Cx },
    Product { z: Cx, u: Cx },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseChart {
    /// Coordinate `w` on `Delta(rho1)`.
    D1,
    /// Coordinate `u = 1/w` on `Delta(1/rho0)`.
    D2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cp1Point {
    pub chart: BaseChart,
    pub coord: Cx,
}

impl Cp1Point {
    pub fn d1(w: Cx, params: &ModuliParams) -> Result<Self> {
        if !(w.norm() < params.rho1()) {
            return Err(GeomError::Domain(format!("|w| = {} is not below rho1", w.norm())));
        }
        Ok(Self { chart: BaseChart::D1, coord: w })
    }

    pub fn d2(u: Cx, params: &ModuliParams) -> Result<Self> {
        if !(u.norm() < 1.0 / params.rho0()) {
            return Err(GeomError::Domain(format!("|u| = {} is not below 1/rho0", u.norm())));
        }
        Ok(Self { chart: BaseChart::D2, coord: u })
    }

    /// The point as a value of `w` on the sphere; `None` at infinity.
    pub fn w(&self) -> Option<Cx> {
        match self.chart {
            BaseChart::D1 => Some(self.coord),
            BaseChart::D2 if self.coord == Cx::new(0.0, 0.0) => None,
            BaseChart::D2 => Some(self.coord.inv()),
        }
    }

    /// Re-expresses the point in the other chart when it lies in the overlap.
    pub fn transport(&self, params: &ModuliParams) -> Option<Self> {
        let other = match self.chart {
            BaseChart::D1 => Self::d2(self.coord.inv(), params),
            BaseChart::D2 => Self::d1(self.coord.inv(), params),
        };
        other.ok().filter(|_| self.coord != Cx::new(0.0, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum FiberClass {
    NodalSphere,
    Torus { w: Cx },
    Annulus { u: Cx },
}

impl FiberClass {
    pub fn label(&self) -> &'static str {
        match self {
            FiberClass::NodalSphere => "nodal_sphere",
            FiberClass::Torus { .. } => "torus",
            FiberClass::Annulus { .. } => "annulus",
        }
    }
}

pub fn base_map(p: &AtlasPoint) -> Cp1Point {
    match *p {
        AtlasPoint::Quotient(q) => Cp1Point { chart: BaseChart::D1, coord: q.w },
        AtlasPoint::Weierstrass { tau, .. } => Cp1Point { chart: BaseChart::D1, coord: tau },
        AtlasPoint::Product { u, .. } => Cp1Point { chart: BaseChart::D2, coord: u },
    }
}

pub fn classify_fiber(c: &Cp1Point, params: &ModuliParams) -> FiberClass {
    match c.chart {
        BaseChart::D1 if c.coord == Cx::new(0.0, 0.0) => FiberClass::NodalSphere,
        BaseChart::D1 if c.coord.norm() < params.rho1() => FiberClass::Torus { w: c.coord },
        BaseChart::D1 => FiberClass::Annulus { u: c.coord.inv() },
        BaseChart::D2 if c.coord.norm() * params.rho1() > 1.0 => FiberClass::Torus { w: c.coord.inv() },
        BaseChart::D2 => FiberClass::Annulus { u: c.coord },
    }
}

/// Deterministic points of the fiber over `c`, in whichever chart presents it.
pub fn sample_atlas_fiber(c: &Cp1Point, n: usize, params: &ModuliParams, seed: u64) -> Result<(FiberClass, Vec<AtlasPoint>)> {
    let class = classify_fiber(c, params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    match class {
        FiberClass::Torus { w } if w.norm() >= params.rho1() / 2.0 => {
            let lw = w.norm().ln();
            for _ in 0..n {
                let t: f64 = rng.random();
                let z = Cx::from_polar((t * lw).exp(), rng.random::<f64>() * TAU);
                out.push(AtlasPoint::Quotient(reduce(z, w)?));
            }
        }
        FiberClass::Torus { w: tau } => weierstrass_points(tau, n, &mut rng, &mut out)?,
        FiberClass::NodalSphere => weierstrass_points(Cx::new(0.0, 0.0), n, &mut rng, &mut out)?,
        FiberClass::Annulus { u } => {
            for _ in 0..n {
                let z = sample_annulus(&mut rng, 1.0, params.rho2());
                out.push(AtlasPoint::Product { z, u });
            }
        }
    }
    Ok((class, out))
}

fn weierstrass_points(tau: Cx, n: usize, rng: &mut ChaCha8Rng, out: &mut Vec<AtlasPoint>) -> Result<()> {
    let cubic = WeierstrassFiber::new(tau)?;
    for _ in 0..n {
        let x = Cx::from_polar(rng.random::<f64>().sqrt(), rng.random::<f64>() * TAU);
        let (x, y) = cubic.point_over(x, rng.random());
        out.push(AtlasPoint::Weierstrass { tau, x, y });
    }
    Ok(())
}

pub fn write_atlas_fiber_csv<W: Write>(out: &mut W, class: &FiberClass, points: &[AtlasPoint]) -> std::io::Result<()> {
    writeln!(out, "class,chart,base_re,base_im,a_re,a_im,b_re,b_im")?;
    for p in points {
        let (chart, a, b) = match *p {
            AtlasPoint::Quotient(q) => ("quotient", q.z, q.w),
            AtlasPoint::Weierstrass { x, y, .. } => ("weierstrass", x, y),
            AtlasPoint::Product { z, u } => ("product", z, u),
        };
        let base = base_map(p).coord;
        writeln!(
            out,
            "{},{},{:?},{:?},{:?},{:?},{:?},{:?}",
            class.label(),
            chart,
            base.re,
            base.im,
            a.re,
            a.im,
            b.re,
            b.im
        )?;
    }
    Ok(())
}

/// A sample at which one of the consistency checks failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyFailure {
    pub check: &'static str,
    pub z: Cx,
    pub u: Cx,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub samples: usize,
    pub seed: u64,
    pub round_trip: f64,
    pub base_mismatch: f64,
    pub cr_z: f64,
    pub cr_u: f64,
    pub failures: Vec<ConsistencyFailure>,
}

impl ConsistencyReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Tolerances of [`chart_consistency_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyTol {
    pub round_trip: f64,
    pub cr: f64,
    pub cr_step: f64,
}

impl Default for ConsistencyTol {
    fn default() -> Self {
        Self {
            round_trip: 1e-8,
            cr: 1e-6,
            cr_step: DEFAULT_CR_STEP,
        }
    }
}

/// Uniform point of the open annulus `a < |z| < b` by area.
pub fn sample_annulus<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> Cx {
    loop {
        let r = (a * a + (b * b - a * a) * rng.random::<f64>()).sqrt();
        if a < r && r < b {
            return Cx::from_polar(r, rng.random::<f64>() * TAU);
        }
    }
}

/// Evidence that the two charts form a complex manifold: on random overlap
/// samples the attaching map inverts, preserves the base exactly, and is
/// holomorphic in the fiber and base variables.
pub fn chart_consistency_check(params: &ModuliParams, samples: usize, seed: u64, tol: ConsistencyTol) -> Result<ConsistencyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ConsistencyReport {
        samples,
        seed,
        round_trip: 0.0,
        base_mismatch: 0.0,
        cr_z: 0.0,
        cr_u: 0.0,
        failures: Vec::new(),
    };
    let fiber = params.fiber_annulus();
    let over = params.overlap_u();
    for _ in 0..samples {
        let z = sample_annulus(&mut rng, fiber.r_in, fiber.r_out);
        let u = sample_annulus(&mut rng, over.r_in, over.r_out);
        let mut record = |check, dev: f64, bound: f64, slot: &mut f64| {
            *slot = slot.max(dev);
            if !(dev <= bound) {
                rep.failures.push(ConsistencyFailure { check, z, u, deviation: dev });
            }
        };

        let q = glue_map(z, u, params)?;
        let (z2, u2) = unglue(&q, params)?;
        let dev = (z2 - z).norm().max((u2 - u).norm());
        record("round_trip", dev, tol.round_trip, &mut rep.round_trip);

        let here = base_map(&AtlasPoint::Product { z, u });
        let there = base_map(&AtlasPoint::Quotient(q));
        let moved = here.transport(params).map(|c| c.coord);
        let dev = match moved {
            Some(w) if w == there.coord => 0.0,
            Some(w) => (w - there.coord).norm().max(f64::MIN_POSITIVE),
            None => f64::INFINITY,
        };
        record("base", dev, 0.0, &mut rep.base_mismatch);

        let w = u.inv();
        let l0 = principal_log(w);
        let rz = cr_residual(|s| glue_lift(s, u, u, l0, q.shift), z, tol.cr_step)?;
        record("cr_z", rz, tol.cr, &mut rep.cr_z);
        let ru = cr_residual(|s| glue_lift(z, s, u, l0, q.shift), u, tol.cr_step)?;
        record("cr_u", ru, tol.cr, &mut rep.cr_u);
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// The fiber annuli `Delta(1, rho2)` have different conformal moduli.
    AnnulusModulus { lower: f64, upper: f64 },
    /// The torus over the real point `witness` of the larger family has a
    /// `j`-value above every `j` along the real radius `[from, smaller_rho1)`
    /// of the smaller family, on which `j` was checked to increase.
    TorusFamily {
        smaller_rho1: f64,
        larger_rho1: f64,
        witness: f64,
        j_witness: f64,
        j_edge: f64,
        from: f64,
        certified: bool,
    },
}

impl Certificate {
    /// Whether the certificate's own evidence holds up.
    pub fn is_valid(&self) -> bool {
        match *self {
            Certificate::AnnulusModulus { lower, upper } => lower < upper,
            Certificate::TorusFamily {
                smaller_rho1,
                larger_rho1,
                witness,
                j_witness,
                j_edge,
                certified,
                ..
            } => {
                let ordered = smaller_rho1 < witness && witness < larger_rho1;
                ordered && (!certified || j_witness > j_edge)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", content = "certificates", rename_all = "snake_case")]
pub enum Verdict {
    Equivalent,
    Distinct(Vec<Certificate>),
}

fn sorted(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn torus_certificate(small: f64, large: f64) -> Result<Certificate> {
    let witness = 0.5 * (small + large);
    // j on the real axis decreases up to exp(-2 pi) and increases after it
    let from = (0.01f64).min(small / 2.0);
    let certified = large <= J_CERTIFIED_RADIUS && from > 2.0 * (-TAU).exp();
    let j_witness = j_torus_uncertified(Cx::new(witness, 0.0))?.re;
    let mut j_edge = f64::NEG_INFINITY;
    let mut monotone = true;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=MONOTONE_SAMPLES {
        let t = from + (small - from) * i as f64 / MONOTONE_SAMPLES as f64;
        let j = j_torus_uncertified(Cx::new(t, 0.0))?.re;
        monotone &= j > prev;
        prev = j;
        j_edge = j_edge.max(j);
    }
    Ok(Certificate::TorusFamily {
        smaller_rho1: small,
        larger_rho1: large,
        witness,
        j_witness,
        j_edge,
        from,
        certified: certified && monotone,
    })
}

/// Decides whether two parameter choices give biholomorphic surfaces;
/// `rho0` does not enter.
pub fn distinguish(a: &ModuliParams, b: &ModuliParams) -> Result<Verdict> {
    let mut certs = Vec::new();
    let ma = annulus_modulus(a.fiber_annulus())?;
    let mb = annulus_modulus(b.fiber_annulus())?;
    if (ma - mb).abs() > PARAM_TOL {
        let (lower, upper) = sorted(ma, mb);
        certs.push(Certificate::AnnulusModulus { lower, upper });
    }
    if (a.rho1() - b.rho1()).abs() > PARAM_TOL {
        let (small, large) = sorted(a.rho1(), b.rho1());
        certs.push(torus_certificate(small, large)?);
    }
    Ok(if certs.is_empty() {
        Verdict::Equivalent
    } else {
        Verdict::Distinct(certs)
    })
}
