//! The verification run behind `nonkahler verify`: every numerically
//! checkable identity of the construction, evaluated on seeded samples and
//! collected into a versioned, byte-deterministic report.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::atlas::{chart_consistency_check, distinguish, sample_annulus, ConsistencyTol, Verdict};
use crate::error::{GeomError, Result};
use crate::monodromy::{
    dehn_twist, euler_characteristic, gluing_action, FibrationDescriptor, Handedness, TwistCurve, LONGITUDE, MERIDIAN,
};
use crate::numerics::{cr_residual, principal_log, Cx, ModuliParams, DEFAULT_CR_STEP};
use crate::quotient::j_torus;
use crate::sphere::{critical_set_search, f_prime, sample_fiber, uniform_s4, S2Point};
use crate::transition::{
    glue_lift, glue_map, glue_map_with_branch, in_region_y, longitude_monodromy, phi, phi_near, DEFAULT_STEPS_PER_TURN,
};
use crate::weierstrass::{
    g2_series, g3_series, is_singular_fiber, j_from_weierstrass, WeierstrassFiber, DEFAULT_SERIES_TOL,
};

pub const SCHEMA_VERSION: u32 = 1;

const CRITICAL_RESOLUTION: f64 = 0.1;
const CRITICAL_CROSS_RESOLUTION: f64 = 0.2;
const CRITICAL_REFINE_TOL: f64 = 1e-10;
const SERIES_POINTS: [(f64, f64); 4] = [(0.05, 0.0), (0.1, 0.0), (0.2, 0.0), (0.1, 0.1)];
const DIRECT_TERMS: usize = 200;
const J_DISK: f64 = 0.3;
const GRID_RHO1: [f64; 4] = [0.15, 0.2, 0.25, 0.3];
const GRID_RHO2: [f64; 4] = [1.2, 1.5, 2.0, 2.5];

/// Sample counts by suite key, with defaults.
pub const SAMPLE_KEYS: [(&str, usize); 8] = [
    ("sphere", 1_000_000),
    ("fiber", 200),
    ("nonsingular", 1000),
    ("j", 50),
    ("branch", 1000),
    ("glue", 1000),
    ("cr", 200),
    ("monodromy", 16),
];

/// Tolerances by key, with defaults.
pub const TOL_KEYS: [(&str, f64); 13] = [
    ("sphere", 1e-12),
    ("fiber", 1e-9),
    ("critical", 1e-6),
    ("series", 1e-12),
    ("nodal", 1e-14),
    ("discriminant", 1e-9),
    ("j", 1e-6),
    ("branch", 1e-12),
    ("modulus", 1e-12),
    ("glue", 1e-12),
    ("roundtrip", 1e-8),
    ("cr", 1e-6),
    ("ratio", 0.5),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: ModuliParams,
    pub seed: u64,
    pub samples: BTreeMap<String, usize>,
    pub tol: BTreeMap<String, f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModuliParams::default(),
            seed: 0,
            samples: SAMPLE_KEYS.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            tol: TOL_KEYS.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

impl RunConfig {
    pub fn set_samples(&mut self, key: &str, n: usize) -> Result<()> {
        let slot = self
            .samples
            .get_mut(key)
            .ok_or_else(|| GeomError::Domain(format!("unknown sample key '{key}'")))?;
        if n == 0 {
            return Err(GeomError::Domain(format!("samples.{key} must be at least 1")));
        }
        *slot = n;
        Ok(())
    }

    pub fn set_all_samples(&mut self, n: usize) -> Result<()> {
        let keys: Vec<String> = self.samples.keys().cloned().collect();
        keys.iter().try_for_each(|k| self.set_samples(k, n))
    }

    pub fn set_tol(&mut self, key: &str, v: f64) -> Result<()> {
        let slot = self
            .tol
            .get_mut(key)
            .ok_or_else(|| GeomError::Domain(format!("unknown tolerance '{key}'")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(GeomError::Domain(format!("tol.{key} must be positive and finite, got {v}")));
        }
        *slot = v;
        Ok(())
    }

    fn n(&self, key: &str) -> usize {
        self.samples[key]
    }

    fn t(&self, key: &str) -> f64 {
        self.tol[key]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub samples: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: u64,
}

fn record(name: &str, samples: usize, dev: f64, tol: f64, seed: u64) -> CheckRecord {
    CheckRecord {
        name: name.to_string(),
        samples,
        max_deviation: dev,
        tolerance: tol,
        pass: dev <= tol,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: u32,
    pub params: ModuliParams,
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
    pub pass: bool,
}

impl Report {
    pub fn checks(&self) -> impl Iterator<Item = &CheckRecord> {
        self.suites.iter().flat_map(|s| s.checks.iter())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

type Suite = fn(&RunConfig, u64) -> Result<Vec<CheckRecord>>;

const SUITES: [(&str, Suite); 6] = [
    ("sphere", sphere_suite),
    ("weierstrass", weierstrass_suite),
    ("transition", transition_suite),
    ("gluing", gluing_suite),
    ("monodromy", monodromy_suite),
    ("distinguish", distinguish_suite),
];

/// Runs every suite, concurrently, with seed `cfg.seed + suite index`.
pub fn run_all(cfg: &RunConfig) -> Result<Report> {
    let results: Vec<Result<Vec<CheckRecord>>> = thread::scope(|s| {
        let handles: Vec<_> = SUITES
            .iter()
            .enumerate()
            .map(|(i, (_, suite))| {
                let seed = cfg.seed.wrapping_add(i as u64);
                s.spawn(move || suite(cfg, seed))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("suite panicked")).collect()
    });
    let mut suites = Vec::with_capacity(SUITES.len());
    for ((name, _), checks) in SUITES.iter().zip(results) {
        let checks = checks?;
        suites.push(SuiteReport {
            suite: name.to_string(),
            pass: checks.iter().all(|c| c.pass),
            checks,
        });
    }
    Ok(Report {
        schema: SCHEMA_VERSION,
        params: cfg.params,
        seed: cfg.seed,
        pass: suites.iter().all(|s| s.pass),
        suites,
    })
}

fn sphere_suite(cfg: &RunConfig, seed: u64) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n("sphere");
    let mut dev: f64 = 0.0;
    for _ in 0..n {
        let img = f_prime(&uniform_s4(&mut rng))?;
        dev = dev.max((img.z.norm_sqr() + img.x * img.x - 1.0).abs());
    }
    out.push(record("sphere_image_identity", n, dev, cfg.t("sphere"), seed));

    let n = cfg.n("fiber");
    let target = S2Point::new(Cx::new(0.0, 0.0), 1.0)?;
    let fib = sample_fiber(target, n, seed)?;
    let mut dev: f64 = if fib.is_complete() { 0.0 } else { f64::INFINITY };
    for p in &fib.points {
        dev = dev.max(f_prime(p)?.chord(&target));
    }
    out.push(record("fiber_residual", n, dev, cfg.t("fiber"), seed));

    let fine = critical_set_search(CRITICAL_RESOLUTION, CRITICAL_REFINE_TOL)?;
    let dev = match fine.as_slice() {
        [a, b] => a.image.chord(&b.image),
        _ => f64::INFINITY,
    };
    out.push(record("critical_clusters", fine.len(), dev, cfg.t("critical"), seed));

    let coarse = critical_set_search(CRITICAL_CROSS_RESOLUTION, CRITICAL_REFINE_TOL)?;
    let dev = if coarse.len() == fine.len() {
        fine.iter()
            .zip(&coarse)
            .map(|(a, b)| {
                let (a, b) = (a.center.to_array(), b.center.to_array());
                a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    out.push(record("critical_resolution_stability", coarse.len(), dev, cfg.t("critical"), seed));
    Ok(out)
}

/// `sum_{n <= terms} c(n) tau^n / (1 - tau^n)` in plain double precision.
fn lambert_direct(tau: Cx, terms: usize, c: impl Fn(f64) -> f64) -> Cx {
    let mut sum = Cx::new(0.0, 0.0);
    let mut p = Cx::new(1.0, 0.0);
    for n in 1..=terms {
        p *= tau;
        sum += c(n as f64) * p / (1.0 - p);
    }
    sum
}

/// `tau prod (1 - tau^n)^24`, the product form of the discriminant.
fn eta_product(tau: Cx) -> Cx {
    let mut prod = Cx::new(1.0, 0.0);
    let mut p = Cx::new(1.0, 0.0);
    for _ in 0..400 {
        p *= tau;
        prod *= (1.0 - p).powi(24);
        if p.norm() < 1e-20 {
            break;
        }
    }
    tau * prod
}

fn disk_point<R: Rng + ?Sized>(rng: &mut R, r: f64) -> Cx {
    Cx::from_polar(r * rng.random::<f64>().sqrt(), rng.random::<f64>() * TAU)
}

fn weierstrass_suite(cfg: &RunConfig, seed: u64) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    let zero = Cx::new(0.0, 0.0);
    let mut dev = g2_series(zero, DEFAULT_SERIES_TOL)?.norm().max(g3_series(zero, DEFAULT_SERIES_TOL)?.norm());
    for (re, im) in SERIES_POINTS {
        let tau = Cx::new(re, im);
        let g2 = lambert_direct(tau, DIRECT_TERMS, |n| 20.0 * n.powi(3));
        let g3 = lambert_direct(tau, DIRECT_TERMS, |n| (7.0 * n.powi(5) + 5.0 * n.powi(3)) / 3.0);
        dev = dev.max((g2_series(tau, DEFAULT_SERIES_TOL)? - g2).norm());
        dev = dev.max((g3_series(tau, DEFAULT_SERIES_TOL)? - g3).norm());
    }
    out.push(record("series_oracle", SERIES_POINTS.len() + 1, dev, cfg.t("series"), seed));

    let nodal = WeierstrassFiber::new(zero)?;
    let dev = [
        nodal.eval(zero, zero).norm(),
        nodal.fx(zero).norm(),
        nodal.fy(zero).norm(),
        (nodal.hessian_det(zero) + 4.0).norm(),
        is_singular_fiber(zero, cfg.t("nodal"))?.discriminant.norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    out.push(record("nodal_fiber", 1, dev, cfg.t("nodal"), seed));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n("nonsingular");
    let mut dev: f64 = 0.0;
    for _ in 0..n {
        let tau = disk_point(&mut rng, J_DISK);
        let d = is_singular_fiber(tau, 0.0)?.discriminant;
        let rel = if d == zero { f64::INFINITY } else { (d / eta_product(tau) - 1.0).norm() };
        dev = dev.max(rel);
    }
    out.push(record("discriminant_nonvanishing", n, dev, cfg.t("discriminant"), seed));

    let n = cfg.n("j");
    let mut dev: f64 = 0.0;
    for _ in 0..n {
        let tau = loop {
            let t = disk_point(&mut rng, J_DISK);
            if t != zero {
                break t;
            }
        };
        let a = j_from_weierstrass(tau)?;
        dev = dev.max((a - j_torus(tau)?).norm() / (1.0 + a.norm()));
    }
    out.push(record("j_cross_model", n, dev, cfg.t("j"), seed));
    Ok(out)
}

fn overlap_w_point<R: Rng + ?Sized>(rng: &mut R, p: &ModuliParams) -> Cx {
    let a = p.overlap_w();
    sample_annulus(rng, a.r_in, a.r_out)
}

fn transition_suite(cfg: &RunConfig, seed: u64) -> Result<Vec<CheckRecord>> {
    let p = &cfg.params;
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n("branch");

    let mut dev: f64 = 0.0;
    for _ in 0..n {
        let w = overlap_w_point(&mut rng, p);
        let k = rng.random_range(-5..=5);
        let next = phi(w, k + 1)?.value;
        dev = dev.max((next - w * phi(w, k)?.value).norm() / next.norm());
    }
    out.push(record("phi_branch_law", n, dev, cfg.t("branch"), seed));

    let mut dev: f64 = 0.0;
    for _ in 0..n {
        let rho = rng.random_range(p.rho0()..p.rho1());
        let theta = PI - TAU * rng.random::<f64>();
        let got = phi(Cx::from_polar(rho, theta), 0)?.value.norm();
        dev = dev.max((got - rho.powf(theta / TAU - 0.5)).abs());
    }
    out.push(record("phi_modulus_law", n, dev, cfg.t("modulus"), seed));

    let mut mismatches = 0usize;
    for _ in 0..n {
        let w = overlap_w_point(&mut rng, p);
        let z = sample_annulus(&mut rng, 0.5, 2.0 * p.rho2()) * phi(w, rng.random_range(-3..=3))?.value;
        let m: i32 = rng.random_range(-5..=5);
        let a = in_region_y(z, w, p)?;
        let b = in_region_y(z * w.powi(m), w, p)?;
        if a.map(|k| k + i64::from(m)) != b {
            mismatches += 1;
        }
    }
    out.push(record("region_y_invariance", n, mismatches as f64, 0.0, seed));

    let n = cfg.n("cr");
    let (mut cr, mut ratio): (f64, f64) = (0.0, 0.0);
    for _ in 0..n {
        let w = overlap_w_point(&mut rng, p);
        let l0 = principal_log(w);
        let f = |s: Cx| phi_near(s, w, l0);
        let r1 = cr_residual(f, w, DEFAULT_CR_STEP)?;
        let r2 = cr_residual(f, w, DEFAULT_CR_STEP / 2.0)?;
        cr = cr.max(r1);
        ratio = ratio.max((r1 / r2 - 4.0).abs());
    }
    out.push(record("phi_cr_residual", n, cr, cfg.t("cr"), seed));
    out.push(record("phi_cr_order", n, ratio, cfg.t("ratio"), seed));
    Ok(out)
}

fn gluing_suite(cfg: &RunConfig, seed: u64) -> Result<Vec<CheckRecord>> {
    let p = &cfg.params;
    let mut out = Vec::new();
    let n = cfg.n("glue");
    let tol = ConsistencyTol {
        round_trip: cfg.t("roundtrip"),
        cr: cfg.t("cr"),
        cr_step: DEFAULT_CR_STEP,
    };
    let rep = chart_consistency_check(p, n, seed, tol)?;
    out.push(record("glue_round_trip", n, rep.round_trip, tol.round_trip, seed));
    out.push(record("glue_base_compatibility", n, rep.base_mismatch, 0.0, seed));
    out.push(record("glue_cr_fiber", n, rep.cr_z, tol.cr, seed));
    out.push(record("glue_cr_base", n, rep.cr_u, tol.cr, seed));

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bd1_e995);
    let fiber = p.fiber_annulus();
    let over = p.overlap_u();
    let mut dev: f64 = 0.0;
    for _ in 0..n {
        let z = sample_annulus(&mut rng, fiber.r_in, fiber.r_out);
        let u = sample_annulus(&mut rng, over.r_in, over.r_out);
        let k = rng.random_range(-5..=5);
        let a = glue_map(z, u, p)?;
        let b = glue_map_with_branch(z, u, k, p)?;
        let d = if b.shift - a.shift == -k { (a.z - b.z).norm() } else { f64::INFINITY };
        dev = dev.max(d);
    }
    out.push(record("glue_branch_independence", n, dev, cfg.t("glue"), seed));

    let n = cfg.n("cr");
    let mut ratio: f64 = 0.0;
    for _ in 0..n {
        let z = sample_annulus(&mut rng, fiber.r_in, fiber.r_out);
        let u = sample_annulus(&mut rng, over.r_in, over.r_out);
        let q = glue_map(z, u, p)?;
        let l0 = principal_log(u.inv());
        let f = |s: Cx| glue_lift(z, s, u, l0, q.shift);
        let r1 = cr_residual(f, u, DEFAULT_CR_STEP)?;
        let r2 = cr_residual(f, u, DEFAULT_CR_STEP / 2.0)?;
        ratio = ratio.max((r1 / r2 - 4.0).abs());
    }
    out.push(record("glue_cr_order", n, ratio, cfg.t("ratio"), seed));
    Ok(out)
}

fn monodromy_suite(cfg: &RunConfig, seed: u64) -> Result<Vec<CheckRecord>> {
    let p = &cfg.params;
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n("monodromy");
    let mut dev: i64 = 0;
    for _ in 0..n {
        let rho = rng.random_range(p.rho0()..p.rho1());
        let z0 = sample_annulus(&mut rng, 1.0, p.rho2());
        for turns in [1, -1, 2] {
            let got = longitude_monodromy(rho, z0, turns, DEFAULT_STEPS_PER_TURN, p)?.winding;
            dev = dev.max((got - gluing_action().repeat(turns).framing).abs());
        }
    }
    out.push(record("longitude_winding", n, dev as f64, 0.0, seed));

    let d = dehn_twist(TwistCurve::Meridian, Handedness::Right);
    let e = dehn_twist(TwistCurve::Meridian, Handedness::Left);
    let mut failures = 0u32;
    failures += u32::from(d.det() != 1 || e.det() != 1 || gluing_action().fiber_action.det() != 1);
    failures += u32::from((d * e).matrix() != [[1, 0], [0, 1]]);
    failures += u32::from(d.apply(MERIDIAN) != MERIDIAN);
    for k in -5..=5 {
        let dk = d.pow(k);
        failures += u32::from(dk.det() != 1 || dk.apply(LONGITUDE) != [i64::from(k), 1]);
        for l in -5..=5 {
            failures += u32::from(dk * d.pow(l) != d.pow(k + l));
        }
    }
    failures += u32::from(euler_characteristic(&FibrationDescriptor::four_sphere()) != 2);
    failures += u32::from(gluing_action().then(gluing_action()).framing != 2);
    out.push(record("symbolic_identities", 1, f64::from(failures), 0.0, seed));
    Ok(out)
}

fn distinguish_suite(_cfg: &RunConfig, seed: u64) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    let mut grid = Vec::new();
    for r1 in GRID_RHO1 {
        for r2 in GRID_RHO2 {
            grid.push(ModuliParams::new(0.1, r1, r2)?);
        }
    }
    let mut wrong = 0u32;
    for (i, a) in grid.iter().enumerate() {
        for (k, b) in grid.iter().enumerate() {
            let v = distinguish(a, b)?;
            let ok = match &v {
                Verdict::Equivalent => i == k,
                Verdict::Distinct(certs) => i != k && certs.iter().all(|c| c.is_valid()),
            };
            wrong += u32::from(!ok || v != distinguish(b, a)?);
        }
    }
    out.push(record("distinguish_grid", grid.len() * grid.len(), f64::from(wrong), 0.0, seed));

    let mut wrong = 0u32;
    for a in &grid {
        for rho0 in [0.01, 0.05, 0.1] {
            let b = ModuliParams::new(rho0, a.rho1(), a.rho2())?;
            wrong += u32::from(distinguish(a, &b)? != Verdict::Equivalent);
        }
    }
    out.push(record("rho0_independence", grid.len() * 3, f64::from(wrong), 0.0, seed));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.set_all_samples(20).unwrap();
        cfg
    }

    #[test]
    fn config_validation() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set_tol("cr", 0.0).is_err());
        assert!(cfg.set_tol("nope", 1.0).is_err());
        assert!(cfg.set_samples("glue", 0).is_err());
        cfg.set_tol("cr", 1e-3).unwrap();
        assert_eq!(cfg.t("cr"), 1e-3);
    }

    #[test]
    fn report_is_deterministic_and_consistent() {
        let cfg = small();
        let a = run_all(&cfg).unwrap();
        let b = run_all(&cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.schema, 1);
        assert_eq!(a.pass, a.checks().all(|c| c.pass));
        for s in &a.suites {
            assert_eq!(s.pass, s.checks.iter().all(|c| c.pass));
        }
    }
}
