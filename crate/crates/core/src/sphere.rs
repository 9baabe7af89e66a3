//! The sphere-level map `f' = h o (suspension of h) : S^4 -> S^2` built from
//! the Hopf fibration, with image certification, a brute-force search for
//! its critical set, and Newton sampling of its fibers.
//!
//! `S^4` is the unit sphere of `C^2 x R` with coordinates `(z1, z2, x)` and
//! `S^2` the unit sphere of `C x R`. In closed form
//!
//! ```text
//! f'(z1, z2, x) = (4 z1 conj(z2) (|z1|^2 - |z2|^2 - i x sqrt(2 - x^2)), 8 |z1|^2 |z2|^2 - 1)
//! ```
//!
//! and with `a = |z1|^2`, `b = |z2|^2`, `a + b + x^2 = 1` the image lies on
//! `S^2` because `16 ab (1 - 4ab) + (8ab - 1)^2 = 1`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::numerics::Cx;

/// Allowed defect of the sphere equations on inputs.
pub const SPHERE_TOL: f64 = 1e-12;

/// Chordal distance below which a point counts as lying on a fiber.
pub const FIBER_TOL: f64 = 1e-9;

const NEWTON_MAX_ITERS: usize = 60;
const NEWTON_MAX_HALVINGS: usize = 30;
const NEWTON_DAMPING: f64 = 0.5;
const SEED_MAX_CHORD: f64 = 1.0;
const SEED_DRAWS_PER_ATTEMPT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct S4Point {
    pub z1: Cx,
    pub z2: Cx,
    pub x: f64,
}

impl S4Point {
    pub fn new(z1: Cx, z2: Cx, x: f64) -> Result<Self> {
        let p = Self { z1, z2, x };
        p.check()?;
        Ok(p)
    }

    /// Radially projects a nonzero vector of `R^5` onto the sphere.
    pub fn from_unnormalized(v: [f64; 5]) -> Result<Self> {
        let n = norm(&v);
        if !(n > 0.0 && n.is_finite()) {
            return Err(GeomError::Domain("cannot project the zero vector onto S^4".into()));
        }
        Ok(Self::from_array(scale(&v, 1.0 / n)))
    }

    pub fn defect(&self) -> f64 {
        (self.z1.norm_sqr() + self.z2.norm_sqr() + self.x * self.x - 1.0).abs()
    }

    fn check(&self) -> Result<()> {
        let d = self.defect();
        if d <= SPHERE_TOL {
            Ok(())
        } else {
            Err(GeomError::Domain(format!("point is off S^4 by {d:e}")))
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.z1.re, self.z1.im, self.z2.re, self.z2.im, self.x]
    }

    fn from_array(v: [f64; 5]) -> Self {
        Self {
            z1: Cx::new(v[0], v[1]),
            z2: Cx::new(v[2], v[3]),
            x: v[4],
        }
    }

    /// `(|z1|, |z2|, x)`: the point modulo the two phase rotations.
    pub fn radii(&self) -> (f64, f64, f64) {
        (self.z1.norm(), self.z2.norm(), self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct S2Point {
    pub z: Cx,
    pub x: f64,
}

impl S2Point {
    pub fn new(z: Cx, x: f64) -> Result<Self> {
        let p = Self { z, x };
        let d = p.defect();
        if d <= SPHERE_TOL {
            Ok(p)
        } else {
            Err(GeomError::Domain(format!("point is off S^2 by {d:e}")))
        }
    }

    pub fn defect(&self) -> f64 {
        (self.z.norm_sqr() + self.x * self.x - 1.0).abs()
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.z.re, self.z.im, self.x]
    }

    pub fn chord(&self, other: &S2Point) -> f64 {
        norm(&sub(&self.to_array(), &other.to_array()))
    }
}

/// Hopf map `S^3 -> S^2`, `(z1, z2) -> (2 z1 conj(z2), |z1|^2 - |z2|^2)`.
pub fn hopf(z1: Cx, z2: Cx) -> Result<S2Point> {
    let d = (z1.norm_sqr() + z2.norm_sqr() - 1.0).abs();
    if !(d <= SPHERE_TOL) {
        return Err(GeomError::Domain(format!("point is off S^3 by {d:e}")));
    }
    Ok(S2Point {
        z: 2.0 * z1 * z2.conj(),
        x: z1.norm_sqr() - z2.norm_sqr(),
    })
}

pub fn f_prime(p: &S4Point) -> Result<S2Point> {
    p.check()?;
    let [re, im, h] = eval(&p.to_array());
    Ok(S2Point { z: Cx::new(re, im), x: h })
}

// f' on raw coordinates (x1, y1, x2, y2, x) as a map into R^3.
fn eval(q: &[f64; 5]) -> [f64; 3] {
    let z1 = Cx::new(q[0], q[1]);
    let z2 = Cx::new(q[2], q[3]);
    let x = q[4];
    let a = z1.norm_sqr();
    let b = z2.norm_sqr();
    let s = (2.0 - x * x).sqrt();
    let f = 4.0 * z1 * z2.conj() * Cx::new(a - b, -x * s);
    [f.re, f.im, 8.0 * a * b - 1.0]
}

// Analytic 3x5 derivative of `eval`; rows are (Re F, Im F, h).
fn differential(q: &[f64; 5]) -> [[f64; 5]; 3] {
    let z1 = Cx::new(q[0], q[1]);
    let z2 = Cx::new(q[2], q[3]);
    let x = q[4];
    let a = z1.norm_sqr();
    let b = z2.norm_sqr();
    let s = (2.0 - x * x).sqrt();
    let p = z1 * z2.conj();
    let qv = Cx::new(a - b, -x * s);
    let i = Cx::new(0.0, 1.0);
    let dp = [z2.conj(), i * z2.conj(), z1, -i * z1, Cx::new(0.0, 0.0)];
    let dq = [
        Cx::new(2.0 * q[0], 0.0),
        Cx::new(2.0 * q[1], 0.0),
        Cx::new(-2.0 * q[2], 0.0),
        Cx::new(-2.0 * q[3], 0.0),
        Cx::new(0.0, -(2.0 - 2.0 * x * x) / s),
    ];
    let dh = [16.0 * q[0] * b, 16.0 * q[1] * b, 16.0 * a * q[2], 16.0 * a * q[3], 0.0];
    let mut out = [[0.0; 5]; 3];
    for k in 0..5 {
        let df = 4.0 * (dp[k] * qv + p * dq[k]);
        out[0][k] = df.re;
        out[1][k] = df.im;
        out[2][k] = dh[k];
    }
    out
}

/// 2x4 Jacobian of `f'` in orthonormal tangent frames of `S^4` at `p` and of
/// `S^2` at `f'(p)`. Returns the matrix and both frames.
fn frame_jacobian(q: &[f64; 5]) -> ([[f64; 4]; 2], Vec<[f64; 5]>, Vec<[f64; 3]>) {
    let y = eval(q);
    let src = tangent_frame(q);
    let dst = tangent_frame(&y);
    let d = differential(q);
    let mut j = [[0.0; 4]; 2];
    for (c, e) in src.iter().enumerate() {
        let mut img = [0.0; 3];
        for (r, row) in d.iter().enumerate() {
            img[r] = dot(row, e);
        }
        for (r, t) in dst.iter().enumerate() {
            j[r][c] = dot(&img, t);
        }
    }
    (j, src, dst)
}

/// Singular values `(sigma_max, sigma_min)` of the frame Jacobian at `q`.
fn singular_values(j: &[[f64; 4]; 2]) -> (f64, f64) {
    let a = dot(&j[0], &j[0]);
    let b = dot(&j[0], &j[1]);
    let c = dot(&j[1], &j[1]);
    let tr = a + c;
    let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
    let hi = 0.5 * (tr + disc);
    let lo = (a * c - b * b) / hi.max(f64::MIN_POSITIVE);
    (hi.max(0.0).sqrt(), lo.max(0.0).sqrt())
}

/// Smallest singular value of `df'` at `p`; zero exactly on the critical set.
pub fn rank_defect(p: &S4Point) -> f64 {
    let (j, _, _) = frame_jacobian(&p.to_array());
    singular_values(&j).1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalCluster {
    pub center: S4Point,
    pub image: S2Point,
    /// Smallest singular value of the Jacobian at the refined center.
    pub sigma_min: f64,
    /// Number of grid nodes that seeded this cluster.
    pub seeds: usize,
}

/// Scans a hyperspherical grid of `S^4` with angular spacing `resolution`
/// for nodes where the Jacobian of `f'` is nearly rank-deficient, groups the
/// hits, refines each group by a compass search on the smallest singular
/// value until the step falls below `tol`, and merges the refined points.
pub fn critical_set_search(resolution: f64, tol: f64) -> Result<Vec<CriticalCluster>> {
    if !(resolution > 0.0 && resolution < 1.0) || !(tol > 0.0 && tol < resolution) {
        return Err(GeomError::Domain(format!(
            "need 0 < tol < resolution < 1, got resolution {resolution}, tol {tol}"
        )));
    }
    let threshold = 6.0 * resolution;
    let link = 4.0 * resolution;

    let nt = (std::f64::consts::PI / resolution).ceil() as usize;
    let np = (std::f64::consts::TAU / resolution).ceil() as usize;
    let dt = std::f64::consts::PI / nt as f64;
    let dp = std::f64::consts::TAU / np as f64;
    let trig = |n: usize, d: f64| -> Vec<(f64, f64)> {
        (0..n).map(|i| ((i as f64 + 0.5) * d).sin_cos()).collect()
    };
    let t = trig(nt, dt);
    let ph = trig(np, dp);

    let mut hits: Vec<([f64; 5], f64)> = Vec::new();
    for &(s1, c1) in &t {
        for &(s2, c2) in &t {
            for &(s3, c3) in &t {
                let r = s1 * s2 * s3;
                for &(sp, cp) in &ph {
                    // x is the last coordinate so the poles x = +-1 are interior nodes of the chart
                    let q = [c1, s1 * c2, s1 * s2 * c3, r * cp, r * sp];
                    let (j, _, _) = frame_jacobian(&q);
                    let sigma = singular_values(&j).1;
                    if sigma < threshold {
                        hits.push((q, sigma));
                    }
                }
            }
        }
    }
    hits.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut groups: Vec<([f64; 5], usize)> = Vec::new();
    for (q, _) in &hits {
        match groups.iter_mut().find(|(g, _)| dist(g, q) < link) {
            Some(g) => g.1 += 1,
            None => groups.push((*q, 1)),
        }
    }

    let accept = (100.0 * tol).max(1e-6);
    let merge = (100.0 * tol).max(1e-8);
    let mut clusters: Vec<CriticalCluster> = Vec::new();
    for (seed, count) in groups {
        let (q, sigma) = compass_minimize(seed, resolution, tol);
        if sigma > accept {
            continue;
        }
        let center = S4Point::from_array(q);
        if let Some(c) = clusters.iter_mut().find(|c| dist(&c.center.to_array(), &q) < merge) {
            c.seeds += count;
            continue;
        }
        let [re, im, h] = eval(&q);
        clusters.push(CriticalCluster {
            center,
            image: S2Point { z: Cx::new(re, im), x: h },
            sigma_min: sigma,
            seeds: count,
        });
    }
    clusters.sort_by(|a, b| a.center.x.total_cmp(&b.center.x));
    Ok(clusters)
}

fn compass_minimize(start: [f64; 5], step0: f64, tol: f64) -> ([f64; 5], f64) {
    let sigma = |q: &[f64; 5]| singular_values(&frame_jacobian(q).0).1;
    let mut p = start;
    let mut best = sigma(&p);
    let mut step = step0;
    let mut iters = 0;
    while step >= tol && iters < 100_000 {
        iters += 1;
        let frame = tangent_frame(&p);
        let mut moved = false;
        'dirs: for e in &frame {
            for sgn in [1.0, -1.0] {
                let cand = normalize(&add(&p, &scale(e, sgn * step)));
                let v = sigma(&cand);
                if v < best {
                    p = cand;
                    best = v;
                    moved = true;
                    break 'dirs;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (p, best)
}

/// Points sampled on a fiber of `f'`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberSample {
    pub target: S2Point,
    pub requested: usize,
    pub points: Vec<S4Point>,
    /// Newton projections started, including those that failed.
    pub attempts: usize,
}

impl FiberSample {
    pub fn is_complete(&self) -> bool {
        self.points.len() == self.requested
    }
}

/// Draws `n` points of `f'^{-1}(target)`: Gaussian seeds on `S^4` whose image
/// is near the target are pushed onto the fiber by damped Gauss-Newton steps
/// `p <- p + J^+ r`, where `J^+` is the pseudo-inverse of the 2x4 frame
/// Jacobian and `r` the geodesic residual on `S^2`. When the retry budget
/// runs out the partial sample is returned.
pub fn sample_fiber(target: S2Point, n: usize, seed: u64) -> Result<FiberSample> {
    let target = S2Point::new(target.z, target.x)?;
    let t = target.to_array();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = 50 * n + 100;
    let mut points = Vec::with_capacity(n);
    let mut attempts = 0;
    while points.len() < n && attempts < budget {
        attempts += 1;
        let Some(start) = draw_seed(&mut rng, &t) else { continue };
        if let Some(q) = project_to_fiber(start, &t) {
            points.push(S4Point::from_array(q));
        }
    }
    Ok(FiberSample {
        target,
        requested: n,
        points,
        attempts,
    })
}

/// Gaussian-normalized uniform point of `S^4`.
pub fn uniform_s4<R: rand::Rng + ?Sized>(rng: &mut R) -> S4Point {
    loop {
        let v: [f64; 5] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = norm(&v);
        if n > 1e-12 {
            return S4Point::from_array(scale(&v, 1.0 / n));
        }
    }
}

fn draw_seed(rng: &mut ChaCha8Rng, t: &[f64; 3]) -> Option<[f64; 5]> {
    (0..SEED_DRAWS_PER_ATTEMPT).find_map(|_| {
        let q = uniform_s4(rng).to_array();
        (norm(&sub(&eval(&q), t)) < SEED_MAX_CHORD).then_some(q)
    })
}

fn project_to_fiber(start: [f64; 5], t: &[f64; 3]) -> Option<[f64; 5]> {
    let mut p = start;
    let mut res = norm(&sub(&eval(&p), t));
    let mut converged = false;
    for _ in 0..NEWTON_MAX_ITERS {
        if res < FIBER_TOL {
            if converged {
                break;
            }
            converged = true;
        }
        let (j, src, dst) = frame_jacobian(&p);
        let y = eval(&p);
        let r = log_map(&y, t);
        let v = [dot(&r, &dst[0]), dot(&r, &dst[1])];
        let m00 = dot(&j[0], &j[0]);
        let m01 = dot(&j[0], &j[1]);
        let m11 = dot(&j[1], &j[1]);
        let det = m00 * m11 - m01 * m01;
        if !(det > 1e-24) {
            return converged.then_some(p);
        }
        let a = (m11 * v[0] - m01 * v[1]) / det;
        let b = (m00 * v[1] - m01 * v[0]) / det;
        let mut delta = [0.0; 5];
        for c in 0..4 {
            let coef = j[0][c] * a + j[1][c] * b;
            delta = add(&delta, &scale(&src[c], coef));
        }
        let mut mult = 1.0;
        let mut improved = false;
        for _ in 0..NEWTON_MAX_HALVINGS {
            let cand = normalize(&add(&p, &scale(&delta, mult)));
            let r = norm(&sub(&eval(&cand), t));
            if r < res {
                p = cand;
                res = r;
                improved = true;
                break;
            }
            mult *= NEWTON_DAMPING;
        }
        if !improved {
            break;
        }
    }
    (res < FIBER_TOL).then_some(p)
}

// Tangent vector at `y` pointing to `t` with length the geodesic distance.
fn log_map(y: &[f64; 3], t: &[f64; 3]) -> [f64; 3] {
    let c = dot(y, t);
    let v = sub(t, &scale(y, c));
    let s = norm(&v);
    if s == 0.0 {
        return [0.0; 3];
    }
    scale(&v, s.atan2(c) / s)
}

/// Writes rows `re(z1),im(z1),re(z2),im(z2),x` with a header line.
pub fn write_fiber_csv<W: Write>(out: &mut W, points: &[S4Point]) -> std::io::Result<()> {
    writeln!(out, "re_z1,im_z1,re_z2,im_z2,x")?;
    for p in points {
        writeln!(out, "{:?},{:?},{:?},{:?},{:?}", p.z1.re, p.z1.im, p.z2.re, p.z2.im, p.x)?;
    }
    Ok(())
}

// Small fixed-size vector helpers.

fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm<const N: usize>(a: &[f64; N]) -> f64 {
    dot(a, a).sqrt()
}

fn add<const N: usize>(a: &[f64; N], b: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| a[i] + b[i])
}

fn sub<const N: usize>(a: &[f64; N], b: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| a[i] - b[i])
}

fn scale<const N: usize>(a: &[f64; N], s: f64) -> [f64; N] {
    std::array::from_fn(|i| a[i] * s)
}

fn normalize<const N: usize>(a: &[f64; N]) -> [f64; N] {
    scale(a, 1.0 / norm(a))
}

fn dist<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    norm(&sub(a, b))
}

/// Orthonormal basis of the orthogonal complement of the unit vector `p`,
/// by Gram-Schmidt on the coordinate axes least aligned with `p`.
fn tangent_frame<const N: usize>(p: &[f64; N]) -> Vec<[f64; N]> {
    let pn = normalize(p);
    let mut axes: Vec<usize> = (0..N).collect();
    axes.sort_by(|&i, &j| pn[i].abs().total_cmp(&pn[j].abs()));
    let mut basis: Vec<[f64; N]> = Vec::with_capacity(N - 1);
    for &k in axes.iter().take(N - 1) {
        let mut v = [0.0; N];
        v[k] = 1.0;
        for _ in 0..2 {
            v = sub(&v, &scale(&pn, dot(&v, &pn)));
            for b in &basis {
                v = sub(&v, &scale(b, dot(&v, b)));
            }
        }
        basis.push(normalize(&v));
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Cx {
        Cx::new(re, im)
    }

    #[test]
    fn hopf_examples() {
        let p = hopf(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert_eq!((p.z, p.x), (c(0.0, 0.0), 1.0));
        let p = hopf(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        assert_eq!((p.z, p.x), (c(0.0, 0.0), -1.0));
        let p = hopf(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)).unwrap();
        assert!((p.z - c(1.0, 0.0)).norm() < 1e-15 && p.x.abs() < 1e-15);
        assert!(hopf(c(1.0, 0.0), c(1.0, 0.0)).is_err());
    }

    #[test]
    fn f_prime_examples() {
        let p = S4Point::new(c(1.0, 0.0), c(0.0, 0.0), 0.0).unwrap();
        let y = f_prime(&p).unwrap();
        assert_eq!((y.z, y.x), (c(0.0, 0.0), -1.0));
        let p = S4Point::new(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0), 0.0).unwrap();
        let y = f_prime(&p).unwrap();
        assert!(y.z.norm() < 1e-15 && (y.x - 1.0).abs() < 1e-15);
    }

    #[test]
    fn off_sphere_inputs_are_rejected() {
        assert!(S4Point::new(c(1.0, 0.0), c(0.5, 0.0), 0.0).is_err());
        let bad = S4Point {
            z1: c(0.9, 0.0),
            z2: c(0.0, 0.0),
            x: 0.0,
        };
        assert!(f_prime(&bad).is_err());
        assert!(S4Point::from_unnormalized([0.0; 5]).is_err());
    }

    #[test]
    fn equator_reflection_conjugates_the_phase_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = uniform_s4(&mut rng);
            let m = S4Point { x: -p.x, ..p };
            let (a, b) = (p.z1.norm_sqr(), p.z2.norm_sqr());
            let s = (2.0 - p.x * p.x).sqrt();
            let expect = 4.0 * p.z1 * p.z2.conj() * c(a - b, p.x * s);
            let got = f_prime(&m).unwrap();
            assert!((got.z - expect).norm() < 1e-14);
            assert!((got.x - f_prime(&p).unwrap().x).abs() < 1e-15);
        }
    }

    #[test]
    fn analytic_differential_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let q = uniform_s4(&mut rng).to_array();
            let d = differential(&q);
            for k in 0..5 {
                let h = 1e-6;
                let mut qp = q;
                let mut qm = q;
                qp[k] += h;
                qm[k] -= h;
                let fd = scale(&sub(&eval(&qp), &eval(&qm)), 0.5 / h);
                for r in 0..3 {
                    assert!((fd[r] - d[r][k]).abs() < 1e-7, "row {r} col {k}");
                }
            }
        }
    }

    #[test]
    fn tangent_frames_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let q = uniform_s4(&mut rng).to_array();
            let f = tangent_frame(&q);
            assert_eq!(f.len(), 4);
            for (i, a) in f.iter().enumerate() {
                assert!(dot(a, &q).abs() < 1e-14);
                for (j, b) in f.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((dot(a, b) - e).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn rank_defect_vanishes_at_the_poles_only() {
        let north = S4Point::new(c(0.0, 0.0), c(0.0, 0.0), 1.0).unwrap();
        let south = S4Point::new(c(0.0, 0.0), c(0.0, 0.0), -1.0).unwrap();
        assert!(rank_defect(&north) < 1e-12);
        assert!(rank_defect(&south) < 1e-12);
        let generic = S4Point::from_unnormalized([0.3, -0.2, 0.5, 0.1, 0.4]).unwrap();
        assert!(rank_defect(&generic) > 0.1);
    }

    #[test]
    fn empty_fiber_request() {
        let t = S2Point::new(c(0.0, 0.0), 1.0).unwrap();
        let s = sample_fiber(t, 0, 1).unwrap();
        assert!(s.points.is_empty() && s.is_complete());
    }

    #[test]
    fn fiber_target_must_be_on_the_sphere() {
        let t = S2Point {
            z: c(0.5, 0.0),
            x: 0.5,
        };
        assert!(sample_fiber(t, 3, 1).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let p = S4Point::new(c(1.0, 0.0), c(0.0, 0.0), 0.0).unwrap();
        let mut buf = Vec::new();
        write_fiber_csv(&mut buf, &[p]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "re_z1,im_z1,re_z2,im_z2,x\n1.0,0.0,0.0,0.0,0.0\n");
    }
}
