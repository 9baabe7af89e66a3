//! Integer bookkeeping for the genus-one fibration of the four-sphere.
//!
//! Mapping classes of the torus act on `H_1 = Z mu + Z lambda` (meridian,
//! longitude) by 2x2 integer matrices on coordinates `(a, b)` of
//! `a mu + b lambda`. The right-handed twist about the meridian is
//! `[[1, 1], [0, 1]]`.

use std::ops::Mul;

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::numerics::{Cx, ModuliParams};
use crate::transition::{longitude_monodromy, DEFAULT_STEPS_PER_TURN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MappingClass {
    m: [[i64; 2]; 2],
}

pub const MERIDIAN: [i64; 2] = [1, 0];
pub const LONGITUDE: [i64; 2] = [0, 1];

impl MappingClass {
    pub const IDENTITY: MappingClass = MappingClass { m: [[1, 0], [0, 1]] };

    pub fn new(m: [[i64; 2]; 2]) -> Result<Self> {
        let c = MappingClass { m };
        if c.det() != 1 {
            return Err(GeomError::Domain(format!("matrix {m:?} has determinant {}", c.det())));
        }
        Ok(c)
    }

    pub fn matrix(&self) -> [[i64; 2]; 2] {
        self.m
    }

    pub fn det(&self) -> i64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Self {
        let [[a, b], [c, d]] = self.m;
        MappingClass { m: [[d, -b], [-c, a]] }
    }

    pub fn pow(&self, n: i32) -> Self {
        let base = if n < 0 { self.inverse() } else { *self };
        (0..n.unsigned_abs()).fold(Self::IDENTITY, |acc, _| acc * base)
    }

    pub fn apply(&self, v: [i64; 2]) -> [i64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }
}

impl Mul for MappingClass {
    type Output = MappingClass;
    fn mul(self, o: MappingClass) -> MappingClass {
        let a = self.m;
        let b = o.m;
        let mut m = [[0i64; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        MappingClass { m }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TwistCurve {
    Meridian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Handedness {
    Right,
    Left,
}

pub fn dehn_twist(about: TwistCurve, sign: Handedness) -> MappingClass {
    let s = match sign {
        Handedness::Right => 1,
        Handedness::Left => -1,
    };
    match about {
        TwistCurve::Meridian => MappingClass { m: [[1, s], [0, 1]] },
    }
}

/// How the fiberwise map `(t, x, y) -> (t, x, y + t)` acts: trivially on
/// each fiber's homology, and by one unit of section framing per base loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GluingAction {
    pub fiber_action: MappingClass,
    pub framing: i64,
}

impl GluingAction {
    pub fn then(self, other: GluingAction) -> GluingAction {
        GluingAction {
            fiber_action: other.fiber_action * self.fiber_action,
            framing: self.framing + other.framing,
        }
    }

    pub fn repeat(self, n: i32) -> GluingAction {
        GluingAction {
            fiber_action: self.fiber_action.pow(n),
            framing: self.framing * i64::from(n),
        }
    }
}

pub fn gluing_action() -> GluingAction {
    GluingAction {
        fiber_action: MappingClass::IDENTITY,
        framing: 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FibrationDescriptor {
    pub base_euler: i64,
    pub fiber_euler: i64,
    pub positive_critical: u32,
    pub negative_critical: u32,
    pub section_framing: i64,
}

impl FibrationDescriptor {
    /// Genus-one fibration of the four-sphere with one critical point of each sign.
    pub fn four_sphere() -> Self {
        Self {
            base_euler: 2,
            fiber_euler: 0,
            positive_critical: 1,
            negative_critical: 1,
            section_framing: 1,
        }
    }
}

pub fn euler_characteristic(d: &FibrationDescriptor) -> i64 {
    d.base_euler * d.fiber_euler + i64::from(d.positive_critical) + i64::from(d.negative_critical)
}

/// Compares the winding measured by continuing the attaching map around
/// `turns` loops with the framing predicted by [`gluing_action`].
pub fn overlap_monodromy_consistency(params: &ModuliParams, rho: f64, z0: Cx, turns: i32) -> Result<bool> {
    let measured = longitude_monodromy(rho, z0, turns, DEFAULT_STEPS_PER_TURN, params)?.winding;
    Ok(measured == gluing_action().repeat(turns).framing)
}
