use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Norms at or below this are treated as zero.
pub const MIN_NORM: f64 = 1e-12;
/// Tolerance on `|q|² − 1` accepted by operations that require unit input.
pub const UNIT_TOLERANCE: f64 = 1e-6;
/// Above this `|⟨q1,q2⟩|`, slerp degenerates to normalized lerp.
const SLERP_LINEAR_THRESHOLD: f64 = 1.0 - 1e-7;

/// Quaternion `w + xi + yj + zk`.
///
/// Unit quaternions produced by this crate follow the hemisphere convention:
/// `w ≥ 0`, and when `w == 0` the first nonzero of `x, y, z` is positive.
/// With a single cover, componentwise differences of nearby orientations stay
/// small, which the action targets rely on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Rotation of `angle` radians about `axis` (need not be unit).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Result<Self, GeometryError> {
        let n = axis.norm();
        if n <= MIN_NORM {
            return Err(GeometryError::ZeroNorm);
        }
        let a = axis / n;
        let (s, c) = (0.5 * angle).sin_cos();
        quat_normalize(Self::new(c, s * a.x, s * a.y, s * a.z))
    }

    /// Quaternion of a proper rotation matrix whose columns are the rotated
    /// basis vectors. Uses Shepperd's branch selection for stability.
    pub fn from_rotation_matrix(m: &Matrix3<f64>) -> Result<Self, GeometryError> {
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Self::new(
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            Self::new(
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            Self::new(
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            Self::new(
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        };
        quat_normalize(q)
    }

    pub fn norm_squared(&self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn is_unit(&self) -> bool {
        (self.norm_squared() - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn neg(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }

    pub fn conjugate(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self ⊗ rhs` (apply `rhs` first, then `self`).
    pub fn mul(self, rhs: Self) -> Self {
        let (a, b) = (self, rhs);
        Self::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    /// Rotate a vector by this (unit) quaternion.
    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let u = Vector3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Apply the hemisphere convention without rescaling.
    pub fn canonical(self) -> Self {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else if self.x != 0.0 {
            self.x < 0.0
        } else if self.y != 0.0 {
            self.y < 0.0
        } else {
            self.z < 0.0
        };
        if flip {
            self.neg()
        } else {
            self
        }
    }
}

/// Unit-normalize and apply the hemisphere convention.
pub fn quat_normalize(q: Quaternion) -> Result<Quaternion, GeometryError> {
    let n = q.norm();
    if !(n > MIN_NORM) {
        return Err(GeometryError::ZeroNorm);
    }
    Ok(Quaternion::new(q.w / n, q.x / n, q.y / n, q.z / n).canonical())
}

fn require_unit(q: &Quaternion) -> Result<(), GeometryError> {
    if q.is_unit() {
        Ok(())
    } else {
        Err(GeometryError::NotUnit { norm: q.norm() })
    }
}

/// Geodesic angle `2·arccos|⟨q1,q2⟩|` between two orientations, in radians.
///
/// Evaluated as `4·atan2(|q1 − s·q2|, |q1 + s·q2|)` with `s = sign⟨q1,q2⟩`,
/// which equals the arccos form for unit inputs but keeps full precision near
/// zero and returns exactly 0 for `q` against `±q`.
pub fn quat_angle(q1: &Quaternion, q2: &Quaternion) -> Result<f64, GeometryError> {
    require_unit(q1)?;
    require_unit(q2)?;
    let b = if q1.dot(q2) < 0.0 { q2.neg() } else { *q2 };
    let diff = Quaternion::new(q1.w - b.w, q1.x - b.x, q1.y - b.y, q1.z - b.z).norm();
    let sum = Quaternion::new(q1.w + b.w, q1.x + b.x, q1.y + b.y, q1.z + b.z).norm();
    Ok(4.0 * diff.atan2(sum))
}

/// Spherical linear interpolation along the shorter arc.
pub fn slerp(q1: &Quaternion, q2: &Quaternion, t: f64) -> Result<Quaternion, GeometryError> {
    require_unit(q1)?;
    require_unit(q2)?;
    let mut dot = q1.dot(q2);
    let mut end = *q2;
    if dot < 0.0 {
        dot = -dot;
        end = end.neg();
    }
    let (a, b) = if dot > SLERP_LINEAR_THRESHOLD {
        (1.0 - t, t)
    } else {
        let theta = dot.acos();
        let s = theta.sin();
        (((1.0 - t) * theta).sin() / s, (t * theta).sin() / s)
    };
    quat_normalize(Quaternion::new(
        a * q1.w + b * end.w,
        a * q1.x + b * end.x,
        a * q1.y + b * end.y,
        a * q1.z + b * end.z,
    ))
}
