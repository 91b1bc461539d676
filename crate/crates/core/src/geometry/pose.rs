use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::quat::{quat_normalize, Quaternion};
use super::GeometryError;

/// Rigid pose: position in cm and orientation as a unit quaternion.
///
/// Read as a transform it maps points from the pose's local frame into the
/// parent frame: `p_parent = R · p_local + position`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: Quaternion,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: Quaternion::IDENTITY,
        }
    }

    pub fn new(position: Vector3<f64>, orientation: Quaternion) -> Result<Self, GeometryError> {
        Ok(Self {
            position,
            orientation: quat_normalize(orientation)?,
        })
    }

    /// `[x, y, z, W, X, Y, Z]`.
    pub fn to_array(&self) -> [f64; 7] {
        let q = self.orientation;
        [
            self.position.x,
            self.position.y,
            self.position.z,
            q.w,
            q.x,
            q.y,
            q.z,
        ]
    }

    /// Inverse of [`Pose::to_array`]; the quaternion is taken verbatim.
    pub fn from_array(a: [f64; 7]) -> Self {
        Self {
            position: Vector3::new(a[0], a[1], a[2]),
            orientation: Quaternion::new(a[3], a[4], a[5], a[6]),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.rotate(p) + self.position
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.rotate(v)
    }

    pub fn inverse(&self) -> Self {
        let q_inv = self.orientation.conjugate();
        Self {
            position: -q_inv.rotate(&self.position),
            orientation: q_inv.canonical(),
        }
    }

    /// `self ∘ rhs`: express `rhs` (given in `self`'s local frame) in `self`'s parent frame.
    pub fn compose(&self, rhs: &Pose) -> Self {
        let q = self.orientation.mul(rhs.orientation);
        let n = q.norm();
        Self {
            position: self.transform_point(&rhs.position),
            orientation: Quaternion::new(q.w / n, q.x / n, q.y / n, q.z / n).canonical(),
        }
    }
}
