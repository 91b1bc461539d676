use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::geometry::{quat_normalize, Pose, Quaternion};

pub const DEFAULT_HORIZON: usize = 5;

/// N-step pose difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionTarget {
    /// Position change (cm).
    pub dpos: [f64; 3],
    /// Componentwise `[W, X, Y, Z]` quaternion difference.
    pub dquat: [f64; 4],
}

impl ActionTarget {
    pub const ZERO: ActionTarget = ActionTarget {
        dpos: [0.0; 3],
        dquat: [0.0; 4],
    };

    /// Pose reached by applying the action to `pose`.
    pub fn apply(&self, pose: &Pose) -> Result<Pose, DatasetError> {
        let q = pose.orientation.to_array();
        let sum = Quaternion::from_array(std::array::from_fn(|i| q[i] + self.dquat[i]));
        let orientation = quat_normalize(sum).map_err(|e| DatasetError::Invalid(e.to_string()))?;
        Ok(Pose {
            position: pose.position + Vector3::from(self.dpos),
            orientation,
        })
    }
}

/// `q` with its sign chosen to have nonnegative dot product with `reference`.
pub fn align_hemisphere(q: &Quaternion, reference: &Quaternion) -> Quaternion {
    if q.dot(reference) < 0.0 {
        q.neg()
    } else {
        *q
    }
}

/// Targets `p_{t+N} − p_t` for every `t` in `[0, T − N)`, with `q_{t+N}`
/// sign-aligned to `q_t` before the quaternion difference.
pub fn compute_action_targets(poses: &[Pose], n: usize) -> Result<Vec<(usize, ActionTarget)>, DatasetError> {
    if n < 2 {
        return Err(DatasetError::BadN(n));
    }
    if poses.len() <= n {
        return Err(DatasetError::TooShort { len: poses.len(), n });
    }
    Ok((0..poses.len() - n)
        .map(|t| {
            let (a, b) = (&poses[t], &poses[t + n]);
            let qa = a.orientation.to_array();
            let qb = align_hemisphere(&b.orientation, &a.orientation).to_array();
            let dp = b.position - a.position;
            (
                t,
                ActionTarget {
                    dpos: [dp.x, dp.y, dp.z],
                    dquat: std::array::from_fn(|i| qb[i] - qa[i]),
                },
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::quat_angle;
    use proptest::prelude::*;

    fn pose(x: f64, q: Quaternion) -> Pose {
        Pose {
            position: Vector3::new(x, 0.0, 0.0),
            orientation: q,
        }
    }

    #[test]
    fn constant_demo_has_zero_targets() {
        let poses = vec![pose(1.0, Quaternion::new(0.6, 0.8, 0.0, 0.0)); 9];
        let t = compute_action_targets(&poses, 5).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.iter().all(|(_, a)| *a == ActionTarget::ZERO));
    }

    #[test]
    fn straight_line_targets() {
        let poses: Vec<_> = (0..12).map(|i| pose(0.2 * i as f64, Quaternion::IDENTITY)).collect();
        for (t, a) in compute_action_targets(&poses, 5).unwrap() {
            assert!((a.dpos[0] - 1.0).abs() < 1e-12, "t={t}");
            assert_eq!(a.dpos[1..], [0.0, 0.0]);
        }
    }

    #[test]
    fn errors() {
        let poses = vec![Pose::identity(); 5];
        assert_eq!(compute_action_targets(&poses, 1), Err(DatasetError::BadN(1)));
        assert_eq!(compute_action_targets(&poses, 5), Err(DatasetError::TooShort { len: 5, n: 5 }));
    }

    #[test]
    fn antipodal_quaternions_give_zero_difference() {
        let q = Quaternion::new(0.5, 0.5, 0.5, 0.5);
        let poses = vec![pose(0.0, q), pose(0.0, q), pose(0.0, q.neg())];
        let t = compute_action_targets(&poses, 2).unwrap();
        assert_eq!(t[0].1.dquat, [0.0; 4]);
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (
            prop::array::uniform3(-10.0..10.0f64),
            prop::array::uniform3(-1.0..1.0f64),
            -3.0..3.0f64,
        )
            .prop_filter_map("axis", |(p, axis, angle)| {
                let q = Quaternion::from_axis_angle(Vector3::from(axis), angle).ok()?;
                Some(Pose {
                    position: Vector3::from(p),
                    orientation: q.canonical(),
                })
            })
    }

    proptest! {
        #[test]
        fn targets_reconstruct_future_pose(poses in prop::collection::vec(arb_pose(), 4..12)) {
            let n = 2;
            for (t, a) in compute_action_targets(&poses, n).unwrap() {
                let (p, f) = (&poses[t], &poses[t + n]);
                let sum: Vec<f64> = (0..3).map(|i| p.position[i] + a.dpos[i]).collect();
                // pos_t + dpos reproduces pos_{t+N} to rounding of one addition.
                for i in 0..3 {
                    prop_assert!((sum[i] - f.position[i]).abs() <= 1e-12 * (1.0 + f.position[i].abs()));
                }
                let back = a.apply(p).unwrap();
                prop_assert!(quat_angle(&back.orientation, &f.orientation).unwrap() < 1e-9);
                let dq: f64 = a.dquat.iter().map(|v| v * v).sum::<f64>().sqrt();
                // |q_a − q_b|² = 2 − 2⟨q_a, q_b⟩ ≤ 2 once aligned.
                prop_assert!(dq <= std::f64::consts::SQRT_2 + 1e-12);
            }
        }
    }
}
