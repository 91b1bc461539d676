use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::spline::CatmullRom;
use super::{PlanError, TargetRegion};
use crate::geometry::{ray_heightfield_intersect, slerp, Heightfield, Point2, Pose, Quaternion, Ray};
use crate::scene::SurfaceScene;

/// Dense samples per spline segment used for arc-length resampling.
const DENSE_SAMPLES: usize = 64;
/// Travel directions within this angle of the normal fall back to world x.
const YAW_FALLBACK_DEG: f64 = 1.0;
/// Consecutive keys closer than this are merged.
const KEY_MERGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
}

/// Offset pose at a projected raster waypoint, before interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyPose {
    pub surface: SurfacePoint,
    pub pose: Pose,
}

/// Smooth world-frame probe trajectory over a target region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPath {
    pub waypoints: Vec<Pose>,
    pub keys: Vec<KeyPose>,
    pub arc_length: f64,
    pub d_offset: f64,
    pub step_len: f64,
    pub region: TargetRegion,
}

/// Probe forward axis in the tool frame.
pub fn tool_forward() -> Vector3<f64> {
    -Vector3::z()
}

/// Forward axis of a pose expressed in its parent frame.
pub fn forward_axis(pose: &Pose) -> Vector3<f64> {
    pose.transform_vector(&tool_forward())
}

/// Drop vertical rays onto the surface from above its highest point.
pub fn project_waypoints(
    waypoints: &[Point2],
    scene: &SurfaceScene,
) -> Result<Vec<SurfacePoint>, PlanError> {
    let top = scene.height_range().1 + 1.0;
    waypoints
        .iter()
        .enumerate()
        .map(|(index, w)| {
            if !scene.bounds.contains(w.x, w.y) {
                return Err(PlanError::OutOfBounds { x: w.x, y: w.y });
            }
            let ray = Ray {
                origin: Vector3::new(w.x, w.y, top),
                direction: -Vector3::z(),
            };
            let hit = ray_heightfield_intersect(&ray, scene).ok_or(PlanError::ProjectionMiss { index })?;
            Ok(SurfacePoint {
                point: hit.point,
                normal: hit.normal,
            })
        })
        .collect()
}

/// Orientation whose forward axis is `−normal`, with the tool x-axis along
/// the horizontal travel direction projected into the tangent plane.
pub fn probe_orientation(normal: &Vector3<f64>, travel: &Vector3<f64>) -> Result<Quaternion, PlanError> {
    let z = normal.normalize();
    let horizontal = Vector3::new(travel.x, travel.y, 0.0);
    let cos_limit = YAW_FALLBACK_DEG.to_radians().cos();
    let dir = match horizontal.try_normalize(1e-12) {
        Some(d) if d.dot(&z).abs() < cos_limit => d,
        _ => Vector3::x(),
    };
    let x = (dir - dir.dot(&z) * z).normalize();
    let y = z.cross(&x);
    let m = Matrix3::from_columns(&[x, y, z]);
    Ok(Quaternion::from_rotation_matrix(&m)?)
}

/// Offset projected points along their normals, orient them perpendicular to
/// the surface, and interpolate a smooth path resampled every `step_len` of
/// arc length.
pub fn offset_and_interpolate(
    region: &TargetRegion,
    surface: &[SurfacePoint],
    d_offset: f64,
    step_len: f64,
) -> Result<ScanPath, PlanError> {
    if !(d_offset > 0.0) || !(step_len > 0.0) {
        return Err(PlanError::BadParams(format!(
            "offset {d_offset} and step {step_len} must be positive"
        )));
    }
    let mut merged: Vec<SurfacePoint> = Vec::with_capacity(surface.len());
    for s in surface {
        if merged.last().is_none_or(|m| (m.point - s.point).norm() > KEY_MERGE_EPS) {
            merged.push(*s);
        }
    }
    if merged.len() < 2 {
        return Err(PlanError::TooFewPoints(merged.len()));
    }

    let n = merged.len();
    let mut keys = Vec::with_capacity(n);
    for i in 0..n {
        let travel = if i + 1 < n {
            merged[i + 1].point - merged[i].point
        } else {
            merged[i].point - merged[i - 1].point
        };
        let s = merged[i];
        let orientation = probe_orientation(&s.normal, &travel)?;
        keys.push(KeyPose {
            surface: s,
            pose: Pose {
                position: s.point + d_offset * s.normal,
                orientation,
            },
        });
    }

    let positions: Vec<Vector3<f64>> = keys.iter().map(|k| k.pose.position).collect();
    let curve = CatmullRom::new(&positions);

    // Dense polyline with its global curve parameter (segment + local u).
    let mut dense: Vec<(Vector3<f64>, f64)> = vec![(positions[0], 0.0)];
    for seg in 0..curve.segments() {
        for j in 1..=DENSE_SAMPLES {
            let u = j as f64 / DENSE_SAMPLES as f64;
            let p = if j == DENSE_SAMPLES {
                positions[seg + 1]
            } else {
                curve.eval(seg, u)
            };
            dense.push((p, seg as f64 + u));
        }
    }
    let mut cumulative = Vec::with_capacity(dense.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in dense.windows(2) {
        acc += (w[1].0 - w[0].0).norm();
        cumulative.push(acc);
    }
    let total = acc;

    let pose_at = |g: f64, position: Vector3<f64>| -> Result<Pose, PlanError> {
        let seg = (g.floor() as usize).min(n - 2);
        let u = (g - seg as f64).clamp(0.0, 1.0);
        let q = slerp(&keys[seg].pose.orientation, &keys[seg + 1].pose.orientation, u)?;
        Ok(Pose {
            position,
            orientation: q,
        })
    };

    let mut waypoints = Vec::new();
    let mut cursor = 0;
    let mut k = 0usize;
    loop {
        let s = k as f64 * step_len;
        if s >= total - 1e-9 {
            break;
        }
        while cumulative[cursor + 1] < s {
            cursor += 1;
        }
        let (s0, s1) = (cumulative[cursor], cumulative[cursor + 1]);
        let f = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        let (p0, g0) = dense[cursor];
        let (p1, g1) = dense[cursor + 1];
        waypoints.push(pose_at(g0 + f * (g1 - g0), p0 + f * (p1 - p0))?);
        k += 1;
    }
    waypoints.push(keys[n - 1].pose);

    let arc_length = waypoints
        .windows(2)
        .map(|w| (w[1].position - w[0].position).norm())
        .sum();
    Ok(ScanPath {
        waypoints,
        keys,
        arc_length,
        d_offset,
        step_len,
        region: region.clone(),
    })
}

/// `(trajectory length in cm, coverage area in cm²)`.
pub fn path_stats(path: &ScanPath) -> (f64, f64) {
    let length = path
        .waypoints
        .windows(2)
        .map(|w| (w[1].position - w[0].position).norm())
        .sum();
    (length, path.region.area())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{quat_angle, Polygon2D};
    use crate::planner::{plan_raster_path, plan_scan_path, sample_target_region, PlannerParams};
    use crate::scene::{generate_scene, Bounds, SceneParams};

    fn flat_scene() -> SurfaceScene {
        generate_scene(
            0,
            0,
            &SceneParams {
                n_bumps: 0,
                ..SceneParams::default()
            },
        )
        .unwrap()
    }

    fn square_region(side: f64) -> TargetRegion {
        let p = |x, y| Point2::new(x, y);
        TargetRegion {
            hull: Polygon2D::new(vec![p(0., 0.), p(side, 0.), p(side, side), p(0., side)]).unwrap(),
            seed: 0,
            mean: [0.0, 0.0],
            covariance: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    #[test]
    fn flat_projection() {
        let s = flat_scene();
        let w: Vec<Point2> = (0..7).map(|i| Point2::new(i as f64 - 3.0, 0.5 * i as f64)).collect();
        let proj = project_waypoints(&w, &s).unwrap();
        assert_eq!(proj.len(), w.len());
        for (q, p) in w.iter().zip(&proj) {
            assert!((p.point - Vector3::new(q.x, q.y, 0.0)).norm() < 1e-9);
            assert_eq!(p.normal, Vector3::z());
        }
        let outside = [Point2::new(11.0, 0.0)];
        assert!(matches!(project_waypoints(&outside, &s), Err(PlanError::OutOfBounds { .. })));
    }

    #[test]
    fn bump_apex_projection() {
        let mut s = generate_scene(0, 0, &SceneParams { n_bumps: 1, ..SceneParams::default() }).unwrap();
        s.bumps[0].center = [2.0, -1.0];
        s.bumps[0].amplitude = 1.4;
        let proj = project_waypoints(&[Point2::new(2.0, -1.0)], &s).unwrap();
        assert!((proj[0].point.z - 1.4).abs() < 1e-9);
    }

    #[test]
    fn straight_line_on_flat_scene() {
        let s = flat_scene();
        let w: Vec<Point2> = (0..5).map(|i| Point2::new(0.8 * i as f64, 1.0)).collect();
        let proj = project_waypoints(&w, &s).unwrap();
        let path = offset_and_interpolate(&square_region(4.0), &proj, 3.0, 0.1).unwrap();
        let q0 = path.waypoints[0].orientation;
        for pose in &path.waypoints {
            assert!((pose.position.z - 3.0).abs() < 1e-9);
            assert!(quat_angle(&pose.orientation, &q0).unwrap() < 1e-9);
            assert!((forward_axis(pose) - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        }
        for pair in path.waypoints.windows(2) {
            assert!((pair[1].position - pair[0].position).norm() <= 0.1 + 1e-9);
        }
        assert!((path.arc_length - 3.2).abs() < 1e-9);
        assert_eq!(path.waypoints.len(), 33);
    }

    #[test]
    fn square_raster_length_on_flat_scene() {
        let s = flat_scene();
        let region = square_region(4.0);
        let w = plan_raster_path(&region, 1.0).unwrap();
        let path = offset_and_interpolate(&region, &project_waypoints(&w, &s).unwrap(), 3.0, 0.1).unwrap();
        let (length, area) = path_stats(&path);
        assert!((length - 24.0).abs() / 24.0 < 0.02, "{length}");
        assert_eq!(area, 16.0);
    }

    #[test]
    fn key_poses_are_offset_and_perpendicular() {
        let scene = generate_scene(1, 31, &SceneParams::default()).unwrap();
        let region = sample_target_region(5, &scene.bounds, [1.0, 1.0], [[1.0, 0.2], [0.2, 0.6]], 32).unwrap();
        let path = plan_scan_path(&scene, &region, &PlannerParams::default()).unwrap();
        for key in &path.keys {
            let (z, n) = scene
                .sample_height_and_normal(key.surface.point.x, key.surface.point.y)
                .unwrap();
            let surface = Vector3::new(key.surface.point.x, key.surface.point.y, z);
            assert!(((key.pose.position - surface).norm() - 3.0).abs() < 1e-6);
            let angle = forward_axis(&key.pose).dot(&(-n)).clamp(-1.0, 1.0).acos().to_degrees();
            assert!(angle < 0.01);
        }
    }

    #[test]
    fn resampled_poses_stay_near_offset() {
        let scene = generate_scene(2, 8, &SceneParams::default()).unwrap();
        let region = sample_target_region(6, &scene.bounds, [-2.0, 0.5], [[0.8, 0.0], [0.0, 0.5]], 32).unwrap();
        let path = plan_scan_path(&scene, &region, &PlannerParams::default()).unwrap();
        for pose in &path.waypoints {
            let f = forward_axis(pose);
            let ray = Ray::new(pose.position, f).unwrap();
            let hit = ray_heightfield_intersect(&ray, &scene).expect("probe looks at tissue");
            assert!(hit.t >= 3.0 - 0.05 && hit.t <= 3.0 + 0.5, "{}", hit.t);
        }
        for pair in path.waypoints.windows(2) {
            assert!((pair[1].position - pair[0].position).norm() <= 0.1 + 1e-9);
        }
    }

    #[test]
    fn too_few_points() {
        let s = flat_scene();
        let proj = project_waypoints(&[Point2::new(0.0, 0.0), Point2::new(0.0, 0.0)], &s).unwrap();
        assert!(matches!(
            offset_and_interpolate(&square_region(1.0), &proj, 3.0, 0.1),
            Err(PlanError::TooFewPoints(1))
        ));
    }

    #[test]
    fn path_stats_two_poses() {
        let region = square_region(1.0);
        let a = Pose::identity();
        let mut b = Pose::identity();
        b.position.x = 1.0;
        let path = ScanPath {
            waypoints: vec![a, b],
            keys: vec![],
            arc_length: 1.0,
            d_offset: 3.0,
            step_len: 0.1,
            region,
        };
        assert_eq!(path_stats(&path), (1.0, 1.0));
    }

    #[test]
    fn planning_is_deterministic() {
        let scene = generate_scene(0, 77, &SceneParams::default()).unwrap();
        let region = sample_target_region(2, &Bounds::centered(20.0, 20.0), [0.0, 0.0], [[0.7, 0.1], [0.1, 0.5]], 32).unwrap();
        let a = plan_scan_path(&scene, &region, &PlannerParams::default()).unwrap();
        let b = plan_scan_path(&scene, &region, &PlannerParams::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
