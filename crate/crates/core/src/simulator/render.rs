use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::CameraModel;
use crate::geometry::{point_in_polygon, ray_heightfield_intersect, Point2, Pose, RayHit};
use crate::planner::TargetRegion;
use crate::scene::SurfaceScene;

/// Ambient share of the Lambert shading.
const AMBIENT: f64 = 0.2;
/// Marker length along the tool +z axis (cm).
pub const MARKER_LENGTH: f64 = 1.5;
const MARKER_GRAY: f64 = 0.65;

/// One rendered view: RGB in HWC order, ray-range depth in cm (0 = no hit)
/// and the binary target mask, all row-major with `width` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgbdImage {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<f32>,
    pub depth: Vec<f32>,
    pub mask: Vec<u8>,
}

impl RgbdImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rgb: vec![0.0; width * height * 3],
            depth: vec![0.0; width * height],
            mask: vec![0; width * height],
        }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}

/// Surface hit for pixel `(i, j)` inside the clip range.
fn pixel_hit(scene: &SurfaceScene, camera: &CameraModel, i: usize, j: usize) -> Option<(RayHit, Vector3<f64>)> {
    let ray = camera.pixel_ray(i, j);
    let hit = ray_heightfield_intersect(&ray, scene)?;
    (hit.t >= camera.near && hit.t <= camera.far).then_some((hit, ray.direction))
}

fn in_region(hit: &RayHit, region: &TargetRegion) -> bool {
    point_in_polygon(&Point2::new(hit.point.x, hit.point.y), &region.hull)
}

/// Scene colour under a light at the camera, depth as the ray distance to
/// the hit, and the mask of hits whose (x, y) lies inside the region hull.
pub fn render_rgbd(scene: &SurfaceScene, camera: &CameraModel, region: &TargetRegion) -> RgbdImage {
    let mut img = RgbdImage::zeros(camera.width, camera.height);
    for j in 0..camera.height {
        for i in 0..camera.width {
            let Some((hit, dir)) = pixel_hit(scene, camera, i, j) else {
                continue;
            };
            let k = j * camera.width + i;
            let lambert = hit.normal.dot(&-dir).max(0.0);
            let shade = AMBIENT + (1.0 - AMBIENT) * lambert;
            let c = scene.color(hit.point.x, hit.point.y);
            for ch in 0..3 {
                img.rgb[3 * k + ch] = (c[ch] * shade) as f32;
            }
            img.depth[k] = hit.t as f32;
            img.mask[k] = in_region(&hit, region) as u8;
        }
    }
    img
}

/// Mask channel of [`render_rgbd`] alone.
pub fn render_mask(scene: &SurfaceScene, camera: &CameraModel, region: &TargetRegion) -> Vec<u8> {
    let mut mask = vec![0; camera.width * camera.height];
    for j in 0..camera.height {
        for i in 0..camera.width {
            if let Some((hit, _)) = pixel_hit(scene, camera, i, j) {
                mask[j * camera.width + i] = in_region(&hit, region) as u8;
            }
        }
    }
    mask
}

/// Marker radius in pixels for an image `width` pixels wide.
pub fn marker_radius(width: usize) -> f64 {
    (3.0 * width as f64 / 64.0).max(1.5)
}

/// Draw the probe as a shaded gray capsule from the end-effector position
/// along its tool +z axis. Pixels where the scene is closer than the marker
/// keep their colour. Only `rgb` changes.
pub fn render_probe_marker(image: &mut RgbdImage, camera: &CameraModel, ee_pose_cam: &Pose) {
    let tip = ee_pose_cam.position;
    let tail = tip + MARKER_LENGTH * ee_pose_cam.transform_vector(&Vector3::z());
    if tip.z < camera.near || tail.z < camera.near {
        return;
    }
    let (Some(a), Some(b)) = (camera.project_camera_point(&tip), camera.project_camera_point(&tail)) else {
        return;
    };
    let r = marker_radius(image.width);
    let lo = a.inf(&b).add_scalar(-r);
    let hi = a.sup(&b).add_scalar(r);
    let i0 = lo.x.floor().max(0.0) as usize;
    let j0 = lo.y.floor().max(0.0) as usize;
    let i1 = (hi.x.ceil().max(0.0) as usize).min(image.width);
    let j1 = (hi.y.ceil().max(0.0) as usize).min(image.height);
    let ab = b - a;
    let len2 = ab.norm_squared();

    for j in j0..j1 {
        for i in i0..i1 {
            let p = Vector2::new(i as f64 + 0.5, j as f64 + 0.5);
            let s = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let dist = (p - (a + s * ab)).norm();
            if dist > r {
                continue;
            }
            let k = j * image.width + i;
            let marker_range = (tip + s * (tail - tip)).norm();
            let scene_depth = image.depth[k] as f64;
            if scene_depth > 0.0 && scene_depth < marker_range {
                continue;
            }
            let rim = (1.0 - (dist / r).powi(2)).max(0.0).sqrt();
            let v = (MARKER_GRAY * (0.55 + 0.45 * rim)) as f32;
            image.rgb[3 * k..3 * k + 3].fill(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Polygon2D, Quaternion};
    use crate::simulator::CameraParams;
    use crate::scene::{generate_scene, SceneParams};

    fn flat() -> SurfaceScene {
        generate_scene(0, 0, &SceneParams { n_bumps: 0, ..SceneParams::default() }).unwrap()
    }

    fn square(side: f64) -> TargetRegion {
        let h = 0.5 * side;
        let v = vec![Point2::new(-h, -h), Point2::new(h, -h), Point2::new(h, h), Point2::new(-h, h)];
        TargetRegion {
            hull: Polygon2D::new(v).unwrap(),
            seed: 0,
            mean: [0.0, 0.0],
            covariance: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    fn nadir(height: f64, size: usize) -> CameraModel {
        let p = CameraParams {
            width: size,
            height: size,
            ..CameraParams::default()
        };
        CameraModel::look_at(Vector3::new(0.0, 0.0, height), Vector3::zeros(), &p).unwrap()
    }

    #[test]
    fn nadir_centre_depth_is_camera_height() {
        // Odd size puts the centre pixel on the optical axis.
        let cam = nadir(10.0, 65);
        let img = render_rgbd(&flat(), &cam, &square(2.0));
        let k = 32 * 65 + 32;
        assert!((img.depth[k] as f64 - 10.0).abs() < 1e-4);
    }

    #[test]
    fn nadir_mask_area_matches_hull_area() {
        let cam = nadir(10.0, 128);
        let region = square(3.0);
        let img = render_rgbd(&flat(), &cam, &region);
        let footprint = (10.0 / cam.focal).powi(2);
        let area = img.mask.iter().filter(|&&m| m == 1).count() as f64 * footprint;
        assert!((area - region.area()).abs() < 0.05 * region.area(), "{area}");
    }

    #[test]
    fn mask_implies_depth_and_depth_in_clip_range() {
        let scene = generate_scene(0, 3, &SceneParams::default()).unwrap();
        let cam = CameraModel::look_at(Vector3::new(-6.0, 2.0, 12.0), Vector3::zeros(), &CameraParams::default())
            .unwrap();
        let img = render_rgbd(&scene, &cam, &square(4.0));
        assert!(img.mask.iter().any(|&m| m == 1));
        for k in 0..img.pixels() {
            let d = img.depth[k] as f64;
            assert!(d == 0.0 || (cam.near..=cam.far).contains(&d));
            if img.mask[k] == 1 {
                assert!(d > 0.0);
            }
        }
        assert!(img.rgb.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(render_mask(&scene, &cam, &square(4.0)), img.mask);
        assert_eq!(render_rgbd(&scene, &cam, &square(4.0)), img);
    }

    #[test]
    fn pixels_beyond_far_clip_are_empty() {
        let p = CameraParams { far: 9.0, ..CameraParams::default() };
        let cam = CameraModel::look_at(Vector3::new(0.0, 0.0, 10.0), Vector3::zeros(), &p).unwrap();
        let img = render_rgbd(&flat(), &cam, &square(2.0));
        assert!(img.depth.iter().all(|&d| d == 0.0));
        assert!(img.mask.iter().all(|&m| m == 0));
    }

    fn ee_cam(cam: &CameraModel, world: Vector3<f64>, tool_z_up: bool) -> Pose {
        let q = if tool_z_up {
            Quaternion::IDENTITY
        } else {
            Quaternion::from_axis_angle(Vector3::x(), std::f64::consts::PI).unwrap()
        };
        cam.to_camera(&Pose { position: world, orientation: q })
    }

    #[test]
    fn marker_over_flat_centre_changes_pixels() {
        let cam = CameraModel::look_at(Vector3::new(-6.0, 0.0, 8.0), Vector3::zeros(), &CameraParams::default())
            .unwrap();
        let base = render_rgbd(&flat(), &cam, &square(2.0));
        let mut img = base.clone();
        render_probe_marker(&mut img, &cam, &ee_cam(&cam, Vector3::new(0.0, 0.0, 3.0), true));
        let changed = (0..img.pixels())
            .filter(|&k| img.rgb[3 * k..3 * k + 3] != base.rgb[3 * k..3 * k + 3])
            .count();
        assert!(changed >= 20, "{changed}");
        assert_eq!(img.depth, base.depth);
        assert_eq!(img.mask, base.mask);
    }

    #[test]
    fn marker_behind_camera_or_below_surface_is_invisible() {
        let cam = CameraModel::look_at(Vector3::new(-6.0, 0.0, 8.0), Vector3::zeros(), &CameraParams::default())
            .unwrap();
        let base = render_rgbd(&flat(), &cam, &square(2.0));

        let mut img = base.clone();
        render_probe_marker(&mut img, &cam, &ee_cam(&cam, Vector3::new(-12.0, 0.0, 16.0), true));
        assert_eq!(img, base);

        let mut img = base.clone();
        render_probe_marker(&mut img, &cam, &ee_cam(&cam, Vector3::new(0.0, 0.0, -1.0), false));
        assert_eq!(img, base);
    }
}
