use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::{Heightfield, Pose, Quaternion, Ray};
use crate::planner::TargetRegion;
use crate::rng::{stream_rng, uniform};
use crate::scene::SurfaceScene;

/// Placement retries before giving up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 50;
/// Fraction of the image width/height, centred, that the hull must project into.
pub const CENTRAL_WINDOW: f64 = 0.8;
/// Smallest acceptable fraction of mask pixels in the placement render.
pub const MIN_MASK_FRACTION: f64 = 0.01;
/// Hull edge samples used by the visibility check, per edge.
const EDGE_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraParams {
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view in degrees.
    pub fov_deg: f64,
    pub near: f64,
    pub far: f64,
    pub elevation_deg: [f64; 2],
    pub distance_clamp: [f64; 2],
}

impl Default for CameraParams {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            fov_deg: 60.0,
            near: 0.5,
            far: 40.0,
            elevation_deg: [50.0, 85.0],
            distance_clamp: [8.0, 18.0],
        }
    }
}

impl CameraParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::BadParams(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("image size {}x{}", self.width, self.height));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return bad(format!("fov {}", self.fov_deg));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return bad(format!("clip range [{}, {}]", self.near, self.far));
        }
        let [e0, e1] = self.elevation_deg;
        if !(0.0 < e0 && e0 <= e1 && e1 < 90.0) {
            return bad(format!("elevation range [{e0}, {e1}]"));
        }
        let [d0, d1] = self.distance_clamp;
        if !(0.0 < d0 && d0 <= d1) {
            return bad(format!("distance clamp [{d0}, {d1}]"));
        }
        Ok(())
    }
}

/// Pinhole camera. The camera frame has x right, y down and z along the
/// optical axis; `pose` maps camera coordinates to world coordinates.
/// Pixel `(i, j)` covers `[i, i+1) × [j, j+1)` in image coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub pose: Pose,
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
}

impl CameraModel {
    /// Camera at `position` looking at `target`. Image x is horizontal
    /// (`z × up`); a view straight along `up` falls back to world y as up.
    pub fn look_at(
        position: Vector3<f64>,
        target: Vector3<f64>,
        params: &CameraParams,
    ) -> Result<Self, SimError> {
        params.validate()?;
        let z = (target - position)
            .try_normalize(1e-12)
            .ok_or_else(|| SimError::BadParams("camera position equals target".into()))?;
        let x = match z.cross(&Vector3::z()).try_normalize(1e-9) {
            Some(x) => x,
            None => z.cross(&Vector3::y()).normalize(),
        };
        let y = z.cross(&x);
        let q = Quaternion::from_rotation_matrix(&Matrix3::from_columns(&[x, y, z]))
            .map_err(|e| SimError::BadParams(e.to_string()))?;
        let focal = 0.5 * params.width as f64 / (0.5 * params.fov_deg.to_radians()).tan();
        Ok(Self {
            pose: Pose {
                position,
                orientation: q,
            },
            focal,
            cx: 0.5 * params.width as f64,
            cy: 0.5 * params.height as f64,
            width: params.width,
            height: params.height,
            near: params.near,
            far: params.far,
        })
    }

    /// World-frame pose expressed in the camera frame.
    pub fn to_camera(&self, world: &Pose) -> Pose {
        self.pose.inverse().compose(world)
    }

    pub fn to_world(&self, cam: &Pose) -> Pose {
        self.pose.compose(cam)
    }

    /// Image coordinates of a camera-frame point, `None` at or behind z = 0.
    pub fn project_camera_point(&self, p: &Vector3<f64>) -> Option<Vector2<f64>> {
        (p.z > 1e-12).then(|| Vector2::new(self.focal * p.x / p.z + self.cx, self.focal * p.y / p.z + self.cy))
    }

    pub fn project_world_point(&self, p: &Vector3<f64>) -> Option<Vector2<f64>> {
        let local = self.pose.inverse().transform_point(p);
        self.project_camera_point(&local)
    }

    /// Primary ray through the centre of pixel `(i, j)`, in world coordinates.
    pub fn pixel_ray(&self, i: usize, j: usize) -> Ray {
        let d = Vector3::new(
            (i as f64 + 0.5 - self.cx) / self.focal,
            (j as f64 + 0.5 - self.cy) / self.focal,
            1.0,
        );
        Ray {
            origin: self.pose.position,
            direction: self.pose.transform_vector(&d).normalize(),
        }
    }

    fn in_central_window(&self, uv: &Vector2<f64>) -> bool {
        let margin = 0.5 * (1.0 - CENTRAL_WINDOW);
        let (w, h) = (self.width as f64, self.height as f64);
        uv.x >= margin * w && uv.x <= (1.0 - margin) * w && uv.y >= margin * h && uv.y <= (1.0 - margin) * h
    }
}

/// Hull vertices and edge samples lifted onto the surface.
fn lifted_hull_samples(region: &TargetRegion, scene: &SurfaceScene) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    for (a, b) in region.hull.edges() {
        for k in 0..EDGE_SAMPLES {
            let p = a + (b - a) * (k as f64 / EDGE_SAMPLES as f64);
            out.push(Vector3::new(p.x, p.y, scene.height(p.x, p.y)));
        }
    }
    out
}

/// Camera above the region looking at the hull centroid on the surface, at
/// distance `clamp(2.5·√area, 8, 18)` with elevation and azimuth drawn from
/// `seed`. A draw is accepted when the whole lifted hull projects into the
/// central window and the rendered mask covers at least 1% of the image.
pub fn place_camera(
    region: &TargetRegion,
    scene: &SurfaceScene,
    params: &CameraParams,
    seed: u64,
) -> Result<CameraModel, SimError> {
    params.validate()?;
    let c = region.hull.centroid();
    let target = Vector3::new(c.x, c.y, scene.height(c.x, c.y));
    let d = camera_distance(region.area(), params);
    let samples = lifted_hull_samples(region, scene);
    let n_pixels = (params.width * params.height) as f64;

    let mut rng = stream_rng(seed);
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let elevation = uniform(&mut rng, params.elevation_deg[0], params.elevation_deg[1]).to_radians();
        let azimuth = uniform(&mut rng, 0.0, 360.0).to_radians();
        let dir = Vector3::new(
            elevation.cos() * azimuth.cos(),
            elevation.cos() * azimuth.sin(),
            elevation.sin(),
        );
        let cam = CameraModel::look_at(target + d * dir, target, params)?;
        let visible = samples
            .iter()
            .all(|p| cam.project_world_point(p).is_some_and(|uv| cam.in_central_window(&uv)));
        if !visible {
            continue;
        }
        let mask = super::render::render_mask(scene, &cam, region);
        let on = mask.iter().filter(|&&m| m == 1).count() as f64;
        if on >= MIN_MASK_FRACTION * n_pixels {
            return Ok(cam);
        }
    }
    Err(SimError::CameraPlacementFailed {
        attempts: MAX_PLACEMENT_ATTEMPTS,
    })
}

pub fn camera_distance(area: f64, params: &CameraParams) -> f64 {
    (2.5 * area.sqrt()).clamp(params.distance_clamp[0], params.distance_clamp[1])
}
