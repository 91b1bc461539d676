use serde::{Deserialize, Serialize};

use super::render::{render_probe_marker, render_rgbd, RgbdImage};
use super::{CameraModel, SimError};
use crate::geometry::Pose;
use crate::planner::{path_stats, ScanPath, TargetRegion};
use crate::scene::SurfaceScene;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationFrame {
    pub image: RgbdImage,
    pub ee_pose_cam: Pose,
}

/// Seeds that reproduce one demonstration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoSeeds {
    pub demo: u64,
    pub scene: u64,
    pub region: u64,
    pub camera: u64,
}

/// Everything about a demonstration except the frames and poses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoMeta {
    pub id: usize,
    pub scene_id: u32,
    pub region: TargetRegion,
    pub camera: CameraModel,
    pub seeds: DemoSeeds,
    pub step_len: f64,
    pub frame_stride: usize,
    /// World trajectory length (cm).
    pub path_length: f64,
    /// Target region area (cm²).
    pub area: f64,
    pub n_frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub meta: DemoMeta,
    pub frames: Vec<ObservationFrame>,
    /// End-effector poses in the camera frame, index-aligned with `frames`.
    pub poses_cam: Vec<Pose>,
}

impl Demonstration {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Record every `frame_stride`-th pose of the path, starting with the first.
///
/// The scene is static, so the scene layers are rendered once and only the
/// probe marker is redrawn per frame.
pub fn collect_demonstration(
    scene: &SurfaceScene,
    region: &TargetRegion,
    camera: &CameraModel,
    path: &ScanPath,
    frame_stride: usize,
) -> Result<Demonstration, SimError> {
    if frame_stride == 0 {
        return Err(SimError::BadParams("frame stride must be at least 1".into()));
    }
    let needed = 2 * frame_stride;
    if path.waypoints.len() < needed {
        return Err(SimError::PathTooShort {
            poses: path.waypoints.len(),
            needed,
        });
    }
    let base = render_rgbd(scene, camera, region);
    let mut frames = Vec::new();
    let mut poses_cam = Vec::new();
    for world in path.waypoints.iter().step_by(frame_stride) {
        let ee = camera.to_camera(world);
        let mut image = base.clone();
        render_probe_marker(&mut image, camera, &ee);
        frames.push(ObservationFrame { image, ee_pose_cam: ee });
        poses_cam.push(ee);
    }
    let (path_length, area) = path_stats(path);
    Ok(Demonstration {
        meta: DemoMeta {
            id: 0,
            scene_id: scene.id,
            region: region.clone(),
            camera: camera.clone(),
            seeds: DemoSeeds {
                scene: scene.seed,
                region: region.seed,
                ..DemoSeeds::default()
            },
            step_len: path.step_len,
            frame_stride,
            path_length,
            area,
            n_frames: frames.len(),
        },
        frames,
        poses_cam,
    })
}
