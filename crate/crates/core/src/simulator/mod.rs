//! Virtual RGBD camera and demonstration recorder.

mod camera;
mod demo;
mod generate;
mod render;

pub use camera::{
    camera_distance, place_camera, CameraModel, CameraParams, CENTRAL_WINDOW, MAX_PLACEMENT_ATTEMPTS,
    MIN_MASK_FRACTION,
};
pub use demo::{collect_demonstration, DemoMeta, DemoSeeds, Demonstration, ObservationFrame};
pub use generate::{
    demo_seed, generate_dataset, generate_demo, generate_scenes, scene_seed, GenConfig, RegionParams,
};
pub use render::{marker_radius, render_mask, render_probe_marker, render_rgbd, RgbdImage, MARKER_LENGTH};

use crate::dataset::DatasetError;
use crate::planner::PlanError;
use crate::scene::SceneError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulator parameters: {0}")]
    BadParams(String),
    #[error("camera placement failed after {attempts} attempts")]
    CameraPlacementFailed { attempts: usize },
    #[error("path has {poses} poses, need at least {needed}")]
    PathTooShort { poses: usize, needed: usize },
    #[error("no usable region after {draws} draws")]
    DrawsExhausted { draws: usize },
    #[error("demonstration {index}: {source}")]
    Demo { index: usize, source: Box<SimError> },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}
