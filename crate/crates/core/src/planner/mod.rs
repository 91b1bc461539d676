//! Scan-path generation in four steps: sample a convex target region, cover
//! it with a boustrophedon raster, project the raster onto the surface, then
//! offset along the normals and interpolate a smooth pose trajectory.

mod path;
mod raster;
mod region;
mod spline;

use serde::{Deserialize, Serialize};

pub use path::{
    forward_axis, offset_and_interpolate, path_stats, probe_orientation, project_waypoints,
    tool_forward, KeyPose, ScanPath, SurfacePoint,
};
pub use raster::{plan_raster_path, principal_axis, scan_lines, ScanLine};
pub use region::{sample_target_region, TargetRegion, MAX_REGION_ATTEMPTS};
pub use spline::CatmullRom;

use crate::geometry::GeometryError;
use crate::scene::SurfaceScene;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("covariance is not symmetric positive definite")]
    NotSpd,
    #[error("no acceptable target region after {attempts} attempts")]
    RegionSamplingFailed { attempts: usize },
    #[error("invalid planner parameters: {0}")]
    BadParams(String),
    #[error("point ({x}, {y}) lies outside the scene bounds")]
    OutOfBounds { x: f64, y: f64 },
    #[error("raster produced no waypoints")]
    EmptyPath,
    #[error("waypoint {index} did not project onto the surface")]
    ProjectionMiss { index: usize },
    #[error("need at least 2 distinct projected waypoints, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    /// Scan-line and along-line waypoint spacing (cm).
    pub spacing: f64,
    /// Probe standoff from the tissue (cm).
    pub d_offset: f64,
    /// Arc-length resampling step (cm).
    pub step_len: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            spacing: 0.8,
            d_offset: 3.0,
            step_len: 0.1,
        }
    }
}

/// Raster, project, offset and interpolate in one call.
pub fn plan_scan_path(
    scene: &SurfaceScene,
    region: &TargetRegion,
    params: &PlannerParams,
) -> Result<ScanPath, PlanError> {
    let raster = plan_raster_path(region, params.spacing)?;
    let surface = project_waypoints(&raster, scene)?;
    offset_and_interpolate(region, &surface, params.d_offset, params.step_len)
}
