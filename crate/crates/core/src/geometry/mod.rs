//! Quaternion algebra, rigid poses, convex polygons and heightfield ray casting.

mod polygon;
mod pose;
mod quat;
mod raycast;

pub use polygon::{convex_hull, point_in_polygon, polygon_area, Point2, Polygon2D};
pub use pose::Pose;
pub use quat::{quat_angle, quat_normalize, slerp, Quaternion};
pub use raycast::{ray_heightfield_intersect, Heightfield, Ray, RayHit, BISECTION_STEPS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("quaternion or vector has zero norm")]
    ZeroNorm,
    #[error("quaternion is not unit (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("points are collinear or too few to span a polygon")]
    Degenerate,
    #[error("invalid polygon: {0}")]
    InvalidPolygon(&'static str),
}
