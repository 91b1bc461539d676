use serde::{Deserialize, Serialize};

use super::PlanError;
use crate::geometry::{convex_hull, polygon_area, Point2, Polygon2D};
use crate::rng::{box_muller, derive_seed, stream_rng};
use crate::scene::Bounds;

pub const MAX_REGION_ATTEMPTS: u64 = 100;
pub const MIN_REGION_AREA: f64 = 1.0;
/// Largest accepted hull area as a fraction of the scene area.
pub const MAX_REGION_FRACTION: f64 = 0.25;

/// 2D target scanning area: convex hull of Gaussian samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRegion {
    pub hull: Polygon2D,
    pub seed: u64,
    pub mean: [f64; 2],
    pub covariance: [[f64; 2]; 2],
}

impl TargetRegion {
    pub fn area(&self) -> f64 {
        polygon_area(&self.hull)
    }
}

/// Lower-triangular Cholesky factor `[l11, l21, l22]` of a 2×2 SPD matrix.
pub(crate) fn cholesky2(c: &[[f64; 2]; 2]) -> Result<[f64; 3], PlanError> {
    let scale = c[0][0].abs().max(c[1][1].abs()).max(f64::MIN_POSITIVE);
    let symmetric = (c[0][1] - c[1][0]).abs() <= 1e-12 * scale;
    if !symmetric || !(c[0][0] > 0.0) {
        return Err(PlanError::NotSpd);
    }
    let l11 = c[0][0].sqrt();
    let l21 = c[1][0] / l11;
    let rest = c[1][1] - l21 * l21;
    if !(rest > 1e-12 * scale) {
        return Err(PlanError::NotSpd);
    }
    Ok([l11, l21, rest.sqrt()])
}

/// Sample `n_points` from `N(mean, covariance)`, clip them to the bounds and
/// fit a convex hull. Hulls smaller than 1 cm² or larger than a quarter of the
/// scene are rejected and resampled from a fresh sub-stream.
pub fn sample_target_region(
    seed: u64,
    bounds: &Bounds,
    mean: [f64; 2],
    covariance: [[f64; 2]; 2],
    n_points: usize,
) -> Result<TargetRegion, PlanError> {
    if n_points < 8 {
        return Err(PlanError::BadParams(format!("need at least 8 points, got {n_points}")));
    }
    if !bounds.contains(mean[0], mean[1]) {
        return Err(PlanError::OutOfBounds {
            x: mean[0],
            y: mean[1],
        });
    }
    let [l11, l21, l22] = cholesky2(&covariance)?;
    let max_area = MAX_REGION_FRACTION * bounds.area();

    for attempt in 0..MAX_REGION_ATTEMPTS {
        let mut rng = stream_rng(derive_seed(seed, attempt));
        let mut points = Vec::with_capacity(n_points);
        while points.len() < n_points {
            let (z0, z1) = box_muller(&mut rng);
            let x = mean[0] + l11 * z0;
            let y = mean[1] + l21 * z0 + l22 * z1;
            let (x, y) = bounds.clamp(x, y);
            points.push(Point2::new(x, y));
        }
        let Ok(hull) = convex_hull(&points) else {
            continue;
        };
        let area = polygon_area(&hull);
        if area >= MIN_REGION_AREA && area <= max_area {
            return Ok(TargetRegion {
                hull,
                seed,
                mean,
                covariance,
            });
        }
    }
    Err(PlanError::RegionSamplingFailed {
        attempts: MAX_REGION_ATTEMPTS as usize,
    })
}
