use super::{PlanError, TargetRegion};
use crate::geometry::{Point2, Polygon2D};

/// Eigenvalues closer than this are treated as a tie, resolved to world x.
const AXIS_TIE_EPS: f64 = 1e-9;

/// Unit direction of the largest eigenvector of the vertex covariance,
/// signed so that its first nonzero component is positive.
pub fn principal_axis(hull: &Polygon2D) -> Point2 {
    let v = hull.vertices();
    let n = v.len() as f64;
    let mean = v.iter().fold(Point2::zeros(), |acc, p| acc + p) / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in v {
        let d = p - mean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    let (sxx, sxy, syy) = (sxx / n, sxy / n, syy / n);

    // Closed-form symmetric 2×2 eigen-decomposition.
    let half_diff = 0.5 * (sxx - syy);
    let disc = (half_diff * half_diff + sxy * sxy).sqrt();
    if 2.0 * disc <= AXIS_TIE_EPS {
        return Point2::new(1.0, 0.0);
    }
    let lambda = 0.5 * (sxx + syy) + disc;
    // (A − λI)e = 0: pick the better-conditioned row.
    let e = if (sxx - lambda).abs() > (syy - lambda).abs() {
        Point2::new(-sxy, sxx - lambda)
    } else {
        Point2::new(syy - lambda, -sxy)
    };
    let e = e.normalize();
    if e.x < 0.0 || (e.x == 0.0 && e.y < 0.0) {
        -e
    } else {
        e
    }
}

/// One clipped scan line of the raster, in travel order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanLine {
    pub start: Point2,
    pub end: Point2,
}

/// Scan lines parallel to the principal axis, `spacing` apart and centred on
/// the hull's extent across the axis, clipped to the hull. The first line
/// (smallest cross-axis offset) runs along the axis; each later line starts
/// at its endpoint nearest the previous line's end.
pub fn scan_lines(hull: &Polygon2D, spacing: f64) -> Vec<ScanLine> {
    let u = principal_axis(hull);
    let v = Point2::new(-u.y, u.x);
    let (v_min, v_max) = hull
        .vertices()
        .iter()
        .map(|p| p.dot(&v))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)));
    let extent = v_max - v_min;
    let n_lines = (extent / spacing).floor() as usize + 1;
    let first = v_min + 0.5 * (extent - (n_lines - 1) as f64 * spacing);

    let mut lines: Vec<ScanLine> = Vec::with_capacity(n_lines);
    for k in 0..n_lines {
        let offset = first + k as f64 * spacing;
        let origin = offset * v;
        let Some((t0, t1)) = hull.clip_line(&origin, &u) else {
            continue;
        };
        let (a, b) = (origin + t0 * u, origin + t1 * u);
        // Enter each line from the end nearer the previous exit. This is plain
        // alternation except where a short line near a hull vertex would
        // otherwise force a doubling back.
        let line = match lines.last() {
            None => ScanLine { start: a, end: b },
            Some(prev) if (a - prev.end).norm() <= (b - prev.end).norm() => {
                ScanLine { start: a, end: b }
            }
            Some(_) => ScanLine { start: b, end: a },
        };
        lines.push(line);
    }
    lines
}

/// Detours shorter than this are dropped.
const EXTEND_EPS: f64 = 1e-6;

/// Points of `hull ∩ {p : v_lo ≤ p·v ≤ v_hi}` with the smallest and largest
/// projection on `u`.
fn band_extremes(hull: &Polygon2D, u: &Point2, v: &Point2, v_lo: f64, v_hi: f64) -> (Point2, Point2) {
    let mut candidates: Vec<Point2> = hull
        .vertices()
        .iter()
        .filter(|p| (v_lo..=v_hi).contains(&p.dot(v)))
        .copied()
        .collect();
    for (a, b) in hull.edges() {
        let (sa, sb) = (a.dot(v), b.dot(v));
        for level in [v_lo, v_hi] {
            if (sa - level) * (sb - level) < 0.0 {
                candidates.push(a + (level - sa) / (sb - sa) * (b - a));
            }
        }
    }
    let key = |p: &&Point2| p.dot(u);
    let lo = *candidates.iter().min_by(|a, b| key(a).total_cmp(&key(b))).expect("band meets hull");
    let hi = *candidates.iter().max_by(|a, b| key(a).total_cmp(&key(b))).expect("band meets hull");
    (lo, hi)
}

/// Boustrophedon raster over the region.
///
/// Each scan line contributes both clipped endpoints and evenly spaced
/// interior waypoints no more than `spacing` apart. Where the hull reaches
/// further along the axis inside the line's band (within `spacing / 2` of the
/// line), as at a tapering tip, the line is lengthened by a detour to that
/// farthest hull point. A hull narrower than `spacing` along and across its
/// principal axis collapses to its centroid.
pub fn plan_raster_path(region: &TargetRegion, spacing: f64) -> Result<Vec<Point2>, PlanError> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(PlanError::BadParams(format!("spacing must be positive, got {spacing}")));
    }
    let hull = &region.hull;
    let u = principal_axis(hull);
    let v = Point2::new(-u.y, u.x);
    let extent = |axis: &Point2| {
        let (lo, hi) = hull
            .vertices()
            .iter()
            .map(|p| p.dot(axis))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)));
        hi - lo
    };
    if extent(&u) < spacing && extent(&v) < spacing {
        return Ok(vec![hull.centroid()]);
    }

    let mut waypoints = Vec::new();
    for line in scan_lines(hull, spacing) {
        let offset = line.start.dot(&v);
        let (lo, hi) = band_extremes(hull, &u, &v, offset - 0.5 * spacing, offset + 0.5 * spacing);
        // Order the band extremes to match the line's direction of travel.
        let (head, tail) = if (line.end - line.start).dot(&u) >= 0.0 { (lo, hi) } else { (hi, lo) };
        // Only detour where the band reaches past the line's end along the axis.
        let reach = |extreme: &Point2, end: &Point2, outward: &Point2| (extreme - end).dot(outward) > EXTEND_EPS;
        let dir = (line.end - line.start).try_normalize(1e-12).unwrap_or(u);
        let mut corners = Vec::with_capacity(4);
        if reach(&head, &line.start, &-dir) {
            corners.push(head);
        }
        corners.push(line.start);
        corners.push(line.end);
        if reach(&tail, &line.end, &dir) {
            corners.push(tail);
        }
        waypoints.push(corners[0]);
        for pair in corners.windows(2) {
            let len = (pair[1] - pair[0]).norm();
            if len <= 1e-12 {
                continue;
            }
            let segments = ((len / spacing).ceil() as usize).max(1);
            for i in 1..segments {
                let f = i as f64 / segments as f64;
                waypoints.push(pair[0] + f * (pair[1] - pair[0]));
            }
            waypoints.push(pair[1]);
        }
    }
    if waypoints.is_empty() {
        return Err(PlanError::EmptyPath);
    }
    Ok(waypoints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point_in_polygon;
    use crate::planner::sample_target_region;
    use crate::scene::Bounds;

    fn region(vertices: Vec<Point2>) -> TargetRegion {
        TargetRegion {
            hull: Polygon2D::new(vertices).unwrap(),
            seed: 0,
            mean: [0.0, 0.0],
            covariance: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn polyline_length(w: &[Point2]) -> f64 {
        w.windows(2).map(|s| (s[1] - s[0]).norm()).sum()
    }

    /// Cell centres of a `cell`-sized grid lying inside the hull.
    fn interior_cells(hull: &Polygon2D, cell: f64) -> Vec<Point2> {
        let (lo, hi) = hull.bounding_box();
        let nx = ((hi.x - lo.x) / cell).ceil() as usize;
        let ny = ((hi.y - lo.y) / cell).ceil() as usize;
        let mut cells = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                let c = p(lo.x + (i as f64 + 0.5) * cell, lo.y + (j as f64 + 0.5) * cell);
                if point_in_polygon(&c, hull) {
                    cells.push(c);
                }
            }
        }
        cells
    }

    #[test]
    fn square_raster_closed_form() {
        let sq = region(vec![p(0., 0.), p(4., 0.), p(4., 4.), p(0., 4.)]);
        let w = plan_raster_path(&sq, 1.0).unwrap();
        // 5 lines of 5 waypoints, serpentine.
        assert_eq!(w.len(), 25);
        assert_eq!(w[0], p(0.0, 0.0));
        assert_eq!(w[4], p(4.0, 0.0));
        assert_eq!(w[5], p(4.0, 1.0));
        assert_eq!(w[9], p(0.0, 1.0));
        assert!((polyline_length(&w) - 24.0).abs() < 1e-9);

        // Brute-force oracle: every 0.5 cm cell has a waypoint within spacing·√2/2.
        for c in interior_cells(&sq.hull, 0.5) {
            let d = w.iter().map(|q| (q - c).norm()).fold(f64::INFINITY, f64::min);
            assert!(d <= 1.0 * std::f64::consts::FRAC_1_SQRT_2 + 1e-12);
        }
    }

    #[test]
    fn tiny_triangle_collapses_to_centroid() {
        let t = region(vec![p(0., 0.), p(0.3, 0.), p(0., 0.3)]);
        let w = plan_raster_path(&t, 0.8).unwrap();
        assert_eq!(w.len(), 1);
        assert!((w[0] - p(0.1, 0.1)).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_spacing() {
        let sq = region(vec![p(0., 0.), p(4., 0.), p(4., 4.), p(0., 4.)]);
        assert!(matches!(plan_raster_path(&sq, 0.0), Err(PlanError::BadParams(_))));
    }

    #[test]
    fn lines_follow_principal_axis() {
        // Long thin rectangle rotated by 30°.
        let (c, s) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
        let rot = |x: f64, y: f64| p(c * x - s * y, s * x + c * y);
        let r = region(vec![rot(0., 0.), rot(6., 0.), rot(6., 2.), rot(0., 2.)]);
        let axis = principal_axis(&r.hull);
        assert!((axis - p(c, s)).norm() < 1e-9);
        let lines = scan_lines(&r.hull, 0.8);
        assert_eq!(lines.len(), 3);
        for l in &lines {
            let d = (l.end - l.start).normalize();
            assert!(d.dot(&axis).abs() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn waypoints_lie_on_lines_at_most_spacing_apart() {
        let b = Bounds::centered(20.0, 20.0);
        let r = sample_target_region(4, &b, [0.0, 0.0], [[2.0, 0.5], [0.5, 1.0]], 32).unwrap();
        let w = plan_raster_path(&r, 0.8).unwrap();
        // Every clipped endpoint appears, in line order.
        let mut rest = w.as_slice();
        for l in scan_lines(&r.hull, 0.8) {
            let i = rest.iter().position(|q| *q == l.start).unwrap();
            let j = rest.iter().position(|q| *q == l.end).unwrap();
            assert!(i < j);
            for pair in rest[i..=j].windows(2) {
                assert!((pair[1] - pair[0]).norm() <= 0.8 + 1e-9);
            }
            rest = &rest[j + 1..];
        }
        // Detours stay on the hull.
        assert!(w.iter().all(|q| point_in_polygon(q, &r.hull) || r.hull.edges().any(|(a, b)| {
            let t = ((q - a).dot(&(b - a)) / (b - a).norm_squared()).clamp(0.0, 1.0);
            (a + t * (b - a) - q).norm() < 1e-9
        })));
    }

    #[test]
    fn tapering_tip_is_reached() {
        let r = region(vec![p(0.47, -1.34), p(1.73, 1.25), p(1.58, 2.2), p(1.08, 2.53)]);
        let w = plan_raster_path(&r, 0.8).unwrap();
        let tip = p(0.47, -1.34);
        assert!(w.iter().any(|q| (q - tip).norm() < 1e-9));
        let cells = interior_cells(&r.hull, 0.2);
        assert!(cells.iter().all(|c| w.iter().any(|q| (q - c).norm() <= 0.8)));
    }

    #[test]
    fn random_hulls_are_covered() {
        let b = Bounds::centered(20.0, 20.0);
        for seed in 0..40 {
            let r = sample_target_region(seed, &b, [1.0, -2.0], [[1.5, 0.3], [0.3, 0.8]], 24).unwrap();
            let w = plan_raster_path(&r, 0.8).unwrap();
            let cells = interior_cells(&r.hull, 0.2);
            let covered = cells
                .iter()
                .filter(|c| w.iter().any(|q| (*q - **c).norm() <= 0.8))
                .count();
            assert!(covered as f64 >= 0.99 * cells.len() as f64, "seed {seed}");
        }
    }
}
