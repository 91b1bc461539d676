use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::GeometryError;

pub type Point2 = Vector2<f64>;

/// Inclusive tolerance on edge cross products for containment.
const CONTAINMENT_EPS: f64 = 1e-12;

fn cross(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct Polygon2D {
    vertices: Vec<Point2>,
}

impl Polygon2D {
    /// Validates convexity, orientation and the absence of repeated vertices.
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::InvalidPolygon("fewer than 3 vertices"));
        }
        for i in 0..n {
            let a = &vertices[i];
            let b = &vertices[(i + 1) % n];
            let c = &vertices[(i + 2) % n];
            if a == b {
                return Err(GeometryError::InvalidPolygon("duplicate consecutive vertex"));
            }
            if cross(a, b, c) < 0.0 {
                return Err(GeometryError::InvalidPolygon("not convex and counter-clockwise"));
            }
        }
        if shoelace(&vertices) <= 0.0 {
            return Err(GeometryError::InvalidPolygon("zero area"));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point2 {
        let v = &self.vertices;
        let o = v[0];
        let mut acc = Point2::zeros();
        let mut area2 = 0.0;
        for i in 1..v.len() - 1 {
            let a = cross(&o, &v[i], &v[i + 1]);
            acc += a * (o + v[i] + v[i + 1]) / 3.0;
            area2 += a;
        }
        acc / area2
    }

    /// Axis-aligned bounds as `(min, max)`.
    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Parameter interval `[t0, t1]` where `origin + t·dir` lies in the polygon.
    pub fn clip_line(&self, origin: &Point2, dir: &Point2) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for (a, b) in self.edges() {
            // Inside is left of a→b: cross(b − a, p − a) ≥ 0.
            let e = b - a;
            let num = e.x * (origin.y - a.y) - e.y * (origin.x - a.x);
            let den = e.x * dir.y - e.y * dir.x;
            if den.abs() < 1e-15 {
                if num < -CONTAINMENT_EPS {
                    return None;
                }
                continue;
            }
            let t = -num / den;
            if den > 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

impl TryFrom<Vec<Point2>> for Polygon2D {
    type Error = GeometryError;

    fn try_from(v: Vec<Point2>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<Polygon2D> for Vec<Point2> {
    fn from(p: Polygon2D) -> Self {
        p.vertices
    }
}

fn shoelace(v: &[Point2]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (&v[i], &v[(i + 1) % n]);
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s
}

/// Andrew's monotone chain. Collinear boundary points are dropped.
pub fn convex_hull(points: &[Point2]) -> Result<Polygon2D, GeometryError> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(GeometryError::Degenerate);
    }

    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for p in pts.iter() {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower_len = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();

    if hull.len() < 3 {
        return Err(GeometryError::Degenerate);
    }
    Polygon2D::new(hull).map_err(|_| GeometryError::Degenerate)
}

/// Inside or on the boundary.
pub fn point_in_polygon(p: &Point2, poly: &Polygon2D) -> bool {
    poly.edges().all(|(a, b)| cross(&a, &b, p) >= -CONTAINMENT_EPS)
}

/// Shoelace area in cm².
pub fn polygon_area(poly: &Polygon2D) -> f64 {
    shoelace(poly.vertices())
}
