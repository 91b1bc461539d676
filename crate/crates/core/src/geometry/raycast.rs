use nalgebra::Vector3;

use super::GeometryError;

/// Bisection refinements applied after the march brackets a crossing.
pub const BISECTION_STEPS: usize = 40;

/// Ray with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl Ray {
    /// Normalizes `direction`.
    pub fn new(origin: Vector3<f64>, direction: Vector3<f64>) -> Result<Self, GeometryError> {
        let n = direction.norm();
        if !(n > 1e-12) {
            return Err(GeometryError::ZeroNorm);
        }
        Ok(Self {
            origin,
            direction: direction / n,
        })
    }

    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.origin + t * self.direction
    }
}

/// Surface `z = h(x, y)` over an axis-aligned rectangle.
pub trait Heightfield {
    fn height(&self, x: f64, y: f64) -> f64;
    /// `(∂h/∂x, ∂h/∂y)`.
    fn gradient(&self, x: f64, y: f64) -> (f64, f64);
    /// `(x_min, y_min, x_max, y_max)`.
    fn bounds(&self) -> (f64, f64, f64, f64);
    /// Conservative `(min, max)` of `h` over the bounds.
    fn height_range(&self) -> (f64, f64);
    /// Smallest horizontal feature size resolved by the march.
    fn cell_size(&self) -> f64;

    fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.bounds();
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    /// Upward unit normal `normalize(−h_x, −h_y, 1)`.
    fn normal(&self, x: f64, y: f64) -> Vector3<f64> {
        let (gx, gy) = self.gradient(x, y);
        Vector3::new(-gx, -gy, 1.0).normalize()
    }

    /// Length scale for the vertical hit tolerance.
    fn scale(&self) -> f64 {
        let (x0, y0, x1, y1) = self.bounds();
        (x1 - x0).max(y1 - y0)
    }
}

/// Surface intersection of a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub t: f64,
}

/// `[t_enter, t_exit]` of the ray inside the box spanned by the bounds and the
/// height range (slab test).
fn slab_interval(ray: &Ray, field: &dyn Heightfield) -> Option<(f64, f64)> {
    let (x0, y0, x1, y1) = field.bounds();
    let (z0, z1) = field.height_range();
    let pad = field.cell_size();
    let lo = [x0, y0, z0 - pad];
    let hi = [x1, y1, z1 + pad];
    let mut t_enter = 0.0f64;
    let mut t_exit = f64::INFINITY;
    for axis in 0..3 {
        let o = ray.origin[axis];
        let d = ray.direction[axis];
        if d.abs() < 1e-300 {
            if o < lo[axis] || o > hi[axis] {
                return None;
            }
            continue;
        }
        let (mut ta, mut tb) = ((lo[axis] - o) / d, (hi[axis] - o) / d);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t_enter = t_enter.max(ta);
        t_exit = t_exit.min(tb);
    }
    (t_enter <= t_exit).then_some((t_enter, t_exit))
}

/// First intersection of `ray` with the heightfield at `t ≥ 0`.
///
/// Marches the ray through the height slab with a fixed step of half a cell,
/// then refines the first sign change of `z(t) − h(x(t), y(t))` by bisection.
/// Returns `None` when the ray leaves the bounds without crossing the surface
/// or starts below it.
pub fn ray_heightfield_intersect(ray: &Ray, field: &dyn Heightfield) -> Option<RayHit> {
    let gap = |t: f64| {
        let p = ray.at(t);
        p.z - field.height(p.x, p.y)
    };

    let o = ray.origin;
    if field.contains(o.x, o.y) && gap(0.0) < 0.0 {
        return None;
    }
    let (t_enter, t_exit) = slab_interval(ray, field)?;
    let step = 0.5 * field.cell_size();

    let mut t_prev = t_enter;
    if gap(t_prev) <= 0.0 {
        // Entering the slab through a side wall already under the surface.
        return None;
    }
    let mut found = None;
    let n_steps = ((t_exit - t_enter) / step).ceil() as usize;
    for i in 1..=n_steps {
        let t = (t_enter + i as f64 * step).min(t_exit);
        let g = gap(t);
        if g <= 0.0 {
            found = Some((t_prev, t));
            break;
        }
        t_prev = t;
    }
    let (mut a, mut b) = found?;
    for _ in 0..BISECTION_STEPS {
        let m = 0.5 * (a + b);
        if gap(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let t = 0.5 * (a + b);
    let p = ray.at(t);
    if !field.contains(p.x, p.y) {
        return None;
    }
    let z = field.height(p.x, p.y);
    if (p.z - z).abs() > 1e-6 * field.scale() {
        return None;
    }
    Some(RayHit {
        point: Vector3::new(p.x, p.y, z),
        normal: field.normal(p.x, p.y),
        t,
    })
}
