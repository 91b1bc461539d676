//! Procedural tissue-like surfaces: a base plane plus Gaussian bumps, with a
//! deterministic reddish value-noise albedo.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::Heightfield;
use crate::rng::{derive_seed, splitmix64, stream_rng, uniform};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("invalid scene parameters: {0}")]
    BadParams(String),
    #[error("point ({x}, {y}) lies outside the scene bounds")]
    OutOfBounds { x: f64, y: f64 },
}

/// Axis-aligned rectangle in the scene's x-y plane, in cm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn centered(width: f64, height: f64) -> Self {
        Self {
            x_min: -0.5 * width,
            y_min: -0.5 * height,
            x_max: 0.5 * width,
            y_max: 0.5 * height,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        (x.clamp(self.x_min, self.x_max), y.clamp(self.y_min, self.y_max))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub bounds: Bounds,
    pub n_bumps: usize,
    pub base_height: f64,
    pub amplitude_range: [f64; 2],
    pub radius_range: [f64; 2],
    /// Ray-march resolution; the march steps half of this.
    pub cell_size: f64,
    /// Lattice spacing of the coarse albedo noise octave.
    pub palette_cell: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            bounds: Bounds::centered(20.0, 20.0),
            n_bumps: 8,
            base_height: 0.0,
            amplitude_range: [-1.5, 1.5],
            radius_range: [1.0, 4.0],
            cell_size: 0.05,
            palette_cell: 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub amplitude: f64,
    pub radius: f64,
}

impl Bump {
    /// `(value, ∂/∂x, ∂/∂y)` of `a·exp(−|p − c|² / 2r²)`.
    fn eval(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let inv_r2 = 1.0 / (self.radius * self.radius);
        let v = self.amplitude * (-0.5 * (dx * dx + dy * dy) * inv_r2).exp();
        (v, -v * dx * inv_r2, -v * dy * inv_r2)
    }
}

/// Immutable procedural surface. Serializes to the scene JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceScene {
    pub id: u32,
    pub seed: u64,
    pub bounds: Bounds,
    pub base_height: f64,
    pub bumps: Vec<Bump>,
    pub palette_seed: u64,
    pub palette_cell: f64,
    pub cell_size: f64,
}

pub fn generate_scene(id: u32, seed: u64, params: &SceneParams) -> Result<SurfaceScene, SceneError> {
    let [a_lo, a_hi] = params.amplitude_range;
    let [r_lo, r_hi] = params.radius_range;
    if !(a_lo <= a_hi) {
        return Err(SceneError::BadParams(format!("empty amplitude range [{a_lo}, {a_hi}]")));
    }
    if !(r_lo <= r_hi) || !(r_lo > 0.0) {
        return Err(SceneError::BadParams(format!("invalid radius range [{r_lo}, {r_hi}]")));
    }
    if !(params.bounds.width() > 0.0 && params.bounds.height() > 0.0) {
        return Err(SceneError::BadParams("bounds have zero area".into()));
    }
    if !(params.cell_size > 0.0 && params.palette_cell > 0.0) {
        return Err(SceneError::BadParams("cell sizes must be positive".into()));
    }

    let b = params.bounds;
    let mut rng = stream_rng(derive_seed(seed, 0));
    let bumps = (0..params.n_bumps)
        .map(|_| Bump {
            center: [uniform(&mut rng, b.x_min, b.x_max), uniform(&mut rng, b.y_min, b.y_max)],
            amplitude: uniform(&mut rng, a_lo, a_hi),
            radius: uniform(&mut rng, r_lo, r_hi),
        })
        .collect();

    Ok(SurfaceScene {
        id,
        seed,
        bounds: b,
        base_height: params.base_height,
        bumps,
        palette_seed: derive_seed(seed, 1),
        palette_cell: params.palette_cell,
        cell_size: params.cell_size,
    })
}

impl SurfaceScene {
    /// `(h, ∂h/∂x, ∂h/∂y)` accumulated in bump order.
    fn eval(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let mut acc = (self.base_height, 0.0, 0.0);
        for bump in &self.bumps {
            let (v, gx, gy) = bump.eval(x, y);
            acc.0 += v;
            acc.1 += gx;
            acc.2 += gy;
        }
        acc
    }

    pub fn sample_height_and_normal(&self, x: f64, y: f64) -> Result<(f64, Vector3<f64>), SceneError> {
        if !self.bounds.contains(x, y) {
            return Err(SceneError::OutOfBounds { x, y });
        }
        let (h, gx, gy) = self.eval(x, y);
        Ok((h, Vector3::new(-gx, -gy, 1.0).normalize()))
    }

    /// Albedo in `[0, 1]³`; defined everywhere, not only inside the bounds.
    pub fn color(&self, x: f64, y: f64) -> [f64; 3] {
        let coarse = value_noise(self.palette_seed, x / self.palette_cell, y / self.palette_cell);
        let fine = value_noise(
            self.palette_seed ^ 0xA5A5_A5A5,
            2.7 * x / self.palette_cell,
            2.7 * y / self.palette_cell,
        );
        palette(0.7 * coarse + 0.3 * fine)
    }
}

impl Heightfield for SurfaceScene {
    fn height(&self, x: f64, y: f64) -> f64 {
        self.eval(x, y).0
    }

    fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let (_, gx, gy) = self.eval(x, y);
        (gx, gy)
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let b = self.bounds;
        (b.x_min, b.y_min, b.x_max, b.y_max)
    }

    fn height_range(&self) -> (f64, f64) {
        let lo: f64 = self.bumps.iter().map(|b| b.amplitude.min(0.0)).sum();
        let hi: f64 = self.bumps.iter().map(|b| b.amplitude.max(0.0)).sum();
        (self.base_height + lo, self.base_height + hi)
    }

    fn cell_size(&self) -> f64 {
        self.cell_size
    }
}

fn lattice_value(seed: u64, i: i64, j: i64) -> f64 {
    let h = splitmix64(seed ^ splitmix64((i as u64).wrapping_mul(0x9E37_79B9) ^ ((j as u64) << 32)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Smoothstep-interpolated lattice noise in `[0, 1)`.
fn value_noise(seed: u64, u: f64, v: f64) -> f64 {
    let (iu, iv) = (u.floor(), v.floor());
    let (fu, fv) = (u - iu, v - iv);
    let (i, j) = (iu as i64, iv as i64);
    let s = |t: f64| t * t * (3.0 - 2.0 * t);
    let (su, sv) = (s(fu), s(fv));
    let v00 = lattice_value(seed, i, j);
    let v10 = lattice_value(seed, i + 1, j);
    let v01 = lattice_value(seed, i, j + 1);
    let v11 = lattice_value(seed, i + 1, j + 1);
    let a = v00 + (v10 - v00) * su;
    let b = v01 + (v11 - v01) * su;
    a + (b - a) * sv
}

/// Dark red → flesh red → pink.
fn palette(t: f64) -> [f64; 3] {
    const STOPS: [[f64; 3]; 3] = [[0.45, 0.06, 0.08], [0.78, 0.22, 0.25], [0.95, 0.62, 0.66]];
    let t = t.clamp(0.0, 1.0) * 2.0;
    let (k, f) = if t >= 1.0 { (1, t - 1.0) } else { (0, t) };
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    [a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f, a[2] + (b[2] - a[2]) * f]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn flat() -> SurfaceScene {
        let params = SceneParams {
            n_bumps: 0,
            ..SceneParams::default()
        };
        generate_scene(0, 0, &params).unwrap()
    }

    #[test]
    fn flat_scene_has_vertical_normals() {
        let s = flat();
        for (x, y) in [(0.0, 0.0), (-9.9, 3.3), (5.0, -7.5)] {
            let (z, n) = s.sample_height_and_normal(x, y).unwrap();
            assert_eq!(z, 0.0);
            assert_eq!(n, Vector3::z());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let p = SceneParams::default();
        let a = generate_scene(3, 42, &p).unwrap();
        let b = generate_scene(3, 42, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.height(1.234, 5.678).to_bits(),
            b.height(1.234, 5.678).to_bits()
        );
        assert_eq!(a.color(1.234, 5.678), b.color(1.234, 5.678));
    }

    #[test]
    fn different_seeds_give_different_fields() {
        let p = SceneParams::default();
        let a = generate_scene(0, 1, &p).unwrap();
        let b = generate_scene(0, 2, &p).unwrap();
        let mut rng = stream_rng(99);
        let n = 10_000;
        let differing = (0..n)
            .filter(|_| {
                let x = rng.random_range(-10.0..10.0);
                let y = rng.random_range(-10.0..10.0);
                a.height(x, y) != b.height(x, y)
            })
            .count();
        assert!(differing as f64 >= 0.99 * n as f64);
    }

    #[test]
    fn bump_apex_height_and_normal() {
        let p = SceneParams {
            n_bumps: 1,
            ..SceneParams::default()
        };
        let mut s = generate_scene(0, 5, &p).unwrap();
        s.bumps[0] = Bump {
            center: [1.0, 2.0],
            amplitude: 1.2,
            radius: 2.0,
        };
        let (z, n) = s.sample_height_and_normal(1.0, 2.0).unwrap();
        assert_eq!(z, 1.2);
        assert_eq!(n, Vector3::z());
    }

    #[test]
    fn analytic_normals_match_finite_differences() {
        let s = generate_scene(0, 17, &SceneParams::default()).unwrap();
        let mut rng = stream_rng(5);
        let h = 1e-5;
        for _ in 0..1000 {
            let x = rng.random_range(-9.9..9.9);
            let y = rng.random_range(-9.9..9.9);
            let (_, n) = s.sample_height_and_normal(x, y).unwrap();
            let gx = (s.height(x + h, y) - s.height(x - h, y)) / (2.0 * h);
            let gy = (s.height(x, y + h) - s.height(x, y - h)) / (2.0 * h);
            let fd = Vector3::new(-gx, -gy, 1.0).normalize();
            assert!((n - fd).norm() < 1e-5);
            let angle = n.dot(&fd).clamp(-1.0, 1.0).acos().to_degrees();
            assert!(angle < 0.01);
        }
    }

    #[test]
    fn out_of_bounds_and_bad_params() {
        let s = flat();
        assert!(matches!(
            s.sample_height_and_normal(10.5, 0.0),
            Err(SceneError::OutOfBounds { .. })
        ));
        let bad = SceneParams {
            amplitude_range: [1.0, -1.0],
            ..SceneParams::default()
        };
        assert!(matches!(generate_scene(0, 0, &bad), Err(SceneError::BadParams(_))));
        let bad = SceneParams {
            radius_range: [4.0, 1.0],
            ..SceneParams::default()
        };
        assert!(matches!(generate_scene(0, 0, &bad), Err(SceneError::BadParams(_))));
    }

    #[test]
    fn json_round_trip() {
        let s = generate_scene(2, 9, &SceneParams::default()).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: SurfaceScene = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.color(0.3, -4.0), s.color(0.3, -4.0));
    }

    #[test]
    fn colors_are_in_unit_cube() {
        let s = generate_scene(0, 4, &SceneParams::default()).unwrap();
        for i in 0..200 {
            let c = s.color(-10.0 + 0.1 * i as f64, 3.0 - 0.07 * i as f64);
            assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(c[0] > c[1]);
        }
    }
}
