use std::path::Path;

use nalgebra::Vector3;

use super::{build_samples, predict, TrainError};
use crate::policy::Policy;
use crate::simulator::Demonstration;

const BACKGROUND: [u8; 3] = [245, 245, 240];
const TRACK: [u8; 3] = [40, 40, 40];
const START: [u8; 3] = [30, 150, 60];
const PREDICTED: [u8; 3] = [220, 80, 20];
const HULL: [u8; 3] = [40, 90, 200];
const MARGIN: f64 = 8.0;

struct Canvas {
    size: usize,
    px: Vec<u8>,
    lo: (f64, f64),
    scale: f64,
}

impl Canvas {
    fn new(size: usize, points: &[Vector3<f64>]) -> Self {
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in points {
            lo = (lo.0.min(p.x), lo.1.min(p.y));
            hi = (hi.0.max(p.x), hi.1.max(p.y));
        }
        let extent = (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-6);
        let scale = (size as f64 - 2.0 * MARGIN) / extent;
        Self {
            size,
            px: BACKGROUND.repeat(size * size),
            lo,
            scale,
        }
    }

    /// Top-down: world +x to the right, world +y up.
    fn to_pixel(&self, p: &Vector3<f64>) -> (f64, f64) {
        let u = MARGIN + (p.x - self.lo.0) * self.scale;
        let v = self.size as f64 - 1.0 - MARGIN - (p.y - self.lo.1) * self.scale;
        (u, v)
    }

    fn set(&mut self, u: i64, v: i64, c: [u8; 3]) {
        if u >= 0 && v >= 0 && (u as usize) < self.size && (v as usize) < self.size {
            let k = 3 * (v as usize * self.size + u as usize);
            self.px[k..k + 3].copy_from_slice(&c);
        }
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), c: [u8; 3]) {
        let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            self.set(
                (a.0 + t * (b.0 - a.0)).round() as i64,
                (a.1 + t * (b.1 - a.1)).round() as i64,
                c,
            );
        }
    }

    fn dot(&mut self, p: (f64, f64), r: i64, c: [u8; 3]) {
        let (u, v) = (p.0.round() as i64, p.1.round() as i64);
        for dv in -r..=r {
            for du in -r..=r {
                self.set(u + du, v + dv, c);
            }
        }
    }

    fn ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.size, self.size).into_bytes();
        out.extend_from_slice(&self.px);
        out
    }
}

/// Top-down image of the demonstration's world trajectory with, for each
/// `(t, dpos)`, a dot at `pos_t + dpos`. `dpos` is in the camera frame.
pub fn render_predictions_ppm(demo: &Demonstration, predictions: &[(usize, [f64; 3])], size: usize) -> Vec<u8> {
    let cam = &demo.meta.camera.pose;
    let track: Vec<Vector3<f64>> = demo.poses_cam.iter().map(|p| cam.transform_point(&p.position)).collect();
    let predicted: Vec<Vector3<f64>> = predictions
        .iter()
        .filter(|(t, _)| *t < demo.poses_cam.len())
        .map(|(t, d)| cam.transform_point(&(demo.poses_cam[*t].position + Vector3::from(*d))))
        .collect();
    let all: Vec<_> = track.iter().chain(&predicted).copied().collect();
    let mut canvas = Canvas::new(size, &all);
    for w in track.windows(2) {
        canvas.line(canvas.to_pixel(&w[0]), canvas.to_pixel(&w[1]), TRACK);
    }
    if let Some(first) = track.first() {
        canvas.dot(canvas.to_pixel(first), 2, START);
    }
    for p in &predicted {
        canvas.dot(canvas.to_pixel(p), 1, PREDICTED);
    }
    canvas.ppm()
}

/// Top-down image of the target hull and the demonstration's world
/// trajectory.
pub fn render_path_ppm(demo: &Demonstration, size: usize) -> Vec<u8> {
    let cam = &demo.meta.camera.pose;
    let track: Vec<Vector3<f64>> = demo.poses_cam.iter().map(|p| cam.transform_point(&p.position)).collect();
    let hull: Vec<Vector3<f64>> = demo.meta.region.hull.vertices().iter().map(|v| Vector3::new(v.x, v.y, 0.0)).collect();
    let all: Vec<_> = track.iter().chain(&hull).copied().collect();
    let mut canvas = Canvas::new(size, &all);
    for (k, a) in hull.iter().enumerate() {
        let b = &hull[(k + 1) % hull.len()];
        canvas.line(canvas.to_pixel(a), canvas.to_pixel(b), HULL);
    }
    for w in track.windows(2) {
        canvas.line(canvas.to_pixel(&w[0]), canvas.to_pixel(&w[1]), TRACK);
    }
    if let Some(first) = track.first() {
        canvas.dot(canvas.to_pixel(first), 2, START);
    }
    canvas.ppm()
}

/// Plot the policy's N-step position predictions over a demonstration.
pub fn visualize_predictions(policy: &Policy, demo: &Demonstration, n: usize, size: usize) -> Result<Vec<u8>, TrainError> {
    let samples = build_samples(&[demo], policy.config(), n)?;
    let preds = predict(policy, &samples)?;
    let pairs: Vec<_> = samples.iter().zip(&preds).map(|(s, p)| (s.t, p.dpos)).collect();
    Ok(render_predictions_ppm(demo, &pairs, size))
}

pub fn write_ppm(path: &Path, bytes: &[u8]) -> Result<(), TrainError> {
    std::fs::write(path, bytes).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))
}
