use nalgebra::Vector3;

/// Centripetal (α = ½) Catmull–Rom curve through a list of distinct points.
///
/// The curve passes through every control point; segment `i` joins points
/// `i` and `i + 1`. End segments use reflected phantom points.
#[derive(Debug, Clone)]
pub struct CatmullRom {
    /// Control points padded with one phantom point at each end.
    padded: Vec<Vector3<f64>>,
    /// Cumulative centripetal knots of `padded`.
    knots: Vec<f64>,
}

const ALPHA: f64 = 0.5;

impl CatmullRom {
    /// Requires at least two points with no consecutive duplicates.
    pub fn new(points: &[Vector3<f64>]) -> Self {
        assert!(points.len() >= 2, "catmull-rom needs two points");
        let n = points.len();
        let mut padded = Vec::with_capacity(n + 2);
        padded.push(2.0 * points[0] - points[1]);
        padded.extend_from_slice(points);
        padded.push(2.0 * points[n - 1] - points[n - 2]);

        let mut knots = Vec::with_capacity(padded.len());
        knots.push(0.0);
        for w in padded.windows(2) {
            let d = (w[1] - w[0]).norm().powf(ALPHA);
            knots.push(knots.last().unwrap() + d);
        }
        Self { padded, knots }
    }

    pub fn segments(&self) -> usize {
        self.padded.len() - 3
    }

    /// Point on segment `seg` at local parameter `u ∈ [0, 1]`.
    pub fn eval(&self, seg: usize, u: f64) -> Vector3<f64> {
        let p = &self.padded[seg..seg + 4];
        let k = &self.knots[seg..seg + 4];
        let (t0, t1, t2, t3) = (k[0], k[1], k[2], k[3]);
        let t = t1 + u * (t2 - t1);
        let lerp = |a: &Vector3<f64>, b: &Vector3<f64>, ta: f64, tb: f64| {
            (tb - t) / (tb - ta) * a + (t - ta) / (tb - ta) * b
        };
        let a1 = lerp(&p[0], &p[1], t0, t1);
        let a2 = lerp(&p[1], &p[2], t1, t2);
        let a3 = lerp(&p[2], &p[3], t2, t3);
        let b1 = lerp(&a1, &a2, t0, t2);
        let b2 = lerp(&a2, &a3, t1, t3);
        lerp(&b1, &b2, t1, t2)
    }
}
