use serde::{Deserialize, Serialize};

use super::tape::{ConvGeom, NodeId, Tape};
use super::PolicyError;
use crate::rng::{box_muller, stream_rng};

/// Image channels fed to the vision encoder: R, G, B, depth / far, mask.
pub const IMAGE_CHANNELS: usize = 5;
/// Stem patch size and stride.
const STEM: usize = 4;
/// Gain on the He scale for the output heads.
const HEAD_GAIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// Square input size in pixels; must be a multiple of 4.
    pub image_size: usize,
    pub vision_channels: Vec<usize>,
    pub pose_hidden: Vec<usize>,
    pub feature_dim: usize,
    pub decoder_channels: usize,
    pub decoder_blocks: usize,
    pub decoder_groups: usize,
    /// Scales every channel count, hidden width and the feature size.
    pub width_mult: usize,
    pub w_huber: f64,
    pub w_nll: f64,
    pub w_l2: f64,
    pub huber_delta: f64,
    /// Depth is divided by this before entering the network (cm).
    pub depth_scale: f64,
    /// Positions are divided by this before entering the pose encoder (cm).
    pub position_scale: f64,
    pub seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            image_size: 64,
            vision_channels: vec![8, 16, 32, 64],
            pose_hidden: vec![64, 64],
            feature_dim: 64,
            decoder_channels: 16,
            decoder_blocks: 4,
            decoder_groups: 4,
            width_mult: 1,
            w_huber: 1.0,
            w_nll: 0.1,
            w_l2: 1.0,
            huber_delta: 0.5,
            depth_scale: 40.0,
            position_scale: 10.0,
            seed: 0,
        }
    }
}

impl PolicyConfig {
    pub fn feature(&self) -> usize {
        self.feature_dim * self.width_mult
    }

    pub fn dec_channels(&self) -> usize {
        self.decoder_channels * self.width_mult
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: String| Err(PolicyError::BadConfig(m));
        if self.image_size == 0 || self.image_size % STEM != 0 {
            return bad(format!("image size {} must be a positive multiple of {STEM}", self.image_size));
        }
        if self.vision_channels.is_empty() || self.vision_channels.contains(&0) {
            return bad("vision channels must be nonempty and positive".into());
        }
        if self.pose_hidden.contains(&0) || self.feature_dim == 0 || self.width_mult == 0 {
            return bad("widths must be positive".into());
        }
        let (c, g) = (self.dec_channels(), self.decoder_groups);
        if c == 0 || g == 0 || c % g != 0 {
            return bad(format!("decoder channels {c} must be a positive multiple of groups {g}"));
        }
        if (2 * self.feature()) % c != 0 {
            return bad(format!("2·feature {} must be divisible by decoder channels {c}", 2 * self.feature()));
        }
        let w = [self.w_huber, self.w_nll, self.w_l2];
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || w.iter().all(|v| *v == 0.0) {
            return bad(format!("loss weights {w:?} must be nonnegative and not all zero"));
        }
        if !(self.huber_delta > 0.0) || !(self.depth_scale > 0.0) || !(self.position_scale > 0.0) {
            return bad("delta and input scales must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// Normal with standard deviation `gain · √(2 / fan_in)`.
    He { fan_in: usize, gain: f64 },
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub init: Init,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvLayer {
    w: usize,
    b: usize,
    geom: ConvGeom,
}

#[derive(Debug, Clone, Copy)]
struct LinearLayer {
    w: usize,
    b: usize,
    n_in: usize,
    n_out: usize,
}

#[derive(Debug, Clone)]
struct ResBlock {
    conv1: ConvLayer,
    conv2: ConvLayer,
    shortcut: Option<ConvLayer>,
}

#[derive(Debug, Clone)]
struct DecBlock {
    pw1: ConvLayer,
    grouped: ConvLayer,
    pw2: ConvLayer,
}

/// Layer layout and parameter manifest derived from a config.
#[derive(Debug, Clone)]
pub struct Architecture {
    pub config: PolicyConfig,
    pub specs: Vec<TensorSpec>,
    pub n_params: usize,
    stem: ConvLayer,
    stages: Vec<ResBlock>,
    vision_fc: LinearLayer,
    pose_mlp: Vec<LinearLayer>,
    decoder: Vec<DecBlock>,
    dec_len: usize,
    head_t: LinearLayer,
    head_r: LinearLayer,
}

struct Alloc {
    specs: Vec<TensorSpec>,
    next: usize,
}

impl Alloc {
    fn tensor(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        let offset = self.next;
        self.next += shape.iter().product::<usize>();
        self.specs.push(TensorSpec {
            name,
            shape,
            offset,
            init,
        });
        offset
    }

    fn conv(&mut self, name: &str, geom: ConvGeom, gain: f64) -> ConvLayer {
        let cg = geom.c_in / geom.groups;
        let fan_in = cg * geom.kh * geom.kw;
        let w = self.tensor(
            format!("{name}.weight"),
            vec![geom.c_out, cg, geom.kh, geom.kw],
            Init::He { fan_in, gain },
        );
        let b = self.tensor(format!("{name}.bias"), vec![geom.c_out], Init::Zero);
        ConvLayer { w, b, geom }
    }

    fn linear(&mut self, name: &str, n_in: usize, n_out: usize, gain: f64) -> LinearLayer {
        let w = self.tensor(format!("{name}.weight"), vec![n_out, n_in], Init::He { fan_in: n_in, gain });
        let b = self.tensor(format!("{name}.bias"), vec![n_out], Init::Zero);
        LinearLayer { w, b, n_in, n_out }
    }
}

fn conv_geom(c_in: usize, hw: usize, c_out: usize, k: usize, stride: usize, pad: usize) -> ConvGeom {
    ConvGeom {
        c_in,
        h: hw,
        w: hw,
        c_out,
        kh: k,
        kw: k,
        stride,
        ph: pad,
        pw: pad,
        groups: 1,
    }
}

fn conv1d_geom(c: usize, len: usize, k: usize, groups: usize) -> ConvGeom {
    ConvGeom {
        c_in: c,
        h: 1,
        w: len,
        c_out: c,
        kh: 1,
        kw: k,
        stride: 1,
        ph: 0,
        pw: k / 2,
        groups,
    }
}

impl Architecture {
    pub fn new(config: &PolicyConfig) -> Result<Self, PolicyError> {
        config.validate()?;
        let m = config.width_mult;
        let mut a = Alloc {
            specs: Vec::new(),
            next: 0,
        };

        // Vision encoder: patchify stem, then one basic residual block per
        // stage; every stage after the first halves the resolution.
        let chans: Vec<usize> = config.vision_channels.iter().map(|c| c * m).collect();
        let mut hw = config.image_size / STEM;
        let stem = a.conv(
            "vision.stem",
            conv_geom(IMAGE_CHANNELS, config.image_size, chans[0], STEM, STEM, 0),
            1.0,
        );
        let mut stages = Vec::new();
        let mut c_prev = chans[0];
        for (i, &c) in chans.iter().enumerate() {
            let stride = if i == 0 { 1 } else { 2 };
            let g1 = conv_geom(c_prev, hw, c, 3, stride, 1);
            let conv1 = a.conv(&format!("vision.stage{i}.conv1"), g1, 1.0);
            let hw_out = g1.out_hw().0;
            let conv2 = a.conv(&format!("vision.stage{i}.conv2"), conv_geom(c, hw_out, c, 3, 1, 1), 0.5);
            let shortcut = (stride != 1 || c_prev != c)
                .then(|| a.conv(&format!("vision.stage{i}.shortcut"), conv_geom(c_prev, hw, c, 1, stride, 0), 1.0));
            stages.push(ResBlock { conv1, conv2, shortcut });
            hw = hw_out;
            c_prev = c;
        }
        let f = config.feature();
        let vision_fc = a.linear("vision.fc", c_prev, f, 1.0);

        let mut pose_mlp = Vec::new();
        let mut n_prev = 7;
        for (i, &h) in config.pose_hidden.iter().enumerate() {
            pose_mlp.push(a.linear(&format!("pose.fc{i}"), n_prev, h * m, 1.0));
            n_prev = h * m;
        }
        pose_mlp.push(a.linear("pose.out", n_prev, f, 1.0));

        let c = config.dec_channels();
        let dec_len = 2 * f / c;
        let decoder = (0..config.decoder_blocks)
            .map(|i| DecBlock {
                pw1: a.conv(&format!("decoder.block{i}.pw1"), conv1d_geom(c, dec_len, 1, 1), 1.0),
                grouped: a.conv(
                    &format!("decoder.block{i}.grouped"),
                    conv1d_geom(c, dec_len, 3, config.decoder_groups),
                    1.0,
                ),
                pw2: a.conv(&format!("decoder.block{i}.pw2"), conv1d_geom(c, dec_len, 1, 1), 0.5),
            })
            .collect();
        let head_t = a.linear("head.translation", 2 * f, 6, HEAD_GAIN);
        let head_r = a.linear("head.rotation", 2 * f, 4, HEAD_GAIN);

        Ok(Self {
            config: config.clone(),
            n_params: a.next,
            specs: a.specs,
            stem,
            stages,
            vision_fc,
            pose_mlp,
            decoder,
            dec_len,
            head_t,
            head_r,
        })
    }

    /// Deterministic initial parameters.
    pub fn init_params(&self) -> Vec<f64> {
        let mut rng = stream_rng(self.config.seed);
        let mut data = vec![0.0; self.n_params];
        for spec in &self.specs {
            if let Init::He { fan_in, gain } = spec.init {
                let std = gain * (2.0 / fan_in as f64).sqrt();
                for v in &mut data[spec.offset..spec.offset + spec.len()] {
                    *v = std * box_muller(&mut rng).0;
                }
            }
        }
        data
    }

    fn conv(&self, t: &mut Tape, x: NodeId, l: &ConvLayer) -> NodeId {
        let w = t.param(l.w, vec![l.geom.weight_len()]);
        let b = t.param(l.b, vec![l.geom.c_out]);
        t.conv(x, w, b, l.geom)
    }

    fn linear(&self, t: &mut Tape, x: NodeId, l: &LinearLayer) -> NodeId {
        let w = t.param(l.w, vec![l.n_out, l.n_in]);
        let b = t.param(l.b, vec![l.n_out]);
        t.linear(x, w, b)
    }

    /// Record the forward pass; returns the raw translation head (mean,
    /// unclamped log-variance) and the rotation head.
    pub fn forward(&self, t: &mut Tape, image: Vec<f64>, pose: [f64; 7]) -> Result<(NodeId, NodeId), PolicyError> {
        let s = self.config.image_size;
        let expected = IMAGE_CHANNELS * s * s;
        if image.len() != expected {
            return Err(PolicyError::ShapeMismatch {
                expected,
                actual: image.len(),
            });
        }
        let x = t.input(vec![IMAGE_CHANNELS, s, s], image);
        let stem = self.conv(t, x, &self.stem);
        let mut h = t.silu(stem);
        for block in &self.stages {
            let y = self.conv(t, h, &block.conv1);
            let y = t.silu(y);
            let y = self.conv(t, y, &block.conv2);
            let skip = match &block.shortcut {
                Some(sc) => self.conv(t, h, sc),
                None => h,
            };
            let sum = t.add(y, skip);
            h = t.silu(sum);
        }
        let pooled = t.global_avg_pool(h);
        let vision = self.linear(t, pooled, &self.vision_fc);

        let ps = self.config.position_scale;
        let scaled = [pose[0] / ps, pose[1] / ps, pose[2] / ps, pose[3], pose[4], pose[5], pose[6]];
        let mut p = t.input(vec![7], scaled.to_vec());
        let (last, hidden) = self.pose_mlp.split_last().expect("pose encoder has an output layer");
        for l in hidden {
            let y = self.linear(t, p, l);
            p = t.silu(y);
        }
        let pose_feat = self.linear(t, p, last);

        let joint = t.concat(&[vision, pose_feat]);
        let c = self.config.dec_channels();
        let mut d = t.reshape(joint, vec![c, 1, self.dec_len]);
        for block in &self.decoder {
            let y = self.conv(t, d, &block.pw1);
            let y = t.silu(y);
            let y = self.conv(t, y, &block.grouped);
            let y = t.silu(y);
            let y = self.conv(t, y, &block.pw2);
            let sum = t.add(y, d);
            d = t.silu(sum);
        }
        let flat = t.reshape(d, vec![c * self.dec_len]);
        let out_t = self.linear(t, flat, &self.head_t);
        let out_r = self.linear(t, flat, &self.head_r);
        Ok((out_t, out_r))
    }
}
