use rayon::prelude::*;

use super::loss::{loss_with_head_grads, ActionPrediction, LossTerms, LossWeights};
use super::network::{Architecture, PolicyConfig, TensorSpec, IMAGE_CHANNELS};
use super::tape::Tape;
use super::PolicyError;
use crate::dataset::ActionTarget;
use crate::geometry::Pose;
use crate::simulator::RgbdImage;

/// Network input: the 5-channel image in CHW order and the camera-frame pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub image: Vec<f32>,
    pub pose: [f64; 7],
}

impl Observation {
    /// Repack an RGBD frame as `[R, G, B, depth / depth_scale, mask]` planes.
    pub fn from_frame(img: &RgbdImage, pose: &Pose, config: &PolicyConfig) -> Result<Self, PolicyError> {
        let s = config.image_size;
        if img.width != s || img.height != s {
            return Err(PolicyError::ShapeMismatch {
                expected: s * s,
                actual: img.width * img.height,
            });
        }
        let n = s * s;
        let mut image = vec![0.0f32; IMAGE_CHANNELS * n];
        let inv_depth = (1.0 / config.depth_scale) as f32;
        for k in 0..n {
            for c in 0..3 {
                image[c * n + k] = img.rgb[3 * k + c];
            }
            image[3 * n + k] = img.depth[k] * inv_depth;
            image[4 * n + k] = img.mask[k] as f32;
        }
        Ok(Self {
            image,
            pose: pose.to_array(),
        })
    }
}

/// Network weights with their layout.
#[derive(Debug, Clone)]
pub struct Policy {
    pub arch: Architecture,
    pub params: Vec<f64>,
}

impl PartialEq for Policy {
    fn eq(&self, other: &Self) -> bool {
        self.arch.config == other.arch.config && self.params == other.params
    }
}

/// Deterministic He-style initialization with zero biases and small heads.
pub fn policy_init(config: &PolicyConfig) -> Result<Policy, PolicyError> {
    let arch = Architecture::new(config)?;
    let params = arch.init_params();
    Ok(Policy { arch, params })
}

impl Policy {
    pub fn config(&self) -> &PolicyConfig {
        &self.arch.config
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.arch.specs
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let s = self.arch.specs.iter().find(|s| s.name == name)?;
        Some(&self.params[s.offset..s.offset + s.len()])
    }

    fn image_f64(obs: &Observation) -> Vec<f64> {
        obs.image.iter().map(|&v| v as f64).collect()
    }

    pub fn forward(&self, obs: &Observation) -> Result<ActionPrediction, PolicyError> {
        let mut t = Tape::new(&self.params);
        let (ht, hr) = self.arch.forward(&mut t, Self::image_f64(obs), obs.pose)?;
        Ok(ActionPrediction::from_heads(t.value(ht), t.value(hr)))
    }

    /// Loss terms and parameter gradient for one sample.
    pub fn sample_gradient(&self, obs: &Observation, target: &ActionTarget) -> Result<(LossTerms, Vec<f64>), PolicyError> {
        let mut t = Tape::new(&self.params);
        let (ht, hr) = self.arch.forward(&mut t, Self::image_f64(obs), obs.pose)?;
        let w = LossWeights::from(self.config());
        let (terms, gt, gr) = loss_with_head_grads(t.value(ht), t.value(hr), target, &w)?;
        let mut grads = vec![0.0; self.params.len()];
        t.backward(&[(ht, &gt), (hr, &gr)], &mut grads);
        Ok((terms, grads))
    }

    pub fn loss(&self, obs: &Observation, target: &ActionTarget) -> Result<LossTerms, PolicyError> {
        let pred = self.forward(obs)?;
        super::loss::hybrid_loss(&pred, target, &LossWeights::from(self.config()))
    }

    /// Mean loss and its exact gradient over a batch. Per-sample gradients
    /// may be computed in parallel; they are reduced by a fixed pairwise
    /// tree, so the result does not depend on the thread count.
    pub fn batch_gradient(&self, batch: &[(&Observation, &ActionTarget)]) -> Result<(LossTerms, Vec<f64>), PolicyError> {
        if batch.is_empty() {
            return Err(PolicyError::EmptyBatch);
        }
        let parts: Vec<(LossTerms, Vec<f64>)> = batch
            .par_iter()
            .map(|(o, t)| self.sample_gradient(o, t))
            .collect::<Result<_, _>>()?;
        let (terms, mut grad) = tree_sum(parts);
        let inv = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        for spec in self.specs() {
            if grad[spec.offset..spec.offset + spec.len()].iter().any(|g| !g.is_finite()) {
                return Err(PolicyError::NonFinite(spec.name.clone()));
            }
        }
        Ok((terms.scale(inv), grad))
    }
}

/// Pairwise sum with a split point fixed by the input length.
fn tree_sum(mut parts: Vec<(LossTerms, Vec<f64>)>) -> (LossTerms, Vec<f64>) {
    if parts.len() == 1 {
        return parts.pop().unwrap();
    }
    let right = parts.split_off(parts.len() / 2);
    let (lt, mut lg) = tree_sum(parts);
    let (rt, rg) = tree_sum(right);
    lg.iter_mut().zip(&rg).for_each(|(a, b)| *a += b);
    (lt.add(&rt), lg)
}
