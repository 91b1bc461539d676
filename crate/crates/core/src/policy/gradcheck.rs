use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{policy_init, Observation};
use super::network::IMAGE_CHANNELS;
use super::{PolicyConfig, PolicyError};
use crate::dataset::ActionTarget;
use crate::geometry::{quat_normalize, Quaternion};
use crate::rng::{derive_seed, stream_rng, uniform};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub n_checked: usize,
    pub max_rel_error: f64,
    pub worst_param: String,
    pub n_params: usize,
}

/// `|a − b| / max(|a|, |b|, REL_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Compare reverse-mode gradients of the mean batch loss with central
/// differences on `n_samples` randomly chosen parameters (plus one from
/// every tensor), on random observations and targets.
pub fn gradcheck(config: &PolicyConfig, n_samples: usize, batch: usize, seed: u64) -> Result<GradcheckReport, PolicyError> {
    let mut policy = policy_init(config)?;
    let mut rng = stream_rng(derive_seed(seed, 0));
    // Nonzero biases so every path carries signal.
    for v in policy.params.iter_mut() {
        if *v == 0.0 {
            *v = uniform(&mut rng, -0.05, 0.05);
        }
    }
    let pixels = IMAGE_CHANNELS * config.image_size * config.image_size;
    let data: Vec<(Observation, ActionTarget)> = (0..batch.max(1))
        .map(|_| {
            let image = (0..pixels).map(|_| rng.random::<f32>()).collect();
            let q = quat_normalize(Quaternion::new(
                uniform(&mut rng, 0.2, 1.0),
                uniform(&mut rng, -1.0, 1.0),
                uniform(&mut rng, -1.0, 1.0),
                uniform(&mut rng, -1.0, 1.0),
            ))
            .expect("nonzero quaternion");
            let pose = [
                uniform(&mut rng, -5.0, 5.0),
                uniform(&mut rng, -5.0, 5.0),
                uniform(&mut rng, 6.0, 16.0),
                q.w,
                q.x,
                q.y,
                q.z,
            ];
            let target = ActionTarget {
                dpos: std::array::from_fn(|_| uniform(&mut rng, -1.0, 1.0)),
                dquat: std::array::from_fn(|_| uniform(&mut rng, -0.1, 0.1)),
            };
            (Observation { image, pose }, target)
        })
        .collect();
    let refs: Vec<(&Observation, &ActionTarget)> = data.iter().map(|(o, t)| (o, t)).collect();
    let (_, grad) = policy.batch_gradient(&refs)?;

    let mut indices: Vec<usize> = policy.specs().iter().map(|s| s.offset + rng.random_range(0..s.len())).collect();
    indices.extend((0..n_samples).map(|_| rng.random_range(0..policy.params.len())));

    let mean_loss = |p: &super::Policy| -> Result<f64, PolicyError> {
        let mut total = 0.0;
        for (o, t) in &data {
            total += p.loss(o, t)?.total;
        }
        Ok(total / data.len() as f64)
    };

    let mut report = GradcheckReport {
        n_checked: indices.len(),
        max_rel_error: 0.0,
        worst_param: String::new(),
        n_params: policy.params.len(),
    };
    for &i in &indices {
        let orig = policy.params[i];
        policy.params[i] = orig + FD_STEP;
        let fp = mean_loss(&policy)?;
        policy.params[i] = orig - FD_STEP;
        let fm = mean_loss(&policy)?;
        policy.params[i] = orig;
        let fd = (fp - fm) / (2.0 * FD_STEP);
        let err = relative_error(grad[i], fd);
        if err > report.max_rel_error || report.worst_param.is_empty() {
            let spec = policy.specs().iter().find(|s| s.offset <= i && i < s.offset + s.len()).unwrap();
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst_param = format!("{}[{}]", spec.name, i - spec.offset);
        }
    }
    Ok(report)
}
