use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Sample, TrainError};
use crate::dataset::DEFAULT_HORIZON;
use crate::policy::{policy_init, LossTerms, Policy, PolicyConfig, PolicyError};
use crate::rng::{derive_seed, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Epoch (1-based) from which the learning rate is multiplied by `lr_decay`.
    pub lr_decay_epoch: Option<usize>,
    pub lr_decay: f64,
    /// Action horizon N.
    pub horizon: usize,
    pub seed: u64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    /// Rescale the batch gradient to at most this L2 norm.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 16,
            lr: 1e-3,
            momentum: 0.9,
            lr_decay_epoch: Some(150),
            lr_decay: 0.1,
            horizon: DEFAULT_HORIZON,
            seed: 0,
            patience: None,
            grad_clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::BadConfig(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        // lr = 0 is accepted as a null update for diagnostics.
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and nonnegative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay.is_finite()) {
            return bad("lr_decay must be positive");
        }
        if self.horizon < 2 {
            return bad("horizon must be at least 2");
        }
        if self.patience == Some(0) {
            return bad("patience must be at least 1");
        }
        if matches!(self.grad_clip, Some(c) if !(c > 0.0)) {
            return bad("grad_clip must be positive");
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_decay_epoch {
            Some(e) if epoch >= e => self.lr * self.lr_decay,
            _ => self.lr,
        }
    }
}

/// One row of `curves.csv`. Loss terms are training-set means over the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub huber: f64,
    pub nll: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub policy: Policy,
    pub curves: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Mean loss over a sample set. Per-sample losses are computed in parallel
/// and summed in sample order.
fn mean_loss(policy: &Policy, samples: &[Sample]) -> Result<LossTerms, PolicyError> {
    let terms: Vec<LossTerms> = samples.par_iter().map(|s| policy.loss(&s.obs, &s.target)).collect::<Result<_, _>>()?;
    let total = terms.iter().fold(LossTerms::default(), |acc, t| acc.add(t));
    Ok(total.scale(1.0 / samples.len() as f64))
}

/// SGD with momentum over shuffled mini-batches. After each epoch the
/// validation loss is measured and the parameters with the lowest one are
/// kept; without a validation set the epoch's training loss is used.
pub fn train(
    train_set: &[Sample],
    val_set: &[Sample],
    policy_config: &PolicyConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    let mut policy = policy_init(policy_config)?;
    let mut velocity = vec![0.0; policy.params.len()];
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut curves = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;

    for epoch in 1..=config.epochs {
        let lr = config.lr_at(epoch);
        order.shuffle(&mut stream_rng(derive_seed(config.seed, epoch as u64)));
        let mut epoch_terms = LossTerms::default();
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<_> = chunk.iter().map(|&i| (&train_set[i].obs, &train_set[i].target)).collect();
            let non_finite = |detail: String| TrainError::NonFiniteLoss {
                epoch,
                batch: b,
                detail,
            };
            let (terms, mut grad) = policy.batch_gradient(&batch).map_err(|e| match e {
                PolicyError::NonFinite(what) => non_finite(what),
                other => other.into(),
            })?;
            if !terms.total.is_finite() {
                return Err(non_finite("loss".into()));
            }
            if let Some(max_norm) = config.grad_clip {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max_norm {
                    let s = max_norm / norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
            }
            for ((p, v), g) in policy.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = config.momentum * *v + g;
                *p -= lr * *v;
            }
            epoch_terms = epoch_terms.add(&terms.scale(chunk.len() as f64));
        }
        let train_terms = epoch_terms.scale(1.0 / train_set.len() as f64);
        let val_loss = if val_set.is_empty() {
            f64::NAN
        } else {
            mean_loss(&policy, val_set)?.total
        };
        let score = if val_set.is_empty() { train_terms.total } else { val_loss };
        curves.push(EpochRecord {
            epoch,
            train_loss: train_terms.total,
            val_loss,
            huber: train_terms.huber,
            nll: train_terms.nll,
            l2: train_terms.l2,
        });
        log::info!(
            "epoch {epoch}/{}: train {:.5} val {:.5} lr {lr:.2e}",
            config.epochs,
            train_terms.total,
            val_loss
        );
        if !score.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                batch: 0,
                detail: "validation loss".into(),
            });
        }
        match &best {
            Some((s, e, _)) if score >= *s => {
                if config.patience.is_some_and(|pat| epoch - e >= pat) {
                    log::info!("no improvement since epoch {e}, stopping");
                    break;
                }
            }
            _ => best = Some((score, epoch, policy.params.clone())),
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch ran");
    policy.params = params;
    Ok(TrainOutcome {
        policy,
        curves,
        best_epoch,
    })
}

pub const CURVES_HEADER: &str = "epoch,train_loss,val_loss,huber,nll,l2";

pub fn save_curves(path: &Path, curves: &[EpochRecord]) -> Result<(), TrainError> {
    let mut s = String::from(CURVES_HEADER);
    s.push('\n');
    for r in curves {
        // `{:?}` prints the shortest round-tripping representation.
        let _ = writeln!(
            s,
            "{},{:?},{:?},{:?},{:?},{:?}",
            r.epoch, r.train_loss, r.val_loss, r.huber, r.nll, r.l2
        );
    }
    std::fs::write(path, s).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ActionTarget;
    use crate::geometry::Pose;
    use crate::policy::{Observation, IMAGE_CHANNELS};
    use crate::rng::uniform;

    pub(crate) fn tiny() -> PolicyConfig {
        PolicyConfig {
            image_size: 16,
            vision_channels: vec![4, 8],
            pose_hidden: vec![16],
            feature_dim: 16,
            decoder_channels: 8,
            decoder_blocks: 1,
            ..PolicyConfig::default()
        }
    }

    fn toy_samples(n: usize, seed: u64) -> Vec<Sample> {
        let mut rng = stream_rng(seed);
        (0..n)
            .map(|t| {
                let x = uniform(&mut rng, -3.0, 3.0);
                let mut pose = Pose::identity();
                pose.position.x = x;
                pose.position.z = 10.0;
                let image = (0..IMAGE_CHANNELS * 256).map(|_| uniform(&mut rng, 0.0, 1.0) as f32).collect();
                Sample {
                    demo: 0,
                    t,
                    pose,
                    obs: Observation {
                        image,
                        pose: pose.to_array(),
                    },
                    target: ActionTarget {
                        dpos: [0.2 * x, 0.3, 0.0],
                        dquat: [0.0; 4],
                    },
                }
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_leaves_params_unchanged() {
        let s = toy_samples(10, 1);
        let c = TrainConfig {
            epochs: 1,
            lr: 0.0,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let out = train(&s, &s[..3], &tiny(), &c).unwrap();
        assert_eq!(out.policy, policy_init(&tiny()).unwrap());
        assert_eq!(out.curves.len(), 1);
    }

    #[test]
    fn loss_decreases_and_training_is_deterministic() {
        let s = toy_samples(24, 2);
        let c = TrainConfig {
            epochs: 30,
            lr: 0.01,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let a = train(&s[..16], &s[16..], &tiny(), &c).unwrap();
        let b = train(&s[..16], &s[16..], &tiny(), &c).unwrap();
        assert_eq!(a, b);
        let first = a.curves[0].train_loss;
        let last = a.curves.last().unwrap().train_loss;
        assert!(last < 0.5 * first, "{first} -> {last}");
        let best = a.curves.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(a.curves[a.best_epoch - 1].val_loss, best);
    }

    #[test]
    fn patience_stops_early() {
        let s = toy_samples(8, 3);
        let c = TrainConfig {
            epochs: 50,
            lr: 0.0,
            patience: Some(3),
            ..TrainConfig::default()
        };
        let out = train(&s, &s, &tiny(), &c).unwrap();
        assert_eq!(out.curves.len(), 4);
        assert_eq!(out.best_epoch, 1);
    }

    #[test]
    fn divergence_is_reported_with_position() {
        let mut s = toy_samples(8, 4);
        s[5].obs.image[0] = f32::NAN;
        let c = TrainConfig {
            epochs: 3,
            batch_size: 8,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&s, &s, &tiny(), &c),
            Err(TrainError::NonFiniteLoss { epoch: 1, batch: 0, .. })
        ));
    }

    #[test]
    fn configs_are_validated() {
        assert!(train(&[], &[], &tiny(), &TrainConfig::default()).is_err());
        for c in [
            TrainConfig { epochs: 0, ..TrainConfig::default() },
            TrainConfig { lr: -1.0, ..TrainConfig::default() },
            TrainConfig { horizon: 1, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
        ] {
            assert!(matches!(c.validate(), Err(TrainError::BadConfig(_))));
        }
        let c = TrainConfig::default();
        assert_eq!(c.lr_at(149), 1e-3);
        assert!((c.lr_at(150) - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn curves_csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("curves.csv");
        let r = EpochRecord {
            epoch: 1,
            train_loss: 1.5,
            val_loss: 2.0,
            huber: 0.1,
            nll: 0.2,
            l2: 0.3,
        };
        save_curves(&p, &[r, EpochRecord { epoch: 2, ..r }]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], CURVES_HEADER);
        assert_eq!(lines[2], "2,1.5,2.0,0.1,0.2,0.3");
    }
}
