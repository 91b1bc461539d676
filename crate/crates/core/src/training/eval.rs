use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Sample, TrainError};
use crate::dataset::ActionTarget;
use crate::geometry::{quat_angle, quat_normalize, Quaternion};
use crate::policy::Policy;

/// Pooled per-sample error statistics. Distances in cm, angles in degrees,
/// standard deviations over the population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse_x: f64,
    pub rmse_y: f64,
    pub rmse_z: f64,
    pub dist_mean: f64,
    pub dist_std: f64,
    pub angle_mean_deg: f64,
    pub angle_std_deg: f64,
    pub n: usize,
}

/// A predicted action next to its target and the orientation it applies to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRecord {
    pub q_t: Quaternion,
    pub dpos: [f64; 3],
    pub dquat: [f64; 4],
    pub target: ActionTarget,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn add_to(q: &Quaternion, d: &[f64; 4]) -> Quaternion {
    let a = q.to_array();
    Quaternion::from_array(std::array::from_fn(|i| a[i] + d[i]))
}

pub fn metrics(records: &[PredictionRecord]) -> Result<EvalReport, TrainError> {
    if records.is_empty() {
        return Err(TrainError::EmptyEval);
    }
    let n = records.len() as f64;
    let mut sq = [0.0; 3];
    let mut dist = Vec::with_capacity(records.len());
    let mut angle = Vec::with_capacity(records.len());
    for (k, r) in records.iter().enumerate() {
        let res: [f64; 3] = std::array::from_fn(|i| r.dpos[i] - r.target.dpos[i]);
        for i in 0..3 {
            sq[i] += res[i] * res[i];
        }
        dist.push((res[0] * res[0] + res[1] * res[1] + res[2] * res[2]).sqrt());
        let qp = quat_normalize(add_to(&r.q_t, &r.dquat)).map_err(|_| TrainError::DegenerateQuaternion(k))?;
        let qt = quat_normalize(add_to(&r.q_t, &r.target.dquat)).map_err(|_| TrainError::DegenerateQuaternion(k))?;
        let a = quat_angle(&qp, &qt).map_err(|_| TrainError::DegenerateQuaternion(k))?;
        angle.push(a.to_degrees().clamp(0.0, 180.0));
    }
    let (dist_mean, dist_std) = mean_std(&dist);
    let (angle_mean_deg, angle_std_deg) = mean_std(&angle);
    Ok(EvalReport {
        rmse_x: (sq[0] / n).sqrt(),
        rmse_y: (sq[1] / n).sqrt(),
        rmse_z: (sq[2] / n).sqrt(),
        dist_mean,
        dist_std,
        angle_mean_deg,
        angle_std_deg,
        n: records.len(),
    })
}

/// Policy predictions for every sample, in sample order.
pub fn predict(policy: &Policy, samples: &[Sample]) -> Result<Vec<PredictionRecord>, TrainError> {
    samples
        .par_iter()
        .map(|s| {
            let p = policy.forward(&s.obs)?;
            Ok(PredictionRecord {
                q_t: s.pose.orientation,
                dpos: p.dpos_mean,
                dquat: p.dquat,
                target: s.target,
            })
        })
        .collect()
}

pub fn evaluate(policy: &Policy, samples: &[Sample]) -> Result<EvalReport, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::EmptyEval);
    }
    metrics(&predict(policy, samples)?)
}

/// Metrics of the predictor that always outputs a zero action.
pub fn zero_action_baseline(samples: &[Sample]) -> Result<EvalReport, TrainError> {
    let records: Vec<_> = samples
        .iter()
        .map(|s| PredictionRecord {
            q_t: s.pose.orientation,
            dpos: [0.0; 3],
            dquat: [0.0; 4],
            target: s.target,
        })
        .collect();
    metrics(&records)
}
