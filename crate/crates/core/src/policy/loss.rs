use serde::{Deserialize, Serialize};

use super::{PolicyConfig, PolicyError};
use crate::dataset::ActionTarget;

pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 4.0;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionPrediction {
    pub dpos_mean: [f64; 3],
    /// Log-variance in log cm², clamped to `[LOGVAR_MIN, LOGVAR_MAX]`.
    pub dpos_logvar: [f64; 3],
    pub dquat: [f64; 4],
}

impl ActionPrediction {
    /// From raw head outputs: `[mean; 3, logvar; 3]` and `[dquat; 4]`.
    pub fn from_heads(t: &[f64], r: &[f64]) -> Self {
        Self {
            dpos_mean: [t[0], t[1], t[2]],
            dpos_logvar: std::array::from_fn(|i| t[3 + i].clamp(LOGVAR_MIN, LOGVAR_MAX)),
            dquat: [r[0], r[1], r[2], r[3]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub huber: f64,
    pub nll: f64,
    pub l2: f64,
    pub delta: f64,
}

impl From<&PolicyConfig> for LossWeights {
    fn from(c: &PolicyConfig) -> Self {
        Self {
            huber: c.w_huber,
            nll: c.w_nll,
            l2: c.w_l2,
            delta: c.huber_delta,
        }
    }
}

/// Unweighted terms and the weighted total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    pub huber: f64,
    pub nll: f64,
    pub l2: f64,
}

impl LossTerms {
    pub fn add(&self, o: &LossTerms) -> LossTerms {
        LossTerms {
            total: self.total + o.total,
            huber: self.huber + o.huber,
            nll: self.nll + o.nll,
            l2: self.l2 + o.l2,
        }
    }

    pub fn scale(&self, s: f64) -> LossTerms {
        LossTerms {
            total: self.total * s,
            huber: self.huber * s,
            nll: self.nll * s,
            l2: self.l2 * s,
        }
    }
}

fn huber(r: f64, delta: f64) -> (f64, f64) {
    if r.abs() <= delta {
        (0.5 * r * r, r)
    } else {
        (delta * (r.abs() - 0.5 * delta), delta * r.signum())
    }
}

/// Huber on the mean (summed over axes), diagonal Gaussian NLL with
/// constants, and squared L2 on the quaternion difference.
pub fn hybrid_loss(pred: &ActionPrediction, target: &ActionTarget, w: &LossWeights) -> Result<LossTerms, PolicyError> {
    let finite = pred.dpos_mean.iter().chain(&pred.dpos_logvar).chain(&pred.dquat).all(|v| v.is_finite())
        && target.dpos.iter().chain(&target.dquat).all(|v| v.is_finite());
    if !finite {
        return Err(PolicyError::NonFinite("loss input".into()));
    }
    let mut terms = LossTerms::default();
    for i in 0..3 {
        let r = pred.dpos_mean[i] - target.dpos[i];
        let lv = pred.dpos_logvar[i];
        terms.huber += huber(r, w.delta).0;
        terms.nll += 0.5 * (LN_2PI + lv + r * r * (-lv).exp());
    }
    for j in 0..4 {
        let d = pred.dquat[j] - target.dquat[j];
        terms.l2 += d * d;
    }
    terms.total = w.huber * terms.huber + w.nll * terms.nll + w.l2 * terms.l2;
    Ok(terms)
}

/// Loss and its gradient with respect to the raw head outputs. The clamp on
/// the log-variance passes gradient only strictly inside its range.
pub fn loss_with_head_grads(
    raw_t: &[f64],
    raw_r: &[f64],
    target: &ActionTarget,
    w: &LossWeights,
) -> Result<(LossTerms, [f64; 6], [f64; 4]), PolicyError> {
    let pred = ActionPrediction::from_heads(raw_t, raw_r);
    let terms = hybrid_loss(&pred, target, w)?;
    let mut gt = [0.0; 6];
    let mut gr = [0.0; 4];
    for i in 0..3 {
        let r = pred.dpos_mean[i] - target.dpos[i];
        let lv = pred.dpos_logvar[i];
        let inv_var = (-lv).exp();
        gt[i] = w.huber * huber(r, w.delta).1 + w.nll * r * inv_var;
        let inside = raw_t[3 + i] > LOGVAR_MIN && raw_t[3 + i] < LOGVAR_MAX;
        gt[3 + i] = if inside { w.nll * 0.5 * (1.0 - r * r * inv_var) } else { 0.0 };
    }
    for j in 0..4 {
        gr[j] = w.l2 * 2.0 * (pred.dquat[j] - target.dquat[j]);
    }
    Ok((terms, gt, gr))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights() -> LossWeights {
        LossWeights::from(&PolicyConfig::default())
    }

    fn target() -> ActionTarget {
        ActionTarget {
            dpos: [0.3, -0.2, 0.9],
            dquat: [0.01, -0.02, 0.0, 0.05],
        }
    }

    #[test]
    fn perfect_prediction() {
        let t = target();
        let p = ActionPrediction {
            dpos_mean: t.dpos,
            dpos_logvar: [0.0; 3],
            dquat: t.dquat,
        };
        let l = hybrid_loss(&p, &t, &weights()).unwrap();
        assert_eq!(l.huber, 0.0);
        assert_eq!(l.l2, 0.0);
        assert!((l.nll - 1.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
        assert!((l.total - 0.1 * l.nll).abs() < 1e-15);
    }

    #[test]
    fn huber_regimes() {
        let t = ActionTarget::ZERO;
        let mut p = ActionPrediction {
            dpos_mean: [0.3, 0.0, 0.0],
            dpos_logvar: [0.0; 3],
            dquat: [0.0; 4],
        };
        let l = hybrid_loss(&p, &t, &weights()).unwrap();
        assert!((l.huber - 0.045).abs() < 1e-15);
        p.dpos_mean = [-2.0, 0.0, 0.0];
        let l = hybrid_loss(&p, &t, &weights()).unwrap();
        assert!((l.huber - 0.5 * (2.0 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn nll_minimized_at_log_squared_residual() {
        let r: f64 = 0.7;
        let t = ActionTarget::ZERO;
        let nll = |lv: f64| {
            let p = ActionPrediction {
                dpos_mean: [r, 0.0, 0.0],
                dpos_logvar: [lv, 0.0, 0.0],
                dquat: [0.0; 4],
            };
            hybrid_loss(&p, &t, &weights()).unwrap().nll
        };
        let (best, _) = (0..=20_000)
            .map(|k| -10.0 + 14.0 * k as f64 / 20_000.0)
            .map(|lv| (lv, nll(lv)))
            .fold((0.0, f64::INFINITY), |acc, (lv, v)| if v < acc.1 { (lv, v) } else { acc });
        assert!((best - (r * r).ln()).abs() < 1e-3, "{best}");
    }

    #[test]
    fn head_gradients_match_finite_differences() {
        let t = target();
        let w = weights();
        let raw_t = [0.1, 0.9, 0.2, -0.3, 0.5, 4.5];
        let raw_r = [0.2, 0.0, -0.1, 0.3];
        let (_, gt, gr) = loss_with_head_grads(&raw_t, &raw_r, &t, &w).unwrap();
        let f = |a: &[f64], b: &[f64]| loss_with_head_grads(a, b, &t, &w).unwrap().0.total;
        let h = 1e-6;
        for i in 0..6 {
            let (mut p, mut m) = (raw_t, raw_t);
            p[i] += h;
            m[i] -= h;
            let fd = (f(&p, &raw_r) - f(&m, &raw_r)) / (2.0 * h);
            assert!((fd - gt[i]).abs() < 1e-7, "{i}: {fd} vs {}", gt[i]);
        }
        for j in 0..4 {
            let (mut p, mut m) = (raw_r, raw_r);
            p[j] += h;
            m[j] -= h;
            let fd = (f(&raw_t, &p) - f(&raw_t, &m)) / (2.0 * h);
            assert!((fd - gr[j]).abs() < 1e-7);
        }
        // Clamped log-variance carries no gradient.
        assert_eq!(gt[5], 0.0);
    }

    #[test]
    fn non_finite_is_rejected() {
        let p = ActionPrediction {
            dpos_mean: [f64::NAN, 0.0, 0.0],
            dpos_logvar: [0.0; 3],
            dquat: [0.0; 4],
        };
        assert!(matches!(
            hybrid_loss(&p, &ActionTarget::ZERO, &weights()),
            Err(PolicyError::NonFinite(_))
        ));
    }
}
