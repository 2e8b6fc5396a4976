use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Scores are clamped into `[CLAMP, 1 - CLAMP]` before taking logs.
pub const CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub positive: f64,
    pub negative: f64,
    /// Global gradient norm after the batch; filled in by the trainer.
    pub grad_norm: f64,
}

/// Loss value and its derivatives with respect to each score.
#[derive(Debug, Clone, PartialEq)]
pub struct BceOutput<T> {
    pub report: LossReport,
    pub d_positive: T,
    pub d_negatives: Vec<T>,
}

/// Binary cross entropy of one positive against `n` negatives:
/// `-log p⁺ - Σ wᵢ log(1 - pᵢ⁻)` with `wᵢ = 1/n`, or, when a temperature is set,
/// `wᵢ = softmax(temperature · logit(pᵢ⁻))` treated as constants.
pub fn bce_loss<T: Scalar>(positive: T, negatives: &[T], temperature: Option<f64>) -> BceOutput<T> {
    let clamp = |p: T| p.as_f64().clamp(CLAMP, 1.0 - CLAMP);
    let p = clamp(positive);
    let pos_loss = -p.ln();
    let d_positive = T::from_f64_lossy(-1.0 / p);

    let negs: Vec<f64> = negatives.iter().map(|&x| clamp(x)).collect();
    let weights = negative_weights(&negs, temperature);
    let mut neg_loss = 0.0;
    let mut d_negatives = Vec::with_capacity(negs.len());
    for (&q, &w) in negs.iter().zip(&weights) {
        neg_loss -= w * (1.0 - q).ln();
        d_negatives.push(T::from_f64_lossy(w / (1.0 - q)));
    }
    BceOutput {
        report: LossReport {
            total: pos_loss + neg_loss,
            positive: pos_loss,
            negative: neg_loss,
            grad_norm: 0.0,
        },
        d_positive,
        d_negatives,
    }
}

fn negative_weights(negs: &[f64], temperature: Option<f64>) -> Vec<f64> {
    let n = negs.len();
    if n == 0 {
        return Vec::new();
    }
    match temperature {
        None => vec![1.0 / n as f64; n],
        Some(temp) => {
            let logits: Vec<f64> = negs.iter().map(|&q| temp * (q / (1.0 - q)).ln()).collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exp: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
            let z: f64 = exp.iter().sum();
            exp.into_iter().map(|e| e / z).collect()
        }
    }
}
