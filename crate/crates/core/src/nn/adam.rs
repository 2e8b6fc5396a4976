use serde::{Deserialize, Serialize};

use super::ParameterStore;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update over every parameter; gradients are zeroed afterwards.
pub fn adam_step<T: Scalar>(store: &mut ParameterStore<T>, cfg: &AdamConfig) {
    store.step += 1;
    let t = store.step as i32;
    let b1 = T::from_f64_lossy(cfg.beta1);
    let b2 = T::from_f64_lossy(cfg.beta2);
    let one = T::one();
    let corr1 = T::from_f64_lossy(1.0 - cfg.beta1.powi(t));
    let corr2 = T::from_f64_lossy(1.0 - cfg.beta2.powi(t));
    let lr = T::from_f64_lossy(cfg.lr);
    let eps = T::from_f64_lossy(cfg.eps);
    for p in store.iter_mut() {
        let n = p.value.len();
        let (value, grad, m, v) = (
            p.value.data_mut(),
            p.grad.data_mut(),
            p.m.data_mut(),
            p.v.data_mut(),
        );
        for i in 0..n {
            let g = grad[i];
            m[i] = b1 * m[i] + (one - b1) * g;
            v[i] = b2 * v[i] + (one - b2) * g * g;
            let m_hat = m[i] / corr1;
            let v_hat = v[i] / corr2;
            value[i] = value[i] - lr * m_hat / (v_hat.sqrt() + eps);
            grad[i] = T::zero();
        }
    }
}
