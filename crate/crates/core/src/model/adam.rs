use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First/second moment estimates per parameter tensor, in `ModelParams::tensors` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<F> {
    pub step: u64,
    pub m: Vec<Array2<F>>,
    pub v: Vec<Array2<F>>,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(params: &ModelParams<F>) -> Self {
        let zeros: Vec<Array2<F>> = params.tensors().map(|w| Array2::zeros(w.raw_dim())).collect();
        AdamState { step: 0, m: zeros.clone(), v: zeros }
    }
}

/// Bias-corrected Adam update applied to every tensor.
pub fn adam_step<F: Scalar>(params: &mut ModelParams<F>, grads: &ModelParams<F>, state: &mut AdamState<F>, lr: f64, cfg: &AdamConfig) {
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (F::lit(cfg.beta1), F::lit(cfg.beta2));
    let (one, eps, lr) = (F::one(), F::lit(cfg.epsilon), F::lit(lr));
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    for (((w, g), m), v) in params.tensors_mut().zip(grads.tensors()).zip(&mut state.m).zip(&mut state.v) {
        Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        });
    }
}
