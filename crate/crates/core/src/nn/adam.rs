use super::{Gradients, Mlp, NnError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates, one slot per network parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub params: AdamParams,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(net: &Mlp, params: AdamParams) -> Self {
        let n = net.parameter_count();
        AdamState {
            params,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// Bias-corrected Adam update of `net` in place.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState) -> Result<(), NnError> {
    let shapes_match = net.layers.len() == grads.layers.len()
        && net
            .layers
            .iter()
            .zip(&grads.layers)
            .all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs)
        && state.m.len() == net.parameter_count();
    if !shapes_match {
        return Err(NnError::Shape("gradient/optimizer layout does not match network".into()));
    }
    state.step += 1;
    let AdamParams { lr, beta1, beta2, eps } = state.params;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let grad_iter = grads.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias));
    for (((p, g), m), v) in net.params_mut().zip(grad_iter).zip(&mut state.m).zip(&mut state.v) {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
