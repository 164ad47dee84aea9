//! Adam with bias correction.

use super::ParamStore;
use crate::error::Error;
use crate::fx;
use crate::Result;

/// Optimizer state: first/second moments shaped like the parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: ParamStore,
    v: ParamStore,
    step: u64,
    beta1_pow: f64,
    beta2_pow: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &ParamStore, lr: f64) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One Adam update. The step counter advances even for zero gradients.
pub fn adam_step(params: &mut ParamStore, grads: &ParamStore, state: &mut AdamState) -> Result<()> {
    if !params.aligned_with(grads) || !params.aligned_with(&state.m) {
        return Err(Error::ShapeMismatch(
            "parameters, gradients and optimizer state disagree".into(),
        ));
    }
    state.step += 1;
    state.beta1_pow *= state.beta1;
    state.beta2_pow *= state.beta2;
    let bias1 = 1.0 - state.beta1_pow;
    let bias2 = 1.0 - state.beta2_pow;

    for (((p, g), m), v) in params
        .entries
        .iter_mut()
        .zip(&grads.entries)
        .zip(&mut state.m.entries)
        .zip(&mut state.v.entries)
    {
        let pv = p.value.as_mut_slice();
        let gv = g.value.as_slice();
        let mv = m.value.as_mut_slice();
        let vv = v.value.as_mut_slice();
        for i in 0..pv.len() {
            mv[i] = state.beta1 * mv[i] + (1.0 - state.beta1) * gv[i];
            vv[i] = state.beta2 * vv[i] + (1.0 - state.beta2) * gv[i] * gv[i];
            let m_hat = mv[i] / bias1;
            let v_hat = vv[i] / bias2;
            pv[i] -= state.lr * m_hat / (fx::sqrt(v_hat) + state.epsilon);
        }
    }
    Ok(())
}
