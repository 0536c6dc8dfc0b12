use alloc::vec;
use alloc::vec::Vec;

use super::ParamSet;
use crate::error::{Error, Result};
use crate::math;

/// Moment buffers of the Adam optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. `grads[i]` belongs to parameter `i`.
pub fn adam_step(params: &mut ParamSet, grads: &[&[f64]], state: &mut AdamState, lr: f64) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::ShapeMismatch {
            op: "adam_step",
            left: vec![params.len()],
            right: vec![grads.len()],
        });
    }
    for (i, g) in grads.iter().enumerate() {
        if g.len() != params.tensor(i).len() || state.m[i].len() != g.len() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                left: params.tensor(i).shape().to_vec(),
                right: vec![g.len()],
            });
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - libm::pow(b1, f64::from(t));
    let c2 = 1.0 - libm::pow(b2, f64::from(t));
    for (i, g) in grads.iter().enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, p) in params.tensor_mut(i).data_mut().iter_mut().enumerate() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let mhat = m[j] / c1;
            let vhat = v[j] / c2;
            *p -= lr * mhat / (math::sqrt(vhat) + state.eps);
        }
    }
    Ok(())
}
