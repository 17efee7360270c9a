use super::params::{EncoderGrads, EncoderParams};
use crate::error::{AlignError, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            learning_rate: 1e-2,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub step: u64,
}

impl OptimState {
    pub fn new(params: &EncoderParams) -> Self {
        let zeros = params.zero_grads().tensors;
        OptimState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One decoupled-weight-decay Adam step that *descends* `grads`.
///
/// Decay is applied first (`theta *= 1 - lr*wd`), then the bias-corrected
/// Adam update, the same order as the usual PyTorch implementation.
pub fn adamw_step(
    params: &mut EncoderParams,
    grads: &EncoderGrads,
    state: &mut OptimState,
    cfg: &AdamWConfig,
) -> Result<()> {
    grads.check_shapes(params)?;
    if state.m.len() != grads.tensors.len()
        || state.m.iter().zip(&grads.tensors).any(|(m, g)| m.shape() != g.shape())
    {
        return Err(AlignError::Shape("optimizer state does not match parameters".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let decay = 1.0 - cfg.learning_rate * cfg.weight_decay;

    for (k, p) in params.tensors_mut().into_iter().enumerate() {
        let g = grads.tensors[k].as_slice();
        let m = state.m[k].as_mut_slice();
        let v = state.v[k].as_mut_slice();
        for (idx, x) in p.as_mut_slice().iter_mut().enumerate() {
            m[idx] = cfg.beta1 * m[idx] + (1.0 - cfg.beta1) * g[idx];
            v[idx] = cfg.beta2 * v[idx] + (1.0 - cfg.beta2) * g[idx] * g[idx];
            let m_hat = m[idx] / bc1;
            let v_hat = v[idx] / bc2;
            *x *= decay;
            *x -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
