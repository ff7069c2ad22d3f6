use super::{Real, Tensor};
use crate::{Error, Result};

/// Adam moments and hyper-parameters for one parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Real> AdamState<T> {
    pub fn new(lr: f64) -> Self {
        Self {
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update; gradients are zeroed afterwards.
pub fn adam_step<T: Real>(params: &mut [Tensor<T>], state: &mut AdamState<T>) -> Result<()> {
    if let Some(i) = params.iter().position(|p| p.grad().is_none()) {
        return Err(Error::Contract(format!("parameter {i} has no gradient")));
    }
    if state.m.is_empty() && state.v.is_empty() {
        state.m = params.iter().map(|p| vec![T::zero(); p.numel()]).collect();
        state.v = state.m.clone();
    }
    if state.m.len() != params.len()
        || params
            .iter()
            .zip(&state.m)
            .zip(&state.v)
            .any(|((p, m), v)| m.len() != p.numel() || v.len() != p.numel())
    {
        return Err(Error::Contract("Adam moments do not match the parameter list".into()));
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for ((p, m), v) in params.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        let (data, grad) = p.data_and_grad_mut();
        let grad = grad.expect("checked above");
        for i in 0..data.len() {
            let g = grad[i].as_f64();
            let mi = b1 * m[i].as_f64() + (1.0 - b1) * g;
            let vi = b2 * v[i].as_f64() + (1.0 - b2) * g * g;
            m[i] = T::from_f64(mi);
            v[i] = T::from_f64(vi);
            let update = state.lr * (mi / c1) / ((vi / c2).sqrt() + state.eps);
            data[i] = T::from_f64(data[i].as_f64() - update);
            grad[i] = T::zero();
        }
    }
    Ok(())
}
