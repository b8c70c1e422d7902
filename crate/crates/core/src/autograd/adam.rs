//! Adam with bias correction.

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of completed steps.
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Zeroed moments for parameters of the given lengths, default betas.
    pub fn new(param_lens: &[usize]) -> Self {
        Self::with_hyper(param_lens, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(param_lens: &[usize], beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            t: 0,
            m: param_lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: param_lens.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn first_moment(&self, param: usize) -> &[f64] {
        &self.m[param]
    }

    pub fn second_moment(&self, param: usize) -> &[f64] {
        &self.v[param]
    }
}

/// A named parameter slice paired with its gradient.
pub struct ParamSlot<'a> {
    pub name: &'a str,
    pub value: &'a mut [f32],
    pub grad: &'a [f32],
}

/// One Adam update over all parameters.
///
/// Gradients are validated before anything is touched, so an error leaves
/// both parameters and state unchanged.
pub fn adam_step(params: &mut [ParamSlot<'_>], state: &mut AdamState, lr: f32) -> Result<()> {
    if params.len() != state.m.len() {
        return Err(invalid(
            "adam_step",
            format!("{} parameters but optimizer state holds {}", params.len(), state.m.len()),
        ));
    }
    for (i, p) in params.iter().enumerate() {
        if p.value.len() != p.grad.len() || p.value.len() != state.m[i].len() {
            return Err(invalid(
                "adam_step",
                format!("parameter `{}` length does not match its gradient or moments", p.name),
            ));
        }
        if p.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient {
                name: p.name.to_string(),
            });
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    let lr = lr as f64;
    for (i, p) in params.iter_mut().enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for k in 0..p.value.len() {
            let g = p.grad[k] as f64;
            m[k] = b1 * m[k] + (1.0 - b1) * g;
            v[k] = b2 * v[k] + (1.0 - b2) * g * g;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            let update = lr * m_hat / (v_hat.sqrt() + state.eps);
            p.value[k] = (p.value[k] as f64 - update) as f32;
        }
    }
    Ok(())
}
