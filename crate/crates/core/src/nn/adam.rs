use super::params::{tensors, Parameters};
use super::NnError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state: one first/second moment buffer per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: Parameters + ?Sized>(params: &P, config: AdamConfig) -> Self {
        let shapes: Vec<usize> = tensors(params).iter().map(|(_, t)| t.len()).collect();
        Self {
            config,
            step: 0,
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<P: Parameters>(params: &mut P, grads: &P, state: &mut AdamState) -> Result<(), NnError> {
    let grads = tensors(grads);
    if grads.len() != state.first_moment.len() {
        return Err(NnError::Dimension {
            op: "adam_step",
            expected: format!("{} parameter tensors", state.first_moment.len()),
            actual: format!("{} gradient tensors", grads.len()),
        });
    }
    for (i, (name, g)) in grads.iter().enumerate() {
        if g.len() != state.first_moment[i].len() {
            return Err(NnError::Dimension {
                op: "adam_step",
                expected: format!("{name} with {} values", state.first_moment[i].len()),
                actual: format!("{} values", g.len()),
            });
        }
    }
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let bc1 = 1.0 - beta1.powi(state.step as i32);
    let bc2 = 1.0 - beta2.powi(state.step as i32);
    let mut i = 0;
    let mut mismatch = None;
    let (m_all, v_all) = (&mut state.first_moment, &mut state.second_moment);
    params.visit_mut("", &mut |name, p| {
        if mismatch.is_some() {
            return;
        }
        let g = grads[i].1;
        if p.len() != g.len() {
            mismatch = Some((name, p.len(), g.len()));
            return;
        }
        let m = &mut m_all[i];
        let v = &mut v_all[i];
        for k in 0..p.len() {
            m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        i += 1;
    });
    if let Some((name, p, g)) = mismatch {
        return Err(NnError::Dimension {
            op: "adam_step",
            expected: format!("{name} with {p} values"),
            actual: format!("{g} gradient values"),
        });
    }
    Ok(())
}
