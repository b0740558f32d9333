use super::ModelParams;

/// Adam moments and hyperparameters. Weight decay is decoupled: parameters
/// are shrunk by `lr * weight_decay` before the moment update is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ModelParams, lr: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        AdamState {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

pub fn adam_step(params: &mut ModelParams, grads: &ModelParams, state: &mut AdamState) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (lr, wd, b1, b2, eps) = (state.lr, state.weight_decay, state.beta1, state.beta2, state.eps);

    let grad_tensors = grads.tensors();
    for (k, p) in params.tensors_mut().into_iter().enumerate() {
        let g = grad_tensors[k].1;
        let m = &mut state.m[k];
        let v = &mut state.v[k];
        for i in 0..p.len() {
            p[i] -= lr * wd * p[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
