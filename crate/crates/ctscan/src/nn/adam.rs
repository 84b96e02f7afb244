use super::Tensor;

/// Adam moment buffers for one parameter tensor.
///
/// Weight decay is the coupled L2 form: decay*param is added to the
/// gradient before the moment updates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamState {
    pub fn new(param_len: usize, lr: f64, weight_decay: f64) -> Self {
        AdamState {
            m: vec![0.0; param_len],
            v: vec![0.0; param_len],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

/// One Adam update with bias correction, in place.
pub fn adam_step(params: &mut Tensor, grads: &Tensor, state: &mut AdamState) {
    assert_eq!(params.len(), grads.len(), "adam_step shape mismatch");
    assert_eq!(params.len(), state.m.len(), "adam state shape mismatch");
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads.data[i] + state.weight_decay * params.data[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params.data[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
}
