use super::{NnError, Scalar, Tensor};

/// Adam hyperparameters (defaults beta1=0.9, beta2=0.999, eps=1e-8).
#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        AdamHyper { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second-moment accumulators for one parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState<F: Scalar> {
    pub m: Tensor<F>,
    pub v: Tensor<F>,
    pub t: u64,
}

impl<F: Scalar> AdamState<F> {
    pub fn for_param(param: &Tensor<F>) -> Self {
        AdamState { m: Tensor::zeros_like(param), v: Tensor::zeros_like(param), t: 0 }
    }
}

/// One Adam update. Advances the step count, updates the moment estimates and
/// applies the bias-corrected step to the parameter in place.
pub fn adam_step<F: Scalar>(
    param: &mut Tensor<F>,
    grad: &Tensor<F>,
    state: &mut AdamState<F>,
    hyper: &AdamHyper,
) -> Result<(), NnError> {
    if param.shape() != grad.shape() || param.shape() != state.m.shape() {
        return Err(NnError::ShapeMismatch(format!(
            "param {:?}, grad {:?}, state {:?}",
            param.shape(),
            grad.shape(),
            state.m.shape()
        )));
    }
    state.t += 1;
    let b1: F = Scalar::from_f64_(hyper.beta1);
    let b2: F = Scalar::from_f64_(hyper.beta2);
    let lr: F = Scalar::from_f64_(hyper.lr);
    let eps: F = Scalar::from_f64_(hyper.eps);
    let corr1: F = Scalar::from_f64_(1.0 - hyper.beta1.powi(state.t as i32));
    let corr2: F = Scalar::from_f64_(1.0 - hyper.beta2.powi(state.t as i32));

    let p = param.data_mut();
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    let g = grad.data();
    for i in 0..p.len() {
        m[i] = b1 * m[i] + (F::one() - b1) * g[i];
        v[i] = b2 * v[i] + (F::one() - b2) * g[i] * g[i];
        let m_hat = m[i] / corr1;
        let v_hat = v[i] / corr2;
        p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
