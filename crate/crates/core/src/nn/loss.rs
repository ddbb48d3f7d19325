use super::{NnError, Scalar, Tensor};

/// Predictions are clipped to [BCE_CLIP, 1 - BCE_CLIP] before the logs.
pub const BCE_CLIP: f64 = 1e-7;

/// Numerically stable logistic function.
pub fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

fn clip<F: Scalar>(p: F) -> F {
    let lo: F = Scalar::from_f64_(BCE_CLIP);
    let hi = F::one() - lo;
    p.max(lo).min(hi)
}

/// Mean binary cross-entropy: -(1/N) sum [y log p + (1-y) log(1-p)].
pub fn bce_loss<F: Scalar>(y: &Tensor<F>, yhat: &Tensor<F>) -> Result<F, NnError> {
    if y.len() != yhat.len() {
        return Err(NnError::LengthMismatch { left: y.len(), right: yhat.len() });
    }
    if y.is_empty() {
        return Err(NnError::EmptyInput);
    }
    let n: F = Scalar::from_f64_(y.len() as f64);
    let mut total = F::zero();
    for (&yi, &pi) in y.data().iter().zip(yhat.data()) {
        let p = clip(pi);
        total += yi * p.ln() + (F::one() - yi) * (F::one() - p).ln();
    }
    Ok(-total / n)
}

/// dL/dp_i = (p_i - y_i) / (N p_i (1 - p_i)), with p clipped as in the loss.
pub fn bce_grad<F: Scalar>(y: &Tensor<F>, yhat: &Tensor<F>) -> Result<Tensor<F>, NnError> {
    if y.len() != yhat.len() {
        return Err(NnError::LengthMismatch { left: y.len(), right: yhat.len() });
    }
    let n: F = Scalar::from_f64_(y.len() as f64);
    let mut grad = Tensor::zeros(vec![y.len()]);
    {
        let g = grad.data_mut();
        for (i, (&yi, &pi)) in y.data().iter().zip(yhat.data()).enumerate() {
            let p = clip(pi);
            g[i] = (p - yi) / (n * p * (F::one() - p));
        }
    }
    Ok(grad)
}
