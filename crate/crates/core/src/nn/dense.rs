use super::{NnError, Scalar, Tensor};
use crate::nn::loss::sigmoid;

/// Dense layer parameters: weight `[in, out]`, bias `[out]`.
#[derive(Debug, Clone)]
pub struct DenseParams<F: Scalar> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Scalar> DenseParams<F> {
    pub fn new(weight: Tensor<F>, bias: Tensor<F>) -> Result<Self, NnError> {
        let ws = weight.shape();
        if ws.len() != 2 || bias.shape() != [ws[1]] {
            return Err(NnError::ShapeMismatch(format!(
                "dense weight {ws:?} incompatible with bias {:?}",
                bias.shape()
            )));
        }
        Ok(DenseParams { weight, bias })
    }

    pub fn d_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn d_out(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn cast<G: Scalar>(&self) -> DenseParams<G> {
        DenseParams { weight: self.weight.cast(), bias: self.bias.cast() }
    }
}

#[derive(Debug, Clone)]
pub struct DenseGrads<F: Scalar> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
}

/// Single-output dense layer with sigmoid activation: sigma(w . x + b).
/// The stable sigmoid keeps the result finite for |z| up to the hundreds.
pub fn dense_sigmoid_forward<F: Scalar>(
    input: &Tensor<F>,
    params: &DenseParams<F>,
) -> Result<F, NnError> {
    if params.d_out() != 1 {
        return Err(NnError::ShapeMismatch(format!(
            "dense_sigmoid expects a single output, got {}",
            params.d_out()
        )));
    }
    if input.shape() != [params.d_in()] {
        return Err(NnError::ShapeMismatch(format!(
            "dense input must be [{}], got {:?}",
            params.d_in(),
            input.shape()
        )));
    }
    let mut z = params.bias[0];
    let w = params.weight.data();
    for (x, &wv) in input.data().iter().zip(w) {
        z += *x * wv;
    }
    Ok(sigmoid(z))
}

/// Backward pass given dL/dp where p is the sigmoid output.
pub fn dense_sigmoid_backward<F: Scalar>(
    grad_p: F,
    proba: F,
    input: &Tensor<F>,
    params: &DenseParams<F>,
) -> Result<(Tensor<F>, DenseGrads<F>), NnError> {
    if input.shape() != [params.d_in()] {
        return Err(NnError::ShapeMismatch(format!(
            "dense input must be [{}], got {:?}",
            params.d_in(),
            input.shape()
        )));
    }
    let gz = grad_p * proba * (F::one() - proba);
    let mut grad_input = Tensor::zeros(vec![params.d_in()]);
    let mut grad_weight = Tensor::zeros(params.weight.shape().to_vec());
    {
        let gi = grad_input.data_mut();
        let gw = grad_weight.data_mut();
        let w = params.weight.data();
        for (i, &x) in input.data().iter().enumerate() {
            gi[i] = gz * w[i];
            gw[i] = gz * x;
        }
    }
    let grad_bias = Tensor::new(vec![1], vec![gz]);
    Ok((grad_input, DenseGrads { weight: grad_weight, bias: grad_bias }))
}
