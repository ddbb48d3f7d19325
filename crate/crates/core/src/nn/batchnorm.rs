use super::{Mode, NnError, Scalar, Tensor};

/// Batch normalization over the filter axis of `[B, L, F]` activations.
/// Statistics are computed per filter across the batch and time axes.
#[derive(Debug, Clone)]
pub struct BatchNormParams<F: Scalar> {
    pub gamma: Tensor<F>,
    pub beta: Tensor<F>,
    pub running_mean: Tensor<F>,
    pub running_var: Tensor<F>,
    pub momentum: F,
    pub eps: F,
}

impl<F: Scalar> BatchNormParams<F> {
    pub fn new(features: usize) -> Self {
        BatchNormParams {
            gamma: Tensor::new(vec![features], vec![F::one(); features]),
            beta: Tensor::zeros(vec![features]),
            running_mean: Tensor::zeros(vec![features]),
            running_var: Tensor::new(vec![features], vec![F::one(); features]),
            momentum: Scalar::from_f64_(0.9),
            eps: Scalar::from_f64_(1e-5),
        }
    }

    pub fn cast<G: Scalar>(&self) -> BatchNormParams<G> {
        BatchNormParams {
            gamma: self.gamma.cast(),
            beta: self.beta.cast(),
            running_mean: self.running_mean.cast(),
            running_var: self.running_var.cast(),
            momentum: Scalar::from_f64_(self.momentum.to_f64_()),
            eps: Scalar::from_f64_(self.eps.to_f64_()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchNormCache<F: Scalar> {
    pub xhat: Tensor<F>,
    pub inv_std: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads<F: Scalar> {
    pub gamma: Tensor<F>,
    pub beta: Tensor<F>,
}

/// Train mode normalizes with batch statistics and folds them into the
/// running stats; eval mode uses the stored running stats and never mutates.
pub fn batch_norm_forward<F: Scalar>(
    input: &Tensor<F>,
    params: &mut BatchNormParams<F>,
    mode: Mode,
) -> Result<(Tensor<F>, BatchNormCache<F>), NnError> {
    let shape = input.shape();
    if shape.len() != 3 || shape[2] != params.gamma.len() {
        return Err(NnError::ShapeMismatch(format!(
            "batch norm input must be [B, L, {}], got {shape:?}",
            params.gamma.len()
        )));
    }
    let (batch, len, nf) = (shape[0], shape[1], shape[2]);
    if mode == Mode::Train && batch < 2 {
        return Err(NnError::DegenerateBatch(batch));
    }

    let m = batch * len;
    let x = input.data();
    let (mean, var) = match mode {
        Mode::Train => {
            let mut mean = vec![F::zero(); nf];
            let mut var = vec![F::zero(); nf];
            for row in 0..m {
                for f in 0..nf {
                    mean[f] += x[row * nf + f];
                }
            }
            let inv_m = F::one() / Scalar::from_f64_(m as f64);
            for v in mean.iter_mut() {
                *v = *v * inv_m;
            }
            for row in 0..m {
                for f in 0..nf {
                    let d = x[row * nf + f] - mean[f];
                    var[f] += d * d;
                }
            }
            for v in var.iter_mut() {
                *v = *v * inv_m;
            }
            // momentum-weighted running statistics
            let mom = params.momentum;
            let inv_mom = F::one() - mom;
            for f in 0..nf {
                params.running_mean[f] = mom * params.running_mean[f] + inv_mom * mean[f];
                params.running_var[f] = mom * params.running_var[f] + inv_mom * var[f];
            }
            (mean, var)
        }
        Mode::Eval => (
            params.running_mean.data().to_vec(),
            params.running_var.data().to_vec(),
        ),
    };

    let inv_std: Vec<F> = var.iter().map(|&v| F::one() / (v + params.eps).sqrt()).collect();
    let mut xhat = Tensor::zeros(vec![batch, len, nf]);
    let mut output = Tensor::zeros(vec![batch, len, nf]);
    {
        let xh = xhat.data_mut();
        let out = output.data_mut();
        for row in 0..m {
            for f in 0..nf {
                let h = (x[row * nf + f] - mean[f]) * inv_std[f];
                xh[row * nf + f] = h;
                out[row * nf + f] = params.gamma[f] * h + params.beta[f];
            }
        }
    }
    Ok((output, BatchNormCache { xhat, inv_std }))
}

/// Backward through train-mode batch normalization.
pub fn batch_norm_backward<F: Scalar>(
    grad_out: &Tensor<F>,
    cache: &BatchNormCache<F>,
    params: &BatchNormParams<F>,
) -> Result<(Tensor<F>, BatchNormGrads<F>), NnError> {
    let shape = cache.xhat.shape();
    if grad_out.shape() != shape {
        return Err(NnError::ShapeMismatch(format!(
            "grad_out shape {:?} != activation shape {shape:?}",
            grad_out.shape()
        )));
    }
    let (batch, len, nf) = (shape[0], shape[1], shape[2]);
    let m = batch * len;
    let g = grad_out.data();
    let xh = cache.xhat.data();

    let mut dgamma = Tensor::zeros(vec![nf]);
    let mut dbeta = Tensor::zeros(vec![nf]);
    for row in 0..m {
        for f in 0..nf {
            dgamma[f] += g[row * nf + f] * xh[row * nf + f];
            dbeta[f] += g[row * nf + f];
        }
    }

    let inv_m = F::one() / Scalar::from_f64_(m as f64);
    let mut grad_input = Tensor::zeros(vec![batch, len, nf]);
    {
        let gi = grad_input.data_mut();
        for row in 0..m {
            for f in 0..nf {
                let centered = g[row * nf + f]
                    - dbeta[f] * inv_m
                    - xh[row * nf + f] * dgamma[f] * inv_m;
                gi[row * nf + f] = params.gamma[f] * cache.inv_std[f] * centered;
            }
        }
    }
    Ok((grad_input, BatchNormGrads { gamma: dgamma, beta: dbeta }))
}
