use super::{Mode, Scalar, Tensor};
use rand::Rng;

/// Survivor mask produced by a train-mode forward pass. Entries hold the
/// inverted-dropout scale 1/(1-rate) for kept units and 0 for dropped ones.
#[derive(Debug, Clone)]
pub struct DropoutMask<F: Scalar> {
    scale: Vec<F>,
}

impl<F: Scalar> DropoutMask<F> {
    fn identity(len: usize) -> Self {
        DropoutMask { scale: vec![F::one(); len] }
    }
}

/// Inverted dropout: train mode zeroes entries with probability `rate` and
/// scales survivors by 1/(1-rate); eval mode is the identity.
pub fn dropout_forward<F: Scalar, R: Rng>(
    input: &Tensor<F>,
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> (Tensor<F>, DropoutMask<F>) {
    assert!((0.0..1.0).contains(&rate));
    if mode == Mode::Eval || rate == 0.0 {
        return (input.clone(), DropoutMask::identity(input.len()));
    }
    let keep_scale: F = Scalar::from_f64_(1.0 / (1.0 - rate));
    let mut output = input.clone();
    let mut scale = vec![F::zero(); input.len()];
    for (i, v) in output.data_mut().iter_mut().enumerate() {
        if rng.gen::<f64>() < rate {
            *v = F::zero();
        } else {
            *v = *v * keep_scale;
            scale[i] = keep_scale;
        }
    }
    (output, DropoutMask { scale })
}

pub fn dropout_backward<F: Scalar>(grad_out: &Tensor<F>, mask: &DropoutMask<F>) -> Tensor<F> {
    assert_eq!(grad_out.len(), mask.scale.len());
    let mut grad = grad_out.clone();
    for (g, &s) in grad.data_mut().iter_mut().zip(&mask.scale) {
        *g = *g * s;
    }
    grad
}
