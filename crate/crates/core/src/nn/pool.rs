use super::{NnError, Scalar, Tensor};

/// Per-filter maximum over the time axis: `[L, F] -> [F]`.
///
/// Returns the argmax indices so the backward pass can route gradient to the
/// winning position only. Ties go to the first occurrence.
pub fn global_max_pool<F: Scalar>(
    input: &Tensor<F>,
) -> Result<(Tensor<F>, Vec<usize>), NnError> {
    let shape = input.shape();
    if shape.len() != 2 {
        return Err(NnError::ShapeMismatch(format!("pool input must be [L, F], got {shape:?}")));
    }
    let (len, nf) = (shape[0], shape[1]);
    if len == 0 {
        return Err(NnError::EmptyInput);
    }
    let x = input.data();
    let mut out = Tensor::zeros(vec![nf]);
    let mut argmax = vec![0usize; nf];
    {
        let o = out.data_mut();
        o.copy_from_slice(&x[..nf]);
        for t in 1..len {
            let row = &x[t * nf..(t + 1) * nf];
            for f in 0..nf {
                if row[f] > o[f] {
                    o[f] = row[f];
                    argmax[f] = t;
                }
            }
        }
    }
    Ok((out, argmax))
}

/// Scatter the pooled gradient back to the argmax positions.
pub fn global_max_pool_backward<F: Scalar>(
    grad_out: &Tensor<F>,
    argmax: &[usize],
    len: usize,
) -> Result<Tensor<F>, NnError> {
    let nf = argmax.len();
    if grad_out.shape() != [nf] {
        return Err(NnError::ShapeMismatch(format!(
            "grad_out must be [{nf}], got {:?}",
            grad_out.shape()
        )));
    }
    let mut grad_input = Tensor::zeros(vec![len, nf]);
    let gi = grad_input.data_mut();
    for f in 0..nf {
        gi[argmax[f] * nf + f] = grad_out[f];
    }
    Ok(grad_input)
}
