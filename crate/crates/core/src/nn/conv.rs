use super::{NnError, Scalar, Tensor};

/// 1D convolution parameters: weight `[k, d_in, filters]`, bias `[filters]`.
/// Kernels are odd so same-padding is symmetric and preserves length.
#[derive(Debug, Clone)]
pub struct Conv1dParams<F: Scalar> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Scalar> Conv1dParams<F> {
    pub fn new(weight: Tensor<F>, bias: Tensor<F>) -> Result<Self, NnError> {
        let ws = weight.shape();
        if ws.len() != 3 {
            return Err(NnError::ShapeMismatch(format!(
                "conv weight must be [k, d_in, filters], got {ws:?}"
            )));
        }
        if ws[0].is_multiple_of(2) {
            return Err(NnError::ShapeMismatch(format!("kernel size {} must be odd", ws[0])));
        }
        if bias.shape() != [ws[2]] {
            return Err(NnError::ShapeMismatch(format!(
                "conv bias must be [{}], got {:?}",
                ws[2],
                bias.shape()
            )));
        }
        Ok(Conv1dParams { weight, bias })
    }

    pub fn kernel_size(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn d_in(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn filters(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn cast<G: Scalar>(&self) -> Conv1dParams<G> {
        Conv1dParams { weight: self.weight.cast(), bias: self.bias.cast() }
    }
}

/// Forward cache: the input and the pre-ReLU activations.
#[derive(Debug, Clone)]
pub struct Conv1dCache<F: Scalar> {
    pub input: Tensor<F>,
    pub preact: Tensor<F>,
}

#[derive(Debug, Clone)]
pub struct Conv1dGrads<F: Scalar> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
}

/// Same-padded 1D convolution over `input [L, d_in]`, bias add, then ReLU.
/// Output is `[L, filters]`.
pub fn conv1d_forward<F: Scalar>(
    input: &Tensor<F>,
    params: &Conv1dParams<F>,
) -> Result<(Tensor<F>, Conv1dCache<F>), NnError> {
    let shape = input.shape();
    if shape.len() != 2 || shape[1] != params.d_in() {
        return Err(NnError::ShapeMismatch(format!(
            "conv input must be [L, {}], got {shape:?}",
            params.d_in()
        )));
    }
    let (len, d_in) = (shape[0], shape[1]);
    let k = params.kernel_size();
    let nf = params.filters();
    let half = k / 2;

    let mut preact = Tensor::zeros(vec![len, nf]);
    let x = input.data();
    let w = params.weight.data();
    {
        let out = preact.data_mut();
        for t in 0..len {
            let row = &mut out[t * nf..(t + 1) * nf];
            row.copy_from_slice(params.bias.data());
            for dk in 0..k {
                let src = t as isize + dk as isize - half as isize;
                if src < 0 || src >= len as isize {
                    continue;
                }
                let src = src as usize;
                for d in 0..d_in {
                    let xv = x[src * d_in + d];
                    if xv == F::zero() {
                        continue;
                    }
                    let wrow = &w[(dk * d_in + d) * nf..(dk * d_in + d + 1) * nf];
                    for (o, &wv) in row.iter_mut().zip(wrow) {
                        *o += xv * wv;
                    }
                }
            }
        }
    }

    let mut output = preact.clone();
    for v in output.data_mut() {
        if *v < F::zero() {
            *v = F::zero();
        }
    }
    Ok((output, Conv1dCache { input: input.clone(), preact }))
}

/// Backward pass through ReLU, bias add and convolution.
pub fn conv1d_backward<F: Scalar>(
    grad_out: &Tensor<F>,
    cache: &Conv1dCache<F>,
    params: &Conv1dParams<F>,
) -> Result<(Tensor<F>, Conv1dGrads<F>), NnError> {
    let (len, d_in) = (cache.input.shape()[0], cache.input.shape()[1]);
    let k = params.kernel_size();
    let nf = params.filters();
    let half = k / 2;
    if grad_out.shape() != [len, nf] {
        return Err(NnError::ShapeMismatch(format!(
            "grad_out must be [{len}, {nf}], got {:?}",
            grad_out.shape()
        )));
    }

    // ReLU gate
    let mut gpre = grad_out.clone();
    for (g, &p) in gpre.data_mut().iter_mut().zip(cache.preact.data()) {
        if p <= F::zero() {
            *g = F::zero();
        }
    }

    let mut grad_input = Tensor::zeros(vec![len, d_in]);
    let mut grad_weight = Tensor::zeros(params.weight.shape().to_vec());
    let mut grad_bias = Tensor::zeros(vec![nf]);

    let x = cache.input.data();
    let w = params.weight.data();
    let g = gpre.data();
    {
        let gb = grad_bias.data_mut();
        for t in 0..len {
            for f in 0..nf {
                gb[f] += g[t * nf + f];
            }
        }
    }
    {
        let gw = grad_weight.data_mut();
        let gi = grad_input.data_mut();
        for t in 0..len {
            let grow = &g[t * nf..(t + 1) * nf];
            for dk in 0..k {
                let src = t as isize + dk as isize - half as isize;
                if src < 0 || src >= len as isize {
                    continue;
                }
                let src = src as usize;
                for d in 0..d_in {
                    let xv = x[src * d_in + d];
                    let wrow = &w[(dk * d_in + d) * nf..(dk * d_in + d + 1) * nf];
                    let gwrow = &mut gw[(dk * d_in + d) * nf..(dk * d_in + d + 1) * nf];
                    let mut acc = F::zero();
                    for f in 0..nf {
                        let gv = grow[f];
                        gwrow[f] += xv * gv;
                        acc += wrow[f] * gv;
                    }
                    gi[src * d_in + d] += acc;
                }
            }
        }
    }

    Ok((grad_input, Conv1dGrads { weight: grad_weight, bias: grad_bias }))
}
