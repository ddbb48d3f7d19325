//! Shared gradient-check harness for the integration suites. Every check
//! compares analytic backward passes against 64-bit central finite
//! differences on randomly drawn shapes, resampling draws that land too
//! close to a ReLU or max-pool kink for the finite difference to be valid.

use posattack::nn::{
    batch_norm_backward, batch_norm_forward, bce_grad, bce_loss, central_diff_grad,
    conv1d_backward, conv1d_forward, dense_sigmoid_backward, dense_sigmoid_forward,
    dropout_backward, dropout_forward, global_max_pool, global_max_pool_backward,
    max_rel_error, BatchNormParams, Conv1dParams, DenseParams, Mode, Tensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRAD_RTOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;
const KINK_MARGIN: f64 = 1e-3;
const MAX_RESAMPLES: usize = 50;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub layer: &'static str,
    pub max_rel_error: f64,
    pub checked: usize,
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor<f64> {
    let len = shape.iter().product();
    Tensor::new(shape, (0..len).map(|_| rng.gen_range(lo..hi)).collect())
}

fn weighted_sum(coeff: &Tensor<f64>, values: &Tensor<f64>) -> f64 {
    coeff.data().iter().zip(values.data()).map(|(c, v)| c * v).sum()
}

/// Smallest |pre-activation|; draws where this is tiny sit on the ReLU kink.
fn min_abs(t: &Tensor<f64>) -> f64 {
    t.data().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
}

/// Kink check for max-pooling a post-dropout `[L, F]` matrix. Dropped
/// entries are exact zeros and stay zero under any parameter perturbation,
/// so they only matter as a fixed competitor at 0; survivor entries must
/// win or lose each column by a clear margin.
fn pool_gap_after_dropout_ok(t: &Tensor<f64>) -> bool {
    let (len, nf) = (t.shape()[0], t.shape()[1]);
    for f in 0..nf {
        let mut s_max = f64::NEG_INFINITY;
        let mut s_second = f64::NEG_INFINITY;
        let mut has_zero = false;
        for l in 0..len {
            let v = t[l * nf + f];
            if v == 0.0 {
                has_zero = true;
            } else if v > s_max {
                s_second = s_max;
                s_max = v;
            } else if v > s_second {
                s_second = v;
            }
        }
        if s_max == f64::NEG_INFINITY {
            continue; // whole column dropped: constant zero output
        }
        let ok = if has_zero {
            if s_max > KINK_MARGIN {
                s_max - s_second.max(0.0) > KINK_MARGIN
            } else {
                s_max < -KINK_MARGIN
            }
        } else {
            s_second == f64::NEG_INFINITY || s_max - s_second > KINK_MARGIN
        };
        if !ok {
            return false;
        }
    }
    true
}

/// Smallest per-column gap between the max and the runner-up of `[L, F]`.
fn min_pool_gap(t: &Tensor<f64>) -> f64 {
    let (len, nf) = (t.shape()[0], t.shape()[1]);
    let mut gap = f64::INFINITY;
    for f in 0..nf {
        let mut best = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        for l in 0..len {
            let v = t[l * nf + f];
            if v > best {
                second = best;
                best = v;
            } else if v > second {
                second = v;
            }
        }
        if len > 1 {
            gap = gap.min(best - second);
        }
    }
    gap
}

pub fn check_conv(rng: &mut ChaCha8Rng) -> CheckResult {
    let len = rng.gen_range(3..9);
    let d_in = rng.gen_range(2..5);
    let nf = rng.gen_range(2..6);
    let k = [1, 3, 5][rng.gen_range(0..3)];

    for _ in 0..MAX_RESAMPLES {
        let input = rand_tensor(rng, vec![len, d_in], -1.0, 1.0);
        let weight = rand_tensor(rng, vec![k, d_in, nf], -0.5, 0.5);
        let bias = rand_tensor(rng, vec![nf], -0.2, 0.2);
        let params = Conv1dParams::new(weight.clone(), bias.clone()).unwrap();
        let (out, cache) = conv1d_forward(&input, &params).unwrap();
        if min_abs(&cache.preact) < KINK_MARGIN {
            continue;
        }
        let coeff = rand_tensor(rng, out.shape().to_vec(), -1.0, 1.0);

        let (grad_input, grads) = conv1d_backward(&coeff, &cache, &params).unwrap();
        let analytic = vec![grad_input, grads.weight, grads.bias];
        let f = |p: &[Tensor<f64>]| {
            let params = Conv1dParams::new(p[1].clone(), p[2].clone()).unwrap();
            let (out, _) = conv1d_forward(&p[0], &params).unwrap();
            weighted_sum(&coeff, &out)
        };
        let numeric = central_diff_grad(f, &[input, weight, bias], FD_STEP);
        let report = max_rel_error(&analytic, &numeric, None);
        return CheckResult {
            layer: "conv1d",
            max_rel_error: report.max_rel_error,
            checked: report.checked,
        };
    }
    panic!("conv check: no kink-free draw in {MAX_RESAMPLES} tries");
}

pub fn check_pool(rng: &mut ChaCha8Rng) -> CheckResult {
    let len = rng.gen_range(2..8);
    let nf = rng.gen_range(2..6);
    for _ in 0..MAX_RESAMPLES {
        let input = rand_tensor(rng, vec![len, nf], -1.0, 1.0);
        if min_pool_gap(&input) < KINK_MARGIN {
            continue;
        }
        let (out, argmax) = global_max_pool(&input).unwrap();
        let coeff = rand_tensor(rng, out.shape().to_vec(), -1.0, 1.0);
        let analytic = vec![global_max_pool_backward(&coeff, &argmax, len).unwrap()];
        let f = |p: &[Tensor<f64>]| {
            let (out, _) = global_max_pool(&p[0]).unwrap();
            weighted_sum(&coeff, &out)
        };
        let numeric = central_diff_grad(f, std::slice::from_ref(&input), FD_STEP);
        let report = max_rel_error(&analytic, &numeric, None);
        return CheckResult {
            layer: "global_max_pool",
            max_rel_error: report.max_rel_error,
            checked: report.checked,
        };
    }
    panic!("pool check: no tie-free draw in {MAX_RESAMPLES} tries");
}

pub fn check_batch_norm(rng: &mut ChaCha8Rng) -> CheckResult {
    let batch = rng.gen_range(2..5);
    let len = rng.gen_range(2..6);
    let nf = rng.gen_range(2..5);
    let input = rand_tensor(rng, vec![batch, len, nf], -1.0, 1.0);
    let gamma = rand_tensor(rng, vec![nf], 0.5, 1.5);
    let beta = rand_tensor(rng, vec![nf], -0.5, 0.5);
    let coeff = rand_tensor(rng, vec![batch, len, nf], -1.0, 1.0);

    let make_params = |g: &Tensor<f64>, b: &Tensor<f64>| {
        let mut p = BatchNormParams::new(nf);
        p.gamma = g.clone();
        p.beta = b.clone();
        p
    };
    let mut params = make_params(&gamma, &beta);
    let (_, cache) = batch_norm_forward(&input, &mut params, Mode::Train).unwrap();
    let (grad_input, grads) = batch_norm_backward(&coeff, &cache, &params).unwrap();
    let analytic = vec![grad_input, grads.gamma, grads.beta];
    let f = |p: &[Tensor<f64>]| {
        let mut params = make_params(&p[1], &p[2]);
        let (out, _) = batch_norm_forward(&p[0], &mut params, Mode::Train).unwrap();
        weighted_sum(&coeff, &out)
    };
    let numeric = central_diff_grad(f, &[input, gamma, beta], FD_STEP);
    let report = max_rel_error(&analytic, &numeric, None);
    CheckResult {
        layer: "batch_norm",
        max_rel_error: report.max_rel_error,
        checked: report.checked,
    }
}

pub fn check_dense_bce(rng: &mut ChaCha8Rng) -> CheckResult {
    let d_in = rng.gen_range(2..8);
    let input = rand_tensor(rng, vec![d_in], -1.0, 1.0);
    let weight = rand_tensor(rng, vec![d_in, 1], -0.8, 0.8);
    let bias = rand_tensor(rng, vec![1], -0.3, 0.3);
    let label = Tensor::new(vec![1], vec![f64::from(rng.gen_range(0..2u8))]);

    let params = DenseParams::new(weight.clone(), bias.clone()).unwrap();
    let proba = dense_sigmoid_forward(&input, &params).unwrap();
    let grad_p = bce_grad(&label, &Tensor::new(vec![1], vec![proba])).unwrap();
    let (grad_input, grads) =
        dense_sigmoid_backward(grad_p[0], proba, &input, &params).unwrap();
    let analytic = vec![grad_input, grads.weight, grads.bias];
    let f = |p: &[Tensor<f64>]| {
        let params = DenseParams::new(p[1].clone(), p[2].clone()).unwrap();
        let proba = dense_sigmoid_forward(&p[0], &params).unwrap();
        bce_loss(&label, &Tensor::new(vec![1], vec![proba])).unwrap()
    };
    let numeric = central_diff_grad(f, &[input, weight, bias], FD_STEP);
    let report = max_rel_error(&analytic, &numeric, None);
    CheckResult {
        layer: "dense_sigmoid+bce",
        max_rel_error: report.max_rel_error,
        checked: report.checked,
    }
}

pub fn check_dropout(rng: &mut ChaCha8Rng) -> CheckResult {
    let len = rng.gen_range(2..6);
    let nf = rng.gen_range(2..6);
    let input = rand_tensor(rng, vec![len, nf], -1.0, 1.0);
    let coeff = rand_tensor(rng, vec![len, nf], -1.0, 1.0);
    let mask_rng = ChaCha8Rng::seed_from_u64(rng.gen());

    let (_, mask) = dropout_forward(&input, 0.5, Mode::Train, &mut mask_rng.clone());
    let analytic = vec![dropout_backward(&coeff, &mask)];
    let f = |p: &[Tensor<f64>]| {
        // the cloned rng replays the identical mask on every evaluation
        let (out, _) = dropout_forward(&p[0], 0.5, Mode::Train, &mut mask_rng.clone());
        weighted_sum(&coeff, &out)
    };
    let numeric = central_diff_grad(f, std::slice::from_ref(&input), FD_STEP);
    let report = max_rel_error(&analytic, &numeric, None);
    CheckResult {
        layer: "dropout",
        max_rel_error: report.max_rel_error,
        checked: report.checked,
    }
}

/// End-to-end check of the classifier's differentiable trunk: per-example
/// conv + ReLU, batched batch norm, fixed dropout mask, global max pool,
/// dense sigmoid and mean BCE, exactly as the training loop composes them.
pub fn check_composed(rng: &mut ChaCha8Rng) -> CheckResult {
    let batch = 3;
    let len = rng.gen_range(4..7);
    let d = rng.gen_range(2..4);
    let nf = rng.gen_range(3..5);
    let k = 3;

    'draw: for _ in 0..MAX_RESAMPLES {
        let input = rand_tensor(rng, vec![batch, len, d], -1.0, 1.0);
        let conv_w = rand_tensor(rng, vec![k, d, nf], -0.5, 0.5);
        let conv_b = rand_tensor(rng, vec![nf], -0.2, 0.2);
        let gamma = rand_tensor(rng, vec![nf], 0.5, 1.5);
        let beta = rand_tensor(rng, vec![nf], -0.3, 0.3);
        let dense_w = rand_tensor(rng, vec![nf, 1], -0.8, 0.8);
        let dense_b = rand_tensor(rng, vec![1], -0.3, 0.3);
        let labels = Tensor::new(
            vec![batch],
            (0..batch).map(|_| f64::from(rng.gen_range(0..2u8))).collect(),
        );
        let mask_rng = ChaCha8Rng::seed_from_u64(rng.gen());

        let example = |t: &Tensor<f64>, i: usize| {
            let stride: usize = t.shape()[1..].iter().product();
            Tensor::new(t.shape()[1..].to_vec(), t.data()[i * stride..(i + 1) * stride].to_vec())
        };
        let forward = |p: &[Tensor<f64>]| {
            let conv = Conv1dParams::new(p[1].clone(), p[2].clone()).unwrap();
            let mut bn = BatchNormParams::new(nf);
            bn.gamma = p[3].clone();
            bn.beta = p[4].clone();
            let dense = DenseParams::new(p[5].clone(), p[6].clone()).unwrap();

            let mut conv_caches = Vec::new();
            let mut stacked = Tensor::zeros(vec![batch, len, nf]);
            for i in 0..batch {
                let (out, cache) = conv1d_forward(&example(&p[0], i), &conv).unwrap();
                stacked.data_mut()[i * len * nf..(i + 1) * len * nf]
                    .copy_from_slice(out.data());
                conv_caches.push(cache);
            }
            let (normed, bn_cache) =
                batch_norm_forward(&stacked, &mut bn, Mode::Train).unwrap();
            let (dropped, mask) =
                dropout_forward(&normed, 0.5, Mode::Train, &mut mask_rng.clone());
            let mut probas = Tensor::zeros(vec![batch]);
            let mut pooled_all = Vec::new();
            let mut argmax_all = Vec::new();
            for i in 0..batch {
                let (pooled, argmax) = global_max_pool(&example(&dropped, i)).unwrap();
                probas[i] = dense_sigmoid_forward(&pooled, &dense).unwrap();
                pooled_all.push(pooled);
                argmax_all.push(argmax);
            }
            let loss = bce_loss(&labels, &probas).unwrap();
            (loss, conv, bn, dense, conv_caches, bn_cache, mask, dropped, probas,
             pooled_all, argmax_all)
        };

        let params = vec![input, conv_w, conv_b, gamma, beta, dense_w, dense_b];
        let (_, conv, bn, dense, conv_caches, bn_cache, mask, dropped, probas,
             pooled_all, argmax_all) = forward(&params);
        for cache in &conv_caches {
            if min_abs(&cache.preact) < KINK_MARGIN {
                continue 'draw;
            }
        }
        for i in 0..batch {
            if !pool_gap_after_dropout_ok(&example(&dropped, i)) {
                continue 'draw;
            }
        }

        // analytic backward mirroring the training loop
        let gp = bce_grad(&labels, &probas).unwrap();
        let mut grad_dense_w = Tensor::zeros(vec![nf, 1]);
        let mut grad_dense_b = Tensor::zeros(vec![1]);
        let mut grad_dropped = Tensor::zeros(vec![batch, len, nf]);
        for i in 0..batch {
            let (grad_pooled, dg) =
                dense_sigmoid_backward(gp[i], probas[i], &pooled_all[i], &dense).unwrap();
            for j in 0..grad_dense_w.len() {
                grad_dense_w[j] += dg.weight[j];
            }
            grad_dense_b[0] += dg.bias[0];
            let g = global_max_pool_backward(&grad_pooled, &argmax_all[i], len).unwrap();
            grad_dropped.data_mut()[i * len * nf..(i + 1) * len * nf]
                .copy_from_slice(g.data());
        }
        let grad_normed = dropout_backward(&grad_dropped, &mask);
        let (grad_stacked, bn_grads) =
            batch_norm_backward(&grad_normed, &bn_cache, &bn).unwrap();
        let mut grad_input = Tensor::zeros(vec![batch, len, d]);
        let mut grad_conv_w = Tensor::zeros(vec![k, d, nf]);
        let mut grad_conv_b = Tensor::zeros(vec![nf]);
        for (i, cache) in conv_caches.iter().enumerate() {
            let (gi, cg) = conv1d_backward(&example(&grad_stacked, i), cache, &conv).unwrap();
            grad_input.data_mut()[i * len * d..(i + 1) * len * d].copy_from_slice(gi.data());
            for j in 0..grad_conv_w.len() {
                grad_conv_w[j] += cg.weight[j];
            }
            for j in 0..nf {
                grad_conv_b[j] += cg.bias[j];
            }
        }
        let analytic = vec![
            grad_input,
            grad_conv_w,
            grad_conv_b,
            bn_grads.gamma,
            bn_grads.beta,
            grad_dense_w,
            grad_dense_b,
        ];
        let numeric = central_diff_grad(|p| forward(p).0, &params, FD_STEP);
        let report = max_rel_error(&analytic, &numeric, None);
        return CheckResult {
            layer: "composed classifier",
            max_rel_error: report.max_rel_error,
            checked: report.checked,
        };
    }
    panic!("composed check: no kink-free draw in {MAX_RESAMPLES} tries");
}

/// The full randomized suite: at least 20 shapes across every layer plus the
/// composed classifier path.
pub fn run_gradient_suite(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();
    for _ in 0..6 {
        results.push(check_conv(&mut rng));
    }
    for _ in 0..4 {
        results.push(check_pool(&mut rng));
    }
    for _ in 0..4 {
        results.push(check_batch_norm(&mut rng));
    }
    for _ in 0..4 {
        results.push(check_dense_bce(&mut rng));
    }
    for _ in 0..2 {
        results.push(check_dropout(&mut rng));
    }
    for _ in 0..2 {
        results.push(check_composed(&mut rng));
    }
    results
}
