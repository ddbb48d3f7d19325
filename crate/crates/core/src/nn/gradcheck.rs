use super::Tensor;

/// Outcome of an analytic-vs-numeric gradient comparison.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Entries excluded from the comparison (e.g. at a clip boundary where
    /// the loss is not differentiable).
    pub skipped: usize,
}

/// Central finite differences of a scalar function of several tensors.
/// Runs at 64-bit precision; `h` around 1e-5 works for the kernels here.
pub fn central_diff_grad<Func>(mut f: Func, params: &[Tensor<f64>], h: f64) -> Vec<Tensor<f64>>
where
    Func: FnMut(&[Tensor<f64>]) -> f64,
{
    let mut work: Vec<Tensor<f64>> = params.to_vec();
    let mut grads: Vec<Tensor<f64>> = params.iter().map(Tensor::zeros_like).collect();
    for pi in 0..params.len() {
        for i in 0..params[pi].len() {
            let orig = work[pi][i];
            work[pi][i] = orig + h;
            let plus = f(&work);
            work[pi][i] = orig - h;
            let minus = f(&work);
            work[pi][i] = orig;
            grads[pi][i] = (plus - minus) / (2.0 * h);
        }
    }
    grads
}

/// Compare analytic and numeric gradients entry by entry. The relative error
/// denominator is floored so near-zero gradients do not blow up the ratio.
/// `skip` receives (tensor index, entry index) and excludes flagged entries.
pub fn max_rel_error(
    analytic: &[Tensor<f64>],
    numeric: &[Tensor<f64>],
    skip: Option<&dyn Fn(usize, usize) -> bool>,
) -> GradCheckReport {
    assert_eq!(analytic.len(), numeric.len());
    let mut max_err = 0.0f64;
    let mut checked = 0;
    let mut skipped = 0;
    for (pi, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        assert_eq!(a.shape(), n.shape());
        for i in 0..a.len() {
            if skip.map(|s| s(pi, i)).unwrap_or(false) {
                skipped += 1;
                continue;
            }
            let denom = a[i].abs().max(n[i].abs()).max(1e-6);
            let err = (a[i] - n[i]).abs() / denom;
            max_err = max_err.max(err);
            checked += 1;
        }
    }
    GradCheckReport { max_rel_error: max_err, checked, skipped }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let x = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]);
        let f = |p: &[Tensor<f64>]| p[0].data().iter().map(|v| v * v).sum::<f64>();
        let num = central_diff_grad(f, std::slice::from_ref(&x), 1e-5);
        let analytic = vec![Tensor::new(vec![3], vec![2.0, -4.0, 1.0])];
        let report = max_rel_error(&analytic, &num, None);
        assert!(report.max_rel_error < 1e-7, "err = {}", report.max_rel_error);
        assert_eq!(report.checked, 3);
        assert_eq!(report.skipped, 0);
    }

    #[test]
    fn skip_excludes_entries() {
        let a = vec![Tensor::new(vec![2], vec![1.0, 999.0])];
        let n = vec![Tensor::new(vec![2], vec![1.0, 0.0])];
        let skip = |_pi: usize, i: usize| i == 1;
        let report = max_rel_error(&a, &n, Some(&skip));
        assert_eq!(report.skipped, 1);
        assert!(report.max_rel_error < 1e-12);
    }
}
