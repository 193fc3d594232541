use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckResult {
    pub max_relative_error: f64,
    /// Flat index into the concatenation of all checked parameters.
    pub worst_parameter_index: usize,
    pub checked: usize,
}

/// Compares backward-pass gradients with central differences.
///
/// Relative error per element is `|a − n| / max(|a|, |n|, 1e-8)`. The builder
/// is evaluated twice at the starting point first; differing results are
/// reported as non-determinism rather than as a gradient error.
pub fn grad_check<F>(loss_builder: F, params: &[Tensor], step: f64) -> Result<GradCheckResult>
where
    F: Fn(&[Tensor]) -> Result<Tensor>,
{
    if !(step > 0.0) {
        return Err(Error::Config(format!("grad_check step must be > 0, got {step}")));
    }
    let first = loss_builder(params)?.item();
    let second = loss_builder(params)?.item();
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    params.iter().for_each(Tensor::clear_grad);
    loss_builder(params)?.backward()?;
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| p.grad().unwrap_or_else(|| vec![0.0; p.numel()]))
        .collect();

    let mut result = GradCheckResult {
        max_relative_error: 0.0,
        worst_parameter_index: 0,
        checked: 0,
    };
    let mut flat = 0;
    for (p, grads) in params.iter().zip(&analytic) {
        for (i, &a) in grads.iter().enumerate() {
            let orig = p.values()[i];
            p.update(|v| v[i] = orig + step);
            let plus = loss_builder(params)?.item();
            p.update(|v| v[i] = orig - step);
            let minus = loss_builder(params)?.item();
            p.update(|v| v[i] = orig);

            let numeric = (plus - minus) / (2.0 * step);
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            let rel = (a - numeric).abs() / denom;
            if rel > result.max_relative_error {
                result.max_relative_error = rel;
                result.worst_parameter_index = flat;
            }
            flat += 1;
        }
    }
    result.checked = flat;
    params.iter().for_each(Tensor::clear_grad);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use std::cell::Cell;

    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let theta = Tensor::param(vec![4], vec![0.3, -1.7, 2.2, 5.0]).unwrap();
        let a = Tensor::new(vec![4], vec![1.0, 2.0, 0.5, 3.0]).unwrap();
        let r = grad_check(|p| p[0].square()?.mul(&a)?.sum().add(&p[0].sum()), &[theta], 1e-5).unwrap();
        assert!(r.max_relative_error < 1e-6, "{r:?}");
        assert_eq!(r.checked, 4);
    }

    #[test]
    fn constant_loss_has_zero_error() {
        let theta = Tensor::param(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let r = grad_check(|p| Ok(p[0].scale(0.0).sum().add_scalar(4.0)), &[theta], 1e-5).unwrap();
        assert_eq!(r.max_relative_error, 0.0);
    }

    #[test]
    fn detects_non_determinism() {
        let calls = Cell::new(0.0);
        let theta = Tensor::param(vec![1], vec![1.0]).unwrap();
        let err = grad_check(
            |p| {
                calls.set(calls.get() + 1.0);
                Ok(p[0].add_scalar(calls.get()).sum())
            },
            &[theta],
            1e-5,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonDeterministic { .. }));
    }

    #[test]
    fn rejects_non_positive_step() {
        let theta = Tensor::param(vec![1], vec![1.0]).unwrap();
        assert!(grad_check(|p| Ok(p[0].sum()), &[theta], 0.0).is_err());
    }

    #[test]
    fn flags_a_wrong_gradient() {
        // relu at its kink: analytic 0, central difference 0.5
        let theta = Tensor::param(vec![1], vec![0.0]).unwrap();
        let r = grad_check(|p| Ok(p[0].relu().sum()), &[theta], 1e-3).unwrap();
        assert!(r.max_relative_error > 0.5);
    }
}
