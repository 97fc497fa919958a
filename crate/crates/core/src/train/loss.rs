use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Per-sample relative error `|pred - target| / |target|` over all
/// channels and points of each leading-axis sample; `None` where the target
/// norm is zero.
pub fn relative_l2_per_sample<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Vec<Option<f64>>> {
    if pred.shape() != target.shape() || pred.rank() == 0 {
        return Err(Error::shape("relative_l2", target.shape(), pred.shape()));
    }
    let n = pred.shape()[0];
    let per = if n == 0 { 0 } else { pred.len() / n };
    Ok((0..n)
        .map(|s| {
            let range = s * per..(s + 1) * per;
            let (mut diff, mut norm) = (0.0, 0.0);
            for (p, t) in pred.data()[range.clone()].iter().zip(&target.data()[range]) {
                let (p, t) = (p.as_f64(), t.as_f64());
                diff += (p - t) * (p - t);
                norm += t * t;
            }
            (norm > 0.0).then(|| (diff / norm).sqrt())
        })
        .collect())
}

fn mean_valid(errors: &[Option<f64>]) -> Result<(f64, usize)> {
    let valid: Vec<f64> = errors.iter().flatten().copied().collect();
    let skipped = errors.len() - valid.len();
    if skipped > 0 {
        eprintln!("warning: {skipped} sample(s) with zero-norm target skipped in relative L2");
    }
    if valid.is_empty() {
        return Err(Error::Data("every target in the batch has zero norm".into()));
    }
    Ok((valid.iter().sum::<f64>() / valid.len() as f64, valid.len()))
}

/// Batch mean of the per-sample relative L2 error. Samples whose target is
/// identically zero are skipped with a warning.
pub fn relative_l2<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    Ok(mean_valid(&relative_l2_per_sample(pred, target)?)?.0)
}

/// Relative L2 and its gradient with respect to `pred`.
///
/// For sample `n` with difference `d` the gradient is
/// `d / (N |d| |target|)`, taken as zero where `d = 0`.
pub fn relative_l2_with_grad<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    let errors = relative_l2_per_sample(pred, target)?;
    let (value, count) = mean_valid(&errors)?;
    let n = pred.shape()[0];
    let per = pred.len() / n;
    let mut grad = Tensor::zeros(pred.shape());
    for (s, e) in errors.iter().enumerate() {
        let Some(e) = *e else { continue };
        if e == 0.0 {
            continue;
        }
        let range = s * per..(s + 1) * per;
        let norm = target.data()[range.clone()].iter().map(|t| t.as_f64().powi(2)).sum::<f64>().sqrt();
        // |d| = e * |t|, so d / (N |d| |t|) = d / (N e |t|^2).
        let k = 1.0 / (count as f64 * e * norm * norm);
        for i in range {
            grad.data_mut()[i] = T::of((pred.data()[i].as_f64() - target.data()[i].as_f64()) * k);
        }
    }
    Ok((value, grad))
}
