//! Autoregressive prediction over a sliding window of frames.
//!
//! Windows and horizons are stacked component-major: channel
//! `c * len + t` holds component `c` at frame `t`. Any channels after the
//! window (coordinates) ride along unchanged.

use crate::data::{Dataset, SplitKind};
use crate::error::{Error, Result};
use crate::model::AnyModel;
use crate::tensor::{Scalar, Tensor};

use super::loss::relative_l2_per_sample;

/// Frame `t` of every component: `(N, ct, H, W)` out of `(N, ct * len, H, W)`.
pub(crate) fn frame<T: Scalar>(x: &Tensor<T>, t: usize, ct: usize, len: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4()?;
    if c < ct * len || t >= len {
        return Err(Error::Data(format!("frame {t} of {len} missing from {c} channels")));
    }
    let plane = h * w;
    let mut out = Vec::with_capacity(n * ct * plane);
    for s in 0..n {
        for comp in 0..ct {
            let ch = s * c + comp * len + t;
            out.extend_from_slice(&x.data()[ch * plane..(ch + 1) * plane]);
        }
    }
    Tensor::from_vec(&[n, ct, h, w], out)
}

fn put_frame<T: Scalar>(dst: &mut Tensor<T>, src: &Tensor<T>, t: usize, ct: usize, len: usize) -> Result<()> {
    let (n, c, h, w) = dst.dims4()?;
    let plane = h * w;
    for s in 0..n {
        for comp in 0..ct {
            let ch = s * c + comp * len + t;
            let from = (s * ct + comp) * plane;
            dst.data_mut()[ch * plane..(ch + 1) * plane].copy_from_slice(&src.data()[from..from + plane]);
        }
    }
    Ok(())
}

/// Drop the oldest frame of each component and append `next`.
pub(crate) fn shift_window<T: Scalar>(x: &Tensor<T>, next: &Tensor<T>, ct: usize, hist: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4()?;
    if next.shape() != [n, ct, h, w] {
        return Err(Error::shape("shift_window", &[n, ct, h, w], next.shape()));
    }
    let plane = h * w;
    let mut out = x.clone();
    out.clear_grad();
    for s in 0..n {
        for comp in 0..ct {
            let base = (s * c + comp * hist) * plane;
            out.data_mut()[base..base + (hist - 1) * plane]
                .copy_from_slice(&x.data()[base + plane..base + hist * plane]);
        }
    }
    put_frame(&mut out, next, hist - 1, ct, hist)?;
    Ok(out)
}

/// Adjoint of [`shift_window`]: splits the gradient of the shifted window
/// into the gradient of the previous window and of the appended frame.
pub(crate) fn shift_window_adjoint<T: Scalar>(
    grad: &Tensor<T>,
    ct: usize,
    hist: usize,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (n, c, h, w) = grad.dims4()?;
    let plane = h * w;
    let mut gx = grad.clone();
    for s in 0..n {
        for comp in 0..ct {
            let base = (s * c + comp * hist) * plane;
            gx.data_mut()[base + plane..base + hist * plane]
                .copy_from_slice(&grad.data()[base..base + (hist - 1) * plane]);
            gx.data_mut()[base..base + plane].iter_mut().for_each(|v| *v = T::zero());
        }
    }
    Ok((gx, frame(grad, hist - 1, ct, hist)?))
}

/// Predicted trajectory in physical units, `(N, ct * horizon, H, W)`, and
/// the mean per-sample relative L2 error of the whole trajectory.
#[derive(Debug, Clone)]
pub struct RolloutOutput<T: Scalar> {
    pub prediction: Tensor<T>,
    pub rel_l2: f64,
}

/// Roll `step` forward `horizon` times from physical `inputs`.
///
/// `step(t, window)` receives the encoded window (with coordinates when the
/// dataset appends them) and returns the encoded next frame `(N, ct, H, W)`.
pub fn rollout_with<T: Scalar>(
    data: &Dataset<T>,
    inputs: &Tensor<T>,
    targets: &Tensor<T>,
    horizon: usize,
    mut step: impl FnMut(usize, &Tensor<T>) -> Result<Tensor<T>>,
) -> Result<RolloutOutput<T>> {
    let w = data
        .windowing()
        .ok_or_else(|| Error::Data("rollout needs a windowed dataset".into()))?;
    let ct = data.model_out_channels();
    let available = targets.shape().get(1).copied().unwrap_or(0) / ct;
    if horizon == 0 || horizon > available {
        return Err(Error::Data(format!(
            "rollout horizon {horizon} exceeds the {available} ground-truth frames"
        )));
    }
    let (n, _, h, wd) = inputs.dims4()?;
    let mut window = data.encode_inputs(inputs)?;
    let mut prediction = Tensor::zeros(&[n, ct * horizon, h, wd]);
    let mut truth = Tensor::zeros(&[n, ct * horizon, h, wd]);
    for t in 0..horizon {
        let next = step(t, &window)?;
        put_frame(&mut prediction, &data.output_norm().decode(&next)?, t, ct, horizon)?;
        put_frame(&mut truth, &frame(targets, t, ct, available)?, t, ct, horizon)?;
        window = shift_window(&window, &next, ct, w.history)?;
    }
    let errors = relative_l2_per_sample(&prediction, &truth)?;
    let valid: Vec<f64> = errors.into_iter().flatten().collect();
    if valid.is_empty() {
        return Err(Error::Data("every ground-truth trajectory has zero norm".into()));
    }
    let rel_l2 = valid.iter().sum::<f64>() / valid.len() as f64;
    Ok(RolloutOutput { prediction, rel_l2 })
}

/// Model rollout over a whole split, `chunk` trajectories at a time.
pub fn rollout_eval<T: Scalar>(
    model: &AnyModel<T>,
    data: &Dataset<T>,
    split: SplitKind,
    horizon: usize,
    chunk: usize,
) -> Result<RolloutOutput<T>> {
    let s = data.split(split);
    let idx: Vec<usize> = (0..s.len()).collect();
    let (mut preds, mut weighted) = (Vec::new(), 0.0);
    for part in idx.chunks(chunk.max(1)) {
        let b = s.gather(part)?;
        let out = rollout_with(data, &b.inputs, &b.targets, horizon, |_, x| model.forward(x))?;
        weighted += out.rel_l2 * part.len() as f64;
        preds.push(out.prediction);
    }
    let refs: Vec<&Tensor<T>> = preds.iter().collect();
    Ok(RolloutOutput {
        prediction: Tensor::concat_batch(&refs)?,
        rel_l2: weighted / s.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_and_adjoint_are_transposes() {
        let (ct, hist) = (2, 3);
        let x = Tensor::<f64>::from_fn(&[2, ct * hist + 1, 2, 2], |i| (i as f64).sin());
        let y = Tensor::<f64>::from_fn(&[2, ct, 2, 2], |i| (i as f64).cos());
        let g = Tensor::<f64>::from_fn(x.shape(), |i| ((3 * i) as f64).sin());
        let shifted = shift_window(&x, &y, ct, hist).unwrap();
        let (gx, gy) = shift_window_adjoint(&g, ct, hist).unwrap();
        let dot = |a: &Tensor<f64>, b: &Tensor<f64>| -> f64 { a.data().iter().zip(b.data()).map(|(a, b)| a * b).sum() };
        assert!((dot(&shifted, &g) - dot(&x, &gx) - dot(&y, &gy)).abs() < 1e-12);
    }
}
