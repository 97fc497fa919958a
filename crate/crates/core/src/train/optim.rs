use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

use super::TrainConfig;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Step schedule `lr0 * gamma^floor(epoch / step_size)`.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    let k = epoch.checked_div(cfg.step_size).unwrap_or(0);
    cfg.lr * cfg.gamma.powi(k as i32)
}

/// First and second moment buffers, one pair per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<T: Scalar> {
    pub first: Vec<Tensor<T>>,
    pub second: Vec<Tensor<T>>,
}

impl<T: Scalar> Moments<T> {
    pub fn zeros_like<'a>(params: impl IntoIterator<Item = &'a Tensor<T>>) -> Self {
        let first: Vec<Tensor<T>> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            second: first.clone(),
            first,
        }
    }
}

/// One bias-corrected adaptive-moment update with decoupled weight decay:
/// `theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)`.
///
/// `step` counts updates including this one. Missing gradients count as
/// zero. Every gradient is checked before anything is modified, so a
/// non-finite gradient leaves parameters and moments untouched.
pub fn optimizer_step<T: Scalar>(
    params: &mut [(String, &mut Tensor<T>)],
    moments: &mut Moments<T>,
    step: u64,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if moments.first.len() != params.len() || moments.second.len() != params.len() {
        return Err(Error::Config(format!(
            "{} parameters but {} moment buffers",
            params.len(),
            moments.first.len()
        )));
    }
    for ((name, p), m) in params.iter().zip(&moments.first) {
        if m.shape() != p.shape() {
            return Err(Error::shape("optimizer_step", p.shape(), m.shape()));
        }
        if p.grad().is_some_and(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFiniteGradient(name.clone()));
        }
    }
    let t = step.max(1) as i32;
    let (c1, c2) = (1.0 - BETA1.powi(t), 1.0 - BETA2.powi(t));
    for (((_, p), m), v) in params.iter_mut().zip(&mut moments.first).zip(&mut moments.second) {
        let grad = p.grad().map(|g| g.to_vec());
        let (m, v) = (m.data_mut(), v.data_mut());
        for (i, theta) in p.data_mut().iter_mut().enumerate() {
            let g = grad.as_ref().map_or(0.0, |g| g[i].as_f64());
            let mi = BETA1 * m[i].as_f64() + (1.0 - BETA1) * g;
            let vi = BETA2 * v[i].as_f64() + (1.0 - BETA2) * g * g;
            m[i] = T::of(mi);
            v[i] = T::of(vi);
            let update = (mi / c1) / ((vi / c2).sqrt() + ADAM_EPS) + weight_decay * theta.as_f64();
            *theta = T::of(theta.as_f64() - lr * update);
        }
    }
    Ok(())
}

/// Scale all gradients so their joint norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_grad_norm<T: Scalar>(params: &mut [(String, &mut Tensor<T>)], max_norm: f64) -> f64 {
    let norm = params
        .iter()
        .filter_map(|(_, p)| p.grad())
        .flatten()
        .map(|g| g.as_f64() * g.as_f64())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let k = T::of(max_norm / norm);
        for (_, p) in params.iter_mut() {
            if p.grad().is_some() {
                p.grad_mut().iter_mut().for_each(|g| *g = *g * k);
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(theta: f64, grad: Option<f64>) -> Tensor<f64> {
        let mut t = Tensor::from_vec(&[1], vec![theta]).unwrap();
        if let Some(g) = grad {
            t.grad_mut()[0] = g;
        }
        t
    }

    fn step(t: &mut Tensor<f64>, m: &mut Moments<f64>, k: u64, lr: f64, wd: f64) -> Result<()> {
        optimizer_step(&mut [("p".to_string(), t)], m, k, lr, wd)
    }

    #[test]
    fn first_step_moves_by_the_learning_rate() {
        let mut t = one(1.0, Some(1.0));
        let mut m = Moments::zeros_like([&t]);
        step(&mut t, &mut m, 1, 1e-3, 0.0).unwrap();
        assert!((t.data()[0] - (1.0 - 1e-3 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn pure_decay_and_fixed_point() {
        let mut t = one(1.0, Some(0.0));
        let mut m = Moments::zeros_like([&t]);
        step(&mut t, &mut m, 1, 1.0, 0.1).unwrap();
        assert!((t.data()[0] - 0.9).abs() < 1e-15);
        let mut still = one(0.25, None);
        let mut m = Moments::zeros_like([&still]);
        for k in 1..50 {
            step(&mut still, &mut m, k, 1e-2, 0.0).unwrap();
        }
        assert_eq!(still.data()[0], 0.25);
    }

    #[test]
    fn non_finite_gradient_aborts_untouched() {
        let mut t = one(2.0, Some(f64::NAN));
        let mut m = Moments::zeros_like([&t]);
        assert!(matches!(step(&mut t, &mut m, 1, 1.0, 0.0), Err(Error::NonFiniteGradient(n)) if n == "p"));
        assert_eq!(t.data()[0], 2.0);
        assert_eq!(m.first[0].data()[0], 0.0);
    }

    #[test]
    fn clipping_bounds_the_norm() {
        let mut a = Tensor::<f64>::from_vec(&[2], vec![0.0, 0.0]).unwrap();
        a.grad_mut().copy_from_slice(&[3.0, 4.0]);
        let before = clip_grad_norm(&mut [("a".into(), &mut a)], 1.0);
        assert_eq!(before, 5.0);
        assert!((a.grad().unwrap()[0] - 0.6).abs() < 1e-15);
    }
}
