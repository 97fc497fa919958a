//! Elementwise GELU (exact erf form) and sigmoid with analytic derivatives.

use crate::tensor::{Scalar, Tensor};

const INV_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
// 1 / sqrt(2 * pi)
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub fn normal_cdf<T: Scalar>(x: T) -> T {
    let half = T::of(0.5);
    half * (T::one() + (x * T::of(INV_SQRT_2)).erf())
}

pub fn gelu_scalar<T: Scalar>(x: T) -> T {
    x * normal_cdf(x)
}

/// d/dx [x Phi(x)] = Phi(x) + x phi(x)
pub fn gelu_grad_scalar<T: Scalar>(x: T) -> T {
    let pdf = T::of(INV_SQRT_2PI) * (-(x * x) * T::of(0.5)).exp();
    normal_cdf(x) + x * pdf
}

pub fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn gelu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(gelu_scalar)
}

pub fn sigmoid<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(sigmoid_scalar)
}

/// `grad_out * gelu'(input)`.
pub fn gelu_backward<T: Scalar>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    assert_eq!(input.shape(), grad_out.shape(), "gelu_backward shapes");
    let mut out = grad_out.clone();
    for (g, &x) in out.data_mut().iter_mut().zip(input.data()) {
        *g = *g * gelu_grad_scalar(x);
    }
    out
}

/// `grad_out * s (1 - s)` where `s = sigmoid(input)`.
pub fn sigmoid_backward<T: Scalar>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    assert_eq!(input.shape(), grad_out.shape(), "sigmoid_backward shapes");
    let mut out = grad_out.clone();
    for (g, &x) in out.data_mut().iter_mut().zip(input.data()) {
        let s = sigmoid_scalar(x);
        *g = *g * s * (T::one() - s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetry_points() {
        assert_eq!(gelu_scalar(0.0f64), 0.0);
        assert_eq!(sigmoid_scalar(0.0f64), 0.5);
        assert_eq!(gelu_scalar(0.0f32), 0.0);
    }

    #[test]
    fn sigmoid_is_stable_when_saturated() {
        assert_eq!(sigmoid_scalar(-1000.0f64), 0.0);
        assert_eq!(sigmoid_scalar(1000.0f64), 1.0);
        assert!(sigmoid_scalar(-80.0f32) > 0.0);
        assert!(gelu_scalar(-40.0f64).abs() < 1e-300);
        assert_eq!(gelu_scalar(40.0f64), 40.0);
    }

    #[test]
    fn sigmoid_complement_identity() {
        for i in -50..=50 {
            let x = i as f64 * 0.37;
            let s = sigmoid_scalar(x) + sigmoid_scalar(-x);
            assert!((s - 1.0).abs() < 1e-15, "x={x}");
        }
    }
}
