//! Benchmarks for the convolution, spectral and model kernels; see
//! `benches/kernels.rs`.

use dseno_core::{Scalar, Tensor};

/// Deterministic smooth test field of the given shape.
pub fn field<T: Scalar>(shape: &[usize]) -> Tensor<T> {
    Tensor::from_fn(shape, |i| T::of(((i % 97) as f64 * 0.13).sin()))
}
