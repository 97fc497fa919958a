//! Layer primitives with explicit forward and backward rules.

pub mod activation;
pub mod conv;
pub mod gradcheck;
pub mod pool;

pub use activation::{gelu, gelu_backward, sigmoid, sigmoid_backward};
pub use conv::{
    conv2d_backward, conv2d_forward, pointwise_backward, pointwise_conv, ConvGrads, ConvKernel, PaddingMode,
    PointwiseConv,
};
pub use gradcheck::{grad_check, DifferentiableOp, GradCheckReport, FD_STEP};
pub use pool::{global_avg_pool, global_avg_pool_backward};

/// Attach `prefix.weight` / `prefix.bias` names to a layer's parameters.
pub(crate) fn named<P>(prefix: &str, params: Vec<P>) -> Vec<(String, P)> {
    params
        .into_iter()
        .zip(["weight", "bias"])
        .map(|(p, s)| (format!("{prefix}.{s}"), p))
        .collect()
}
