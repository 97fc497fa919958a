//! Squeeze-and-excitation: global pooling, a two-layer gate and a
//! per-channel rescale.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{
    gelu, gelu_backward, global_avg_pool, global_avg_pool_backward, named, sigmoid, sigmoid_backward, PointwiseConv,
};
use crate::tensor::{Scalar, Tensor};

use super::config::SeConfig;

#[derive(Debug, Clone)]
pub struct SqueezeExcite<T: Scalar> {
    pub fc1: PointwiseConv<T>,
    pub fc2: PointwiseConv<T>,
}

#[derive(Debug, Clone)]
pub struct SeCache<T: Scalar> {
    input: Tensor<T>,
    pooled: Tensor<T>,
    hidden_pre: Tensor<T>,
    hidden: Tensor<T>,
    gate_pre: Tensor<T>,
    gate: Tensor<T>,
}

impl<T: Scalar> SeCache<T> {
    /// Gate values `s(n, c)` as an `(N, C, 1, 1)` tensor.
    pub fn gate(&self) -> &Tensor<T> {
        &self.gate
    }
}

impl<T: Scalar> SqueezeExcite<T> {
    pub fn new<R: Rng + ?Sized>(cfg: &SeConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            fc1: PointwiseConv::init(cfg.hidden(), cfg.channels, true, rng)?,
            fc2: PointwiseConv::init(cfg.channels, cfg.hidden(), true, rng)?,
        })
    }

    pub fn channels(&self) -> usize {
        self.fc1.in_channels()
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_cached(input)?.0)
    }

    pub fn forward_cached(&self, input: &Tensor<T>) -> Result<(Tensor<T>, SeCache<T>)> {
        let (_, c, h, w) = input.dims4()?;
        if c != self.channels() {
            return Err(Error::shape("squeeze_excite", &[0, self.channels(), h, w], input.shape()));
        }
        let pooled = global_avg_pool(input)?;
        let hidden_pre = self.fc1.forward(&pooled)?;
        let hidden = gelu(&hidden_pre);
        let gate_pre = self.fc2.forward(&hidden)?;
        let gate = sigmoid(&gate_pre);
        let out = rescale(input, &gate);
        let cache = SeCache {
            input: input.clone(),
            pooled,
            hidden_pre,
            hidden,
            gate_pre,
            gate,
        };
        Ok((out, cache))
    }

    pub fn backward(&mut self, cache: &SeCache<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let hw: usize = cache.input.shape()[2..].iter().product();
        let mut grad_input = rescale(grad_out, &cache.gate);
        let grad_gate = Tensor::from_vec(
            cache.gate.shape(),
            grad_out
                .data()
                .chunks(hw)
                .zip(cache.input.data().chunks(hw))
                .map(|(g, u)| g.iter().zip(u).fold(T::zero(), |a, (&g, &u)| a + g * u))
                .collect(),
        )?;
        let g = sigmoid_backward(&cache.gate_pre, &grad_gate);
        let g = self.fc2.backward(&cache.hidden, &g)?;
        let g = gelu_backward(&cache.hidden_pre, &g);
        let g = self.fc1.backward(&cache.pooled, &g)?;
        grad_input.add_assign(&global_avg_pool_backward(cache.input.shape(), &g)?)?;
        Ok(grad_input)
    }

    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v = named("fc1", self.fc1.params());
        v.extend(named("fc2", self.fc2.params()));
        v
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut v = named("fc1", self.fc1.params_mut());
        v.extend(named("fc2", self.fc2.params_mut()));
        v
    }
}

/// `out(n, c, ., .) = gate(n, c) * input(n, c, ., .)`.
fn rescale<T: Scalar>(input: &Tensor<T>, gate: &Tensor<T>) -> Tensor<T> {
    let hw: usize = input.shape()[2..].iter().product();
    let mut out = input.clone();
    for (plane, &s) in out.data_mut().chunks_mut(hw).zip(gate.data()) {
        plane.iter_mut().for_each(|v| *v = s * *v);
    }
    out
}
