use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{gelu, gelu_backward, named, PointwiseConv};
use crate::tensor::{Scalar, Tensor};

use super::block::{BlockCache, DsBlock};
use super::config::ModelConfig;

/// Lift, a stack of DS blocks, and a two-layer pointwise projection head.
#[derive(Debug, Clone)]
pub struct Dseno<T: Scalar> {
    config: ModelConfig,
    pub lift: PointwiseConv<T>,
    pub blocks: Vec<DsBlock<T>>,
    pub head1: PointwiseConv<T>,
    pub head2: PointwiseConv<T>,
}

#[derive(Debug, Clone)]
pub struct DsenoCache<T: Scalar> {
    input: Tensor<T>,
    blocks: Vec<BlockCache<T>>,
    latent: Tensor<T>,
    head_pre: Tensor<T>,
    head_hidden: Tensor<T>,
}

impl<T: Scalar> Dseno<T> {
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let c = config.width;
        let lift = PointwiseConv::init(c, config.in_channels, true, rng)?;
        let blocks = config
            .blocks
            .iter()
            .map(|b| DsBlock::new(b, rng))
            .collect::<Result<Vec<_>>>()?;
        let head1 = PointwiseConv::init(config.proj_hidden, c, true, rng)?;
        let head2 = PointwiseConv::init(config.out_channels, config.proj_hidden, true, rng)?;
        Ok(Self {
            config: config.clone(),
            lift,
            blocks,
            head1,
            head2,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let mut x = self.lift.forward(input)?;
        for b in &self.blocks {
            x = b.forward(&x)?;
        }
        self.head2.forward(&gelu(&self.head1.forward(&x)?))
    }

    pub fn forward_cached(&self, input: &Tensor<T>) -> Result<(Tensor<T>, DsenoCache<T>)> {
        self.check_input(input)?;
        let mut x = self.lift.forward(input)?;
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward_cached(&x)?;
            caches.push(c);
            x = y;
        }
        let head_pre = self.head1.forward(&x)?;
        let head_hidden = gelu(&head_pre);
        let out = self.head2.forward(&head_hidden)?;
        let cache = DsenoCache {
            input: input.clone(),
            blocks: caches,
            latent: x,
            head_pre,
            head_hidden,
        };
        Ok((out, cache))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &DsenoCache<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.head2.backward(&cache.head_hidden, grad_out)?;
        let g = gelu_backward(&cache.head_pre, &g);
        let mut g = self.head1.backward(&cache.latent, &g)?;
        for (b, c) in self.blocks.iter_mut().zip(&cache.blocks).rev() {
            g = b.backward(c, &g)?;
        }
        self.lift.backward(&cache.input, &g)
    }

    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = named("lift", self.lift.params());
        for (i, b) in self.blocks.iter().enumerate() {
            out.extend(b.params().into_iter().map(|(n, p)| (format!("blocks.{i}.{n}"), p)));
        }
        out.extend(named("head.fc1", self.head1.params()));
        out.extend(named("head.fc2", self.head2.params()));
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = named("lift", self.lift.params_mut());
        for (i, b) in self.blocks.iter_mut().enumerate() {
            out.extend(b.params_mut().into_iter().map(|(n, p)| (format!("blocks.{i}.{n}"), p)));
        }
        out.extend(named("head.fc1", self.head1.params_mut()));
        out.extend(named("head.fc2", self.head2.params_mut()));
        out
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        let (n, c, h, w) = input.dims4()?;
        if c != self.config.in_channels {
            return Err(Error::shape("dseno input", &[n, self.config.in_channels, h, w], input.shape()));
        }
        if h == 0 || w == 0 {
            return Err(Error::EmptySpatial { h, w });
        }
        Ok(())
    }
}
