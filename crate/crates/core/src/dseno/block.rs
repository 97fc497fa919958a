//! One DS block: dilated conv pair, optional channel mixer, residual add and
//! GELU.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{conv2d_backward, conv2d_forward, gelu, gelu_backward, named, ConvKernel, PointwiseConv};
use crate::tensor::{Scalar, Tensor};

use super::config::{DsBlockConfig, Mixer};
use super::se::{SeCache, SqueezeExcite};

#[derive(Debug, Clone)]
pub enum BlockMixer<T: Scalar> {
    Se(SqueezeExcite<T>),
    Plain,
    ParamMatched(PointwiseConv<T>, PointwiseConv<T>),
}

#[derive(Debug, Clone)]
pub struct DsBlock<T: Scalar> {
    pub conv1: ConvKernel<T>,
    pub conv2: ConvKernel<T>,
    pub mixer: BlockMixer<T>,
}

#[derive(Debug, Clone)]
enum MixerCache<T: Scalar> {
    Se(SeCache<T>),
    Plain,
    ParamMatched { input: Tensor<T>, mid_pre: Tensor<T>, mid: Tensor<T> },
}

#[derive(Debug, Clone)]
pub struct BlockCache<T: Scalar> {
    input: Tensor<T>,
    conv1_out: Tensor<T>,
    act1: Tensor<T>,
    mixer: MixerCache<T>,
    residual: Tensor<T>,
}

impl<T: Scalar> DsBlock<T> {
    pub fn new<R: Rng + ?Sized>(cfg: &DsBlockConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.width;
        let conv = |spec: super::config::ConvSpec, rng: &mut R| {
            ConvKernel::init(c, c, [spec.kernel; 2], spec.bias, cfg.dilation, cfg.padding, rng)
        };
        let conv1 = conv(cfg.conv1, rng)?;
        let conv2 = conv(cfg.conv2, rng)?;
        let mixer = match cfg.mixer {
            Mixer::Se(se) => BlockMixer::Se(SqueezeExcite::new(&se, rng)?),
            Mixer::Plain => BlockMixer::Plain,
            Mixer::ParamMatched => BlockMixer::ParamMatched(
                PointwiseConv::init(c, c, true, rng)?,
                PointwiseConv::init(c, c, true, rng)?,
            ),
        };
        Ok(Self { conv1, conv2, mixer })
    }

    pub fn width(&self) -> usize {
        self.conv1.in_channels()
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_cached(input)?.0)
    }

    pub fn forward_cached(&self, input: &Tensor<T>) -> Result<(Tensor<T>, BlockCache<T>)> {
        let (_, c, h, w) = input.dims4()?;
        if c != self.width() {
            return Err(Error::shape("ds_block", &[0, self.width(), h, w], input.shape()));
        }
        let conv1_out = conv2d_forward(input, &self.conv1)?;
        let act1 = gelu(&conv1_out);
        let h = conv2d_forward(&act1, &self.conv2)?;
        let (y, mixer) = match &self.mixer {
            BlockMixer::Se(se) => {
                let (y, cache) = se.forward_cached(&h)?;
                (y, MixerCache::Se(cache))
            }
            BlockMixer::Plain => (h, MixerCache::Plain),
            BlockMixer::ParamMatched(p1, p2) => {
                let mid_pre = p1.forward(&h)?;
                let mid = gelu(&mid_pre);
                let y = p2.forward(&mid)?;
                (y, MixerCache::ParamMatched { input: h, mid_pre, mid })
            }
        };
        let residual = input.add(&y)?;
        let out = gelu(&residual);
        let cache = BlockCache {
            input: input.clone(),
            conv1_out,
            act1,
            mixer,
            residual,
        };
        Ok((out, cache))
    }

    pub fn backward(&mut self, cache: &BlockCache<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let dr = gelu_backward(&cache.residual, grad_out);
        let dh = match (&mut self.mixer, &cache.mixer) {
            (BlockMixer::Se(se), MixerCache::Se(c)) => se.backward(c, &dr)?,
            (BlockMixer::Plain, MixerCache::Plain) => dr.clone(),
            (BlockMixer::ParamMatched(p1, p2), MixerCache::ParamMatched { input, mid_pre, mid }) => {
                let g = p2.backward(mid, &dr)?;
                let g = gelu_backward(mid_pre, &g);
                p1.backward(input, &g)?
            }
            _ => return Err(Error::Config("block cache does not match block mixer".into())),
        };
        let g2 = conv2d_backward(&cache.act1, &self.conv2, &dh)?;
        self.conv2.accumulate(&g2);
        let da1 = gelu_backward(&cache.conv1_out, &g2.input);
        let g1 = conv2d_backward(&cache.input, &self.conv1, &da1)?;
        self.conv1.accumulate(&g1);
        let mut dx = g1.input;
        dx.add_assign(&dr)?;
        Ok(dx)
    }

    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v = named("conv1", conv_params(&self.conv1));
        v.extend(named("conv2", conv_params(&self.conv2)));
        match &self.mixer {
            BlockMixer::Se(se) => v.extend(se.params().into_iter().map(|(n, p)| (format!("se.{n}"), p))),
            BlockMixer::Plain => {}
            BlockMixer::ParamMatched(p1, p2) => {
                v.extend(named("pm1", p1.params()));
                v.extend(named("pm2", p2.params()));
            }
        }
        v
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut v = named("conv1", conv_params_mut(&mut self.conv1));
        v.extend(named("conv2", conv_params_mut(&mut self.conv2)));
        match &mut self.mixer {
            BlockMixer::Se(se) => v.extend(se.params_mut().into_iter().map(|(n, p)| (format!("se.{n}"), p))),
            BlockMixer::Plain => {}
            BlockMixer::ParamMatched(p1, p2) => {
                v.extend(named("pm1", p1.params_mut()));
                v.extend(named("pm2", p2.params_mut()));
            }
        }
        v
    }
}

fn conv_params<T: Scalar>(k: &ConvKernel<T>) -> Vec<&Tensor<T>> {
    std::iter::once(k.weight()).chain(k.bias()).collect()
}

fn conv_params_mut<T: Scalar>(k: &mut ConvKernel<T>) -> Vec<&mut Tensor<T>> {
    let (w, b) = k.params_mut();
    std::iter::once(w).chain(b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dseno::config::{ConvSpec, SeConfig};
    use crate::nn::PaddingMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(mixer: Mixer) -> DsBlockConfig {
        DsBlockConfig {
            width: 3,
            dilation: [2, 1],
            conv1: ConvSpec { kernel: 3, bias: true },
            conv2: ConvSpec { kernel: 5, bias: false },
            mixer,
            padding: PaddingMode::Zero,
        }
    }

    #[test]
    fn zero_input_and_biases_give_zero() {
        for mixer in [Mixer::Plain, Mixer::ParamMatched] {
            let mut b = DsBlock::<f64>::new(&cfg(mixer), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
            for (name, p) in b.params_mut() {
                if name.ends_with("bias") {
                    p.data_mut().iter_mut().for_each(|v| *v = 0.0);
                }
            }
            let y = b.forward(&Tensor::zeros(&[1, 3, 6, 6])).unwrap();
            assert!(y.data().iter().all(|&v| v == 0.0));
        }
        let se = Mixer::Se(SeConfig { channels: 3, reduction: 1 });
        let b = DsBlock::<f64>::new(&cfg(se), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(b.params().iter().map(|(_, p)| p.len()).sum::<usize>(), cfg(se).parameter_count());
    }
}
