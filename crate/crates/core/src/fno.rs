//! FNO+ baseline: mode-truncated spectral convolution and the
//! lift / Fourier-layer / projection model built from it.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{Fft2Plan, C};
use crate::nn::{gelu, gelu_backward, named, PointwiseConv};
use crate::tensor::{Scalar, Tensor};

/// Complex multipliers for the retained `(m1, m2)` corner of the half
/// spectrum, stored as a `(C_in, C_out, m1, m2, 2)` tensor of (re, im) pairs.
#[derive(Debug, Clone)]
pub struct SpectralWeights<T: Scalar> {
    weights: Tensor<T>,
}

impl<T: Scalar> SpectralWeights<T> {
    pub fn new(weights: Tensor<T>) -> Result<Self> {
        match weights.shape() {
            &[ci, co, m1, m2, 2] if ci > 0 && co > 0 && m1 > 0 && m2 > 0 => Ok(Self { weights }),
            other => Err(Error::shape("SpectralWeights::new", &[0, 0, 0, 0, 2], other)),
        }
    }

    /// Real and imaginary parts drawn from `scale * U[0, 1)` with
    /// `scale = 1 / (C_in C_out)`.
    pub fn init<R: Rng + ?Sized>(c_in: usize, c_out: usize, modes: [usize; 2], rng: &mut R) -> Result<Self> {
        let scale = 1.0 / (c_in * c_out) as f64;
        let w = Tensor::from_fn(&[c_in, c_out, modes[0], modes[1], 2], |_| {
            T::of(scale * rng.random::<f64>())
        });
        Self::new(w)
    }

    /// Every multiplier set to the same complex value.
    pub fn constant(c_in: usize, c_out: usize, modes: [usize; 2], value: C<T>) -> Result<Self> {
        let w = Tensor::from_fn(&[c_in, c_out, modes[0], modes[1], 2], |i| {
            if i % 2 == 0 {
                value.re
            } else {
                value.im
            }
        });
        Self::new(w)
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn modes(&self) -> [usize; 2] {
        [self.weights.shape()[2], self.weights.shape()[3]]
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.weights
    }

    pub fn tensor_mut(&mut self) -> &mut Tensor<T> {
        &mut self.weights
    }

    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    fn at(&self, c: usize, o: usize, p: usize, q: usize) -> C<T> {
        let [m1, m2] = self.modes();
        let i = (((c * self.out_channels() + o) * m1 + p) * m2 + q) * 2;
        let d = self.weights.data();
        C::new(d[i], d[i + 1])
    }

    fn check_grid(&self, op: &'static str, input: &Tensor<T>) -> Result<(usize, usize, usize)> {
        let (n, c, h, w) = input.dims4()?;
        if c != self.in_channels() {
            return Err(Error::shape(op, &[n, self.in_channels(), h, w], input.shape()));
        }
        let [m1, m2] = self.modes();
        let wh = w / 2 + 1;
        if m1 > h || m2 > wh {
            return Err(Error::ModesExceedGrid { m1, m2, h, w, wh });
        }
        Ok((n, h, w))
    }
}

fn zero<T: Scalar>() -> C<T> {
    C::new(T::zero(), T::zero())
}

fn spectra<T: Scalar>(plan: &Fft2Plan<T>, planes: &[T], count: usize) -> Vec<C<T>> {
    let (hw, hwh) = (plan.height() * plan.width(), plan.height() * plan.half_width());
    let mut out = vec![zero(); count * hwh];
    for (o, x) in out.chunks_mut(hwh).zip(planes.chunks(hw)) {
        plan.forward_plane(x, o);
    }
    out
}

/// `irfft2(G)` where `G(o, p, q) = sum_c rfft2(x)(c, p, q) w(c, o, p, q)` on
/// the retained modes and zero elsewhere.
pub fn spectral_conv<T: Scalar>(input: &Tensor<T>, weights: &SpectralWeights<T>) -> Result<Tensor<T>> {
    let (n, h, w) = weights.check_grid("spectral_conv", input)?;
    let (c_in, c_out) = (weights.in_channels(), weights.out_channels());
    let [m1, m2] = weights.modes();
    let plan = Fft2Plan::new(h, w)?;
    let wh = plan.half_width();
    let mut out = Tensor::zeros(&[n, c_out, h, w]);
    out.data_mut()
        .par_chunks_mut(c_out * h * w)
        .zip(input.data().par_chunks(c_in * h * w))
        .for_each(|(y, x)| {
            let f = spectra(&plan, x, c_in);
            let mut g = vec![zero(); h * wh];
            for (o, y_o) in y.chunks_mut(h * w).enumerate() {
                g.iter_mut().for_each(|v| *v = zero());
                for c in 0..c_in {
                    let f_c = &f[c * h * wh..(c + 1) * h * wh];
                    for p in 0..m1 {
                        for q in 0..m2 {
                            g[p * wh + q] = g[p * wh + q] + f_c[p * wh + q] * weights.at(c, o, p, q);
                        }
                    }
                }
                plan.inverse_plane(&g, y_o);
            }
        });
    Ok(out)
}

/// Gradients of [`spectral_conv`] with respect to its input and weights.
pub fn spectral_conv_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &SpectralWeights<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (n, h, w) = weights.check_grid("spectral_conv_backward", input)?;
    let (c_in, c_out) = (weights.in_channels(), weights.out_channels());
    if grad_out.shape() != [n, c_out, h, w] {
        return Err(Error::shape("spectral_conv_backward", &[n, c_out, h, w], grad_out.shape()));
    }
    let [m1, m2] = weights.modes();
    let plan = Fft2Plan::new(h, w)?;
    let (wh, hw) = (plan.half_width(), h * w);
    let mut grad_input = Tensor::zeros(input.shape());
    let partials: Vec<Vec<T>> = grad_input
        .data_mut()
        .par_chunks_mut(c_in * hw)
        .zip(input.data().par_chunks(c_in * hw))
        .zip(grad_out.data().par_chunks(c_out * hw))
        .map(|((dx, x), dy)| {
            let f = spectra(&plan, x, c_in);
            let mut dg = vec![zero(); c_out * h * wh];
            for (o, dy_o) in dy.chunks(hw).enumerate() {
                plan.inverse_adjoint_plane(dy_o, &mut dg[o * h * wh..(o + 1) * h * wh]);
            }
            let mut dw = vec![T::zero(); weights.param_count()];
            let mut df = vec![zero(); h * wh];
            for (c, dx_c) in dx.chunks_mut(hw).enumerate() {
                df.iter_mut().for_each(|v| *v = zero());
                for o in 0..c_out {
                    for p in 0..m1 {
                        for q in 0..m2 {
                            let k = p * wh + q;
                            let g = dg[o * h * wh + k];
                            let gw = f[c * h * wh + k].conj() * g;
                            let i = (((c * c_out + o) * m1 + p) * m2 + q) * 2;
                            dw[i] = gw.re;
                            dw[i + 1] = gw.im;
                            df[k] = df[k] + weights.at(c, o, p, q).conj() * g;
                        }
                    }
                }
                plan.forward_adjoint_plane(&df, dx_c);
            }
            dw
        })
        .collect();
    let mut grad_w = Tensor::zeros(weights.tensor().shape());
    for dw in partials {
        for (a, b) in grad_w.data_mut().iter_mut().zip(dw) {
            *a = *a + b;
        }
    }
    Ok((grad_input, grad_w))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FnoPlusConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub width: usize,
    pub n_layers: usize,
    pub modes: [usize; 2],
    pub proj_hidden: usize,
}

impl FnoPlusConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("in_channels", self.in_channels),
            ("out_channels", self.out_channels),
            ("width", self.width),
            ("layers", self.n_layers),
            ("modes", self.modes[0].min(self.modes[1])),
            ("proj_hidden", self.proj_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("FNO+ {name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        let (ci, c, co, hp) = (self.in_channels, self.width, self.out_channels, self.proj_hidden);
        let layer = 2 * c * c * self.modes[0] * self.modes[1] + c * c + c;
        (ci * c + c) + self.n_layers * layer + (c * hp + hp) + (hp * co + co)
    }
}

#[derive(Debug, Clone)]
pub struct FourierLayer<T: Scalar> {
    pub spectral: SpectralWeights<T>,
    pub pointwise: PointwiseConv<T>,
}

#[derive(Debug, Clone)]
pub struct FnoPlus<T: Scalar> {
    config: FnoPlusConfig,
    pub lift: PointwiseConv<T>,
    pub layers: Vec<FourierLayer<T>>,
    pub head1: PointwiseConv<T>,
    pub head2: PointwiseConv<T>,
}

/// Activations kept by [`FnoPlus::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct FnoCache<T: Scalar> {
    input: Tensor<T>,
    /// Input of each Fourier layer, followed by the input of the head.
    states: Vec<Tensor<T>>,
    /// Pre-activation of each Fourier layer.
    pre: Vec<Tensor<T>>,
    head_pre: Tensor<T>,
    head_hidden: Tensor<T>,
}

impl<T: Scalar> FnoPlus<T> {
    pub fn new<R: Rng + ?Sized>(config: &FnoPlusConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let c = config.width;
        let lift = PointwiseConv::init(c, config.in_channels, true, rng)?;
        let layers = (0..config.n_layers)
            .map(|_| {
                Ok(FourierLayer {
                    spectral: SpectralWeights::init(c, c, config.modes, rng)?,
                    pointwise: PointwiseConv::init(c, c, true, rng)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let head1 = PointwiseConv::init(config.proj_hidden, c, true, rng)?;
        let head2 = PointwiseConv::init(config.out_channels, config.proj_hidden, true, rng)?;
        Ok(Self {
            config: config.clone(),
            lift,
            layers,
            head1,
            head2,
        })
    }

    pub fn config(&self) -> &FnoPlusConfig {
        &self.config
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_cached(input)?.0)
    }

    pub fn forward_cached(&self, input: &Tensor<T>) -> Result<(Tensor<T>, FnoCache<T>)> {
        let mut x = self.lift.forward(input)?;
        let last = self.layers.len() - 1;
        let mut states = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut a = spectral_conv(&x, &layer.spectral)?;
            a.add_assign(&layer.pointwise.forward(&x)?)?;
            let next = if i == last { a.clone() } else { gelu(&a) };
            states.push(x);
            pre.push(a);
            x = next;
        }
        let head_pre = self.head1.forward(&x)?;
        let head_hidden = gelu(&head_pre);
        let out = self.head2.forward(&head_hidden)?;
        states.push(x);
        let cache = FnoCache {
            input: input.clone(),
            states,
            pre,
            head_pre,
            head_hidden,
        };
        Ok((out, cache))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &FnoCache<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let n = self.layers.len();
        let g = self.head2.backward(&cache.head_hidden, grad_out)?;
        let g = gelu_backward(&cache.head_pre, &g);
        let mut g = self.head1.backward(&cache.states[n], &g)?;
        for i in (0..n).rev() {
            let da = if i == n - 1 { g } else { gelu_backward(&cache.pre[i], &g) };
            let x = &cache.states[i];
            let layer = &mut self.layers[i];
            let (mut dx, dw) = spectral_conv_backward(x, &layer.spectral, &da)?;
            layer.spectral.tensor_mut().accumulate_grad(dw.data());
            dx.add_assign(&layer.pointwise.backward(x, &da)?)?;
            g = dx;
        }
        self.lift.backward(&cache.input, &g)
    }

    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = named("lift", self.lift.params());
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layers.{i}.spectral.weight"), l.spectral.tensor()));
            out.extend(named(&format!("layers.{i}.pointwise"), l.pointwise.params()));
        }
        out.extend(named("head.fc1", self.head1.params()));
        out.extend(named("head.fc2", self.head2.params()));
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = named("lift", self.lift.params_mut());
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("layers.{i}.spectral.weight"), l.spectral.tensor_mut()));
            out.extend(named(&format!("layers.{i}.pointwise"), l.pointwise.params_mut()));
        }
        out.extend(named("head.fc1", self.head1.params_mut()));
        out.extend(named("head.fc2", self.head2.params_mut()));
        out
    }
}
