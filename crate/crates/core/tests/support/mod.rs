//! Independent reference implementations and gradient-check adapters used by
//! the integration tests and the acceptance runner.
#![allow(dead_code)]

use dseno_core::dseno::{DsBlock, DsBlockConfig, SqueezeExcite};
use dseno_core::fno::{spectral_conv, spectral_conv_backward, SpectralWeights};
use dseno_core::nn::{
    conv2d_backward, conv2d_forward, gelu, gelu_backward, global_avg_pool, global_avg_pool_backward,
    pointwise_backward, pointwise_conv, sigmoid, sigmoid_backward, ConvKernel, DifferentiableOp, PaddingMode,
};
use dseno_core::{Result, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(shape: &[usize], rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn idx4(s: &[usize], n: usize, c: usize, y: usize, x: usize) -> usize {
    ((n * s[1] + c) * s[2] + y) * s[3] + x
}

fn wrap(v: isize, n: usize) -> usize {
    v.rem_euclid(n as isize) as usize
}

/// Literal dilated convolution `(f *_l k)(x) = sum_{s + l t = x} f(s) k(t)`
/// with `t` ranging over `[-r, r]` per axis. The layer stores a
/// cross-correlation kernel, so `k(t) = weight[r - t]`.
pub fn dilated_conv_reference(
    input: &Tensor<f64>,
    weight: &Tensor<f64>,
    bias: Option<&Tensor<f64>>,
    dilation: [usize; 2],
    mode: PaddingMode,
) -> Tensor<f64> {
    let s = input.shape();
    let ws = weight.shape();
    let (n, c_in, h, w) = (s[0], s[1], s[2], s[3]);
    let (c_out, kh, kw) = (ws[0], ws[2], ws[3]);
    let (rh, rw) = ((kh / 2) as isize, (kw / 2) as isize);
    let (lh, lw) = (dilation[0] as isize, dilation[1] as isize);
    let k = |o: usize, c: usize, ty: isize, tx: isize| {
        weight.data()[((o * c_in + c) * kh + (rh - ty) as usize) * kw + (rw - tx) as usize]
    };
    let mut out = Tensor::zeros(&[n, c_out, h, w]);
    let os = out.shape().to_vec();
    for b in 0..n {
        for o in 0..c_out {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bias.map_or(0.0, |b| b.data()[o]);
                    for c in 0..c_in {
                        for ty in -rh..=rh {
                            for tx in -rw..=rw {
                                let sy = y as isize - lh * ty;
                                let sx = x as isize - lw * tx;
                                let v = match mode {
                                    PaddingMode::Zero => {
                                        if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                            continue;
                                        }
                                        input.data()[idx4(s, b, c, sy as usize, sx as usize)]
                                    }
                                    PaddingMode::Circular => input.data()[idx4(s, b, c, wrap(sy, h), wrap(sx, w))],
                                };
                                acc += v * k(o, c, ty, tx);
                            }
                        }
                    }
                    out.data_mut()[idx4(&os, b, o, y, x)] = acc;
                }
            }
        }
    }
    out
}

/// Undilated convolution `(f * k)(x) = sum_{s + t = x} f(s) k(t)`, looping
/// over every source pixel `s` and keeping those whose offset lands in the
/// kernel support. Zero padding.
pub fn standard_conv_reference(input: &Tensor<f64>, weight: &Tensor<f64>, bias: Option<&Tensor<f64>>) -> Tensor<f64> {
    let s = input.shape();
    let ws = weight.shape();
    let (n, c_in, h, w) = (s[0], s[1], s[2], s[3]);
    let (c_out, kh, kw) = (ws[0], ws[2], ws[3]);
    let (rh, rw) = ((kh / 2) as isize, (kw / 2) as isize);
    let mut out = Tensor::zeros(&[n, c_out, h, w]);
    let os = out.shape().to_vec();
    for b in 0..n {
        for o in 0..c_out {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bias.map_or(0.0, |b| b.data()[o]);
                    for c in 0..c_in {
                        for sy in 0..h {
                            for sx in 0..w {
                                let ty = y as isize - sy as isize;
                                let tx = x as isize - sx as isize;
                                if ty.abs() > rh || tx.abs() > rw {
                                    continue;
                                }
                                let kv = weight.data()
                                    [((o * c_in + c) * kh + (rh - ty) as usize) * kw + (rw - tx) as usize];
                                acc += input.data()[idx4(s, b, c, sy, sx)] * kv;
                            }
                        }
                    }
                    out.data_mut()[idx4(&os, b, o, y, x)] = acc;
                }
            }
        }
    }
    out
}

/// Real spatial kernels `k[c][o]` (each `H x W`) whose spectrum agrees with
/// the half-spectrum multipliers `w` of a full-mode spectral layer, obtained
/// by a direct inverse DFT of the Hermitian extension of `w`.
pub fn spectral_kernels(weights: &Tensor<f64>, h: usize, w: usize) -> Vec<Vec<Vec<f64>>> {
    let s = weights.shape();
    let (c_in, c_out, m1, m2) = (s[0], s[1], s[2], s[3]);
    assert_eq!((m1, m2), (h, w / 2 + 1), "oracle needs all modes");
    let at = |c: usize, o: usize, p: usize, q: usize| {
        let i = (((c * c_out + o) * m1 + p) * m2 + q) * 2;
        (weights.data()[i], weights.data()[i + 1])
    };
    let tau = std::f64::consts::TAU;
    let mut out = vec![vec![vec![0.0; h * w]; c_out]; c_in];
    for c in 0..c_in {
        for o in 0..c_out {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for p in 0..h {
                        for q in 0..w {
                            let (re, im) = if q < m2 {
                                at(c, o, p, q)
                            } else {
                                let (re, im) = at(c, o, (h - p) % h, w - q);
                                (re, -im)
                            };
                            let phase = tau * ((p * y) as f64 / h as f64 + (q * x) as f64 / w as f64);
                            acc += re * phase.cos() - im * phase.sin();
                        }
                    }
                    out[c][o][y * w + x] = acc / (h * w) as f64;
                }
            }
        }
    }
    out
}

/// `out_o = sum_c x_c (*) k[c][o]` with periodic wrap-around.
pub fn circular_conv(input: &Tensor<f64>, kernels: &[Vec<Vec<f64>>]) -> Tensor<f64> {
    let s = input.shape();
    let (n, c_in, h, w) = (s[0], s[1], s[2], s[3]);
    let c_out = kernels[0].len();
    let mut out = Tensor::zeros(&[n, c_out, h, w]);
    let os = out.shape().to_vec();
    for b in 0..n {
        for o in 0..c_out {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for (c, kc) in kernels.iter().enumerate().take(c_in) {
                        for sy in 0..h {
                            for sx in 0..w {
                                let k = kc[o][((y + h - sy) % h) * w + (x + w - sx) % w];
                                acc += input.data()[idx4(s, b, c, sy, sx)] * k;
                            }
                        }
                    }
                    out.data_mut()[idx4(&os, b, o, y, x)] = acc;
                }
            }
        }
    }
    out
}

/// Direct DFT coefficient `sum_{y,x} f(y, x) e^{-2 pi i (p y / H + q x / W)}`.
pub fn dft_coefficient(plane: &[f64], h: usize, w: usize, p: usize, q: usize) -> (f64, f64) {
    let tau = std::f64::consts::TAU;
    let (mut re, mut im) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            let ph = tau * ((p * y) as f64 / h as f64 + (q * x) as f64 / w as f64);
            re += plane[y * w + x] * ph.cos();
            im -= plane[y * w + x] * ph.sin();
        }
    }
    (re, im)
}

fn erf_series(x: f64) -> f64 {
    // Maclaurin series; accurate to rounding for |x| < 3.
    let mut term = x;
    let mut sum = x;
    for n in 1..200 {
        term *= -x * x / n as f64;
        sum += term / (2 * n + 1) as f64;
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

/// Straight-line gate values `s(n, c)` of a squeeze-excitation unit.
pub fn se_gates(se: &SqueezeExcite<f64>, u: &Tensor<f64>) -> Vec<f64> {
    let s = u.shape();
    let (n, c, hw) = (s[0], s[1], s[2] * s[3]);
    let w1 = se.fc1.weight().data();
    let b1 = se.fc1.bias().unwrap().data();
    let w2 = se.fc2.weight().data();
    let b2 = se.fc2.bias().unwrap().data();
    let hidden = b1.len();
    let mut gates = Vec::with_capacity(n * c);
    for b in 0..n {
        let z: Vec<f64> = (0..c)
            .map(|ch| u.data()[(b * c + ch) * hw..(b * c + ch + 1) * hw].iter().sum::<f64>() / hw as f64)
            .collect();
        let zh: Vec<f64> = (0..hidden)
            .map(|j| {
                let a = b1[j] + (0..c).map(|ch| w1[j * c + ch] * z[ch]).sum::<f64>();
                0.5 * a * (1.0 + erf_series(a / std::f64::consts::SQRT_2))
            })
            .collect();
        for ch in 0..c {
            let e = b2[ch] + (0..hidden).map(|j| w2[ch * hidden + j] * zh[j]).sum::<f64>();
            gates.push(1.0 / (1.0 + (-e).exp()));
        }
    }
    gates
}

// ---- gradient-check adapters ----

/// Inputs: `[x, weight, bias?]`.
pub struct ConvOp {
    pub dilation: [usize; 2],
    pub mode: PaddingMode,
    pub bias: bool,
}

impl ConvOp {
    fn kernel(&self, inputs: &[Tensor<f64>]) -> Result<ConvKernel<f64>> {
        ConvKernel::new(inputs[1].clone(), self.bias.then(|| inputs[2].clone()), self.dilation, self.mode)
    }
}

impl DifferentiableOp for ConvOp {
    fn forward(&self, inputs: &[Tensor<f64>]) -> Result<Tensor<f64>> {
        conv2d_forward(&inputs[0], &self.kernel(inputs)?)
    }

    fn backward(&self, inputs: &[Tensor<f64>], g: &Tensor<f64>) -> Result<Vec<Tensor<f64>>> {
        let r = conv2d_backward(&inputs[0], &self.kernel(inputs)?, g)?;
        let mut v = vec![r.input, r.weight];
        v.extend(r.bias);
        Ok(v)
    }

    fn input_names(&self, count: usize) -> Vec<String> {
        ["input", "weight", "bias"].iter().take(count).map(|s| s.to_string()).collect()
    }
}

/// Inputs: `[x, weight (C_out, C_in), bias]`.
pub struct PointwiseOp;

impl DifferentiableOp for PointwiseOp {
    fn forward(&self, inputs: &[Tensor<f64>]) -> Result<Tensor<f64>> {
        pointwise_conv(&inputs[0], &inputs[1], Some(&inputs[2]))
    }

    fn backward(&self, inputs: &[Tensor<f64>], g: &Tensor<f64>) -> Result<Vec<Tensor<f64>>> {
        let r = pointwise_backward(&inputs[0], &inputs[1], true, g)?;
        Ok(vec![r.input, r.weight, r.bias.unwrap()])
    }
}

pub struct PoolOp;

impl DifferentiableOp for PoolOp {
    fn forward(&self, inputs: &[Tensor<f64>]) -> Result<Tensor<f64>> {
        global_avg_pool(&inputs[0])
    }

    fn backward(&self, inputs: &[Tensor<f64>], g: &Tensor<f64>) -> Result<Vec<Tensor<f64>>> {
        Ok(vec![global_avg_pool_backward(inputs[0].shape(), g)?])
    }
}

pub struct GeluOp;

impl DifferentiableOp for GeluOp {
    fn forward(&self, inputs: &[Tensor<f64>]) -> Result<Tensor<f64>> {
        Ok(gelu(&inputs[0]))
    }

    fn backward(&self, inputs: &[Tensor<f64>], g: &Tensor<f64>) -> Result<Vec<Tensor<f64>>> {
        Ok(vec![gelu_backward(&inputs[0], g)])
    }
}

pub struct SigmoidOp;

impl DifferentiableOp for SigmoidOp {
    fn forward(&self, inputs: &[Tensor<f64>]) -> Result<Tensor<f64>> {
        Ok(sigmoid(&inputs[0]))
    }

    fn backward(&self, inputs: &[Tensor<f64>], g: &Tensor<f64>) -> Result<Vec<Tensor<f64>>> {
        Ok(vec![sigmoid_backward(&inputs[0], g)])
    }
}

/// Inputs: `[x, spectral weights]`.
pub struct SpectralOp;

impl DifferentiableOp for SpectralOp {
    fn forward(&self, inputs: &[Tensor<f64>]) -> Result<Tensor<f64>> {
        spectral_conv(&inputs[0], &SpectralWeights::new(inputs[1].clone())?)
    }

    fn backward(&self, inputs: &[Tensor<f64>], g: &Tensor<f64>) -> Result<Vec<Tensor<f64>>> {
        let (dx, dw) = spectral_conv_backward(&inputs[0], &SpectralWeights::new(inputs[1].clone())?, g)?;
        Ok(vec![dx, dw])
    }

    fn input_names(&self, _: usize) -> Vec<String> {
        vec!["input".into(), "spectral.weight".into()]
    }
}

/// A layer with named parameters, checked with respect to its input and
/// every parameter.
pub trait Layer: Clone {
    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>>;
    /// Returns the input gradient; parameter gradients land in `params`.
    fn backward(&mut self, x: &Tensor<f64>, g: &Tensor<f64>) -> Result<Tensor<f64>>;
    fn params(&self) -> Vec<(String, &Tensor<f64>)>;
    fn params_mut(&mut self) -> Vec<(String, &mut Tensor<f64>)>;
}

impl Layer for SqueezeExcite<f64> {
    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        SqueezeExcite::forward(self, x)
    }

    fn backward(&mut self, x: &Tensor<f64>, g: &Tensor<f64>) -> Result<Tensor<f64>> {
        let (_, cache) = self.forward_cached(x)?;
        SqueezeExcite::backward(self, &cache, g)
    }

    fn params(&self) -> Vec<(String, &Tensor<f64>)> {
        SqueezeExcite::params(self)
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor<f64>)> {
        SqueezeExcite::params_mut(self)
    }
}

impl Layer for DsBlock<f64> {
    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        DsBlock::forward(self, x)
    }

    fn backward(&mut self, x: &Tensor<f64>, g: &Tensor<f64>) -> Result<Tensor<f64>> {
        let (_, cache) = self.forward_cached(x)?;
        DsBlock::backward(self, &cache, g)
    }

    fn params(&self) -> Vec<(String, &Tensor<f64>)> {
        DsBlock::params(self)
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor<f64>)> {
        DsBlock::params_mut(self)
    }
}

pub struct LayerOp<L: Layer>(pub L);

impl<L: Layer> LayerOp<L> {
    pub fn inputs(&self, x: Tensor<f64>) -> Vec<Tensor<f64>> {
        let mut v = vec![x];
        v.extend(self.0.params().into_iter().map(|(_, p)| p.clone()));
        v
    }

    fn with(&self, inputs: &[Tensor<f64>]) -> L {
        let mut l = self.0.clone();
        for ((_, p), v) in l.params_mut().into_iter().zip(&inputs[1..]) {
            p.data_mut().copy_from_slice(v.data());
            p.clear_grad();
        }
        l
    }
}

impl<L: Layer> DifferentiableOp for LayerOp<L> {
    fn forward(&self, inputs: &[Tensor<f64>]) -> Result<Tensor<f64>> {
        self.with(inputs).forward(&inputs[0])
    }

    fn backward(&self, inputs: &[Tensor<f64>], g: &Tensor<f64>) -> Result<Vec<Tensor<f64>>> {
        let mut l = self.with(inputs);
        let dx = l.backward(&inputs[0], g)?;
        let mut out = vec![dx];
        for (_, p) in l.params() {
            out.push(Tensor::from_vec(p.shape(), p.grad().expect("parameter gradient").to_vec())?);
        }
        Ok(out)
    }

    fn input_names(&self, count: usize) -> Vec<String> {
        let mut v = vec!["input".to_string()];
        v.extend(self.0.params().into_iter().map(|(n, _)| n));
        v.truncate(count);
        v
    }
}

pub fn block(cfg: &DsBlockConfig, seed: u64) -> DsBlock<f64> {
    DsBlock::new(cfg, &mut rng(seed)).unwrap()
}
