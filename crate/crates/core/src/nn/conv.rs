//! Resolution-preserving dilated 2-D convolution and its pointwise special case.
//!
//! Both forward and backward lower the convolution to a GEMM over an
//! im2col buffer. Taps of a `kh x kw` kernel at dilation `(dh, dw)` are read
//! at offsets `dh * (i - (kh - 1) / 2)` rows and `dw * (j - (kw - 1) / 2)`
//! columns from the output pixel; out-of-range taps read zero or wrap,
//! depending on [`PaddingMode`]. Batches are processed in parallel, with
//! parameter-gradient reductions always summed in sample order so results do
//! not depend on the thread count.

use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{matmul, matmul_ld, Mat, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PaddingMode {
    #[default]
    Zero,
    Circular,
}

impl PaddingMode {
    pub fn name(self) -> &'static str {
        match self {
            PaddingMode::Zero => "zero",
            PaddingMode::Circular => "circular",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "zero" => Some(PaddingMode::Zero),
            "circular" => Some(PaddingMode::Circular),
            _ => None,
        }
    }
}

/// Gradients returned by the convolution backward passes.
#[derive(Debug, Clone)]
pub struct ConvGrads<T: Scalar> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

/// Convolution weights plus the geometry they are applied with.
///
/// `dilation[0]` spaces taps along rows (H), `dilation[1]` along columns (W).
#[derive(Debug, Clone)]
pub struct ConvKernel<T: Scalar> {
    weight: Tensor<T>,
    bias: Option<Tensor<T>>,
    dilation: [usize; 2],
    padding: [usize; 2],
    mode: PaddingMode,
}

impl<T: Scalar> ConvKernel<T> {
    /// `weight` is `(C_out, C_in, kh, kw)`; `bias`, when present, `(C_out)`.
    pub fn new(
        weight: Tensor<T>,
        bias: Option<Tensor<T>>,
        dilation: [usize; 2],
        mode: PaddingMode,
    ) -> Result<Self> {
        let [c_out, c_in, kh, kw] = match weight.shape() {
            &[a, b, c, d] => [a, b, c, d],
            other => return Err(Error::shape("ConvKernel::new", &[0, 0, 0, 0], other)),
        };
        if c_out == 0 || c_in == 0 {
            return Err(Error::Config(format!(
                "convolution channel counts must be positive, got {c_out}x{c_in}"
            )));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::EvenKernel { kh, kw });
        }
        if dilation[0] == 0 || dilation[1] == 0 {
            return Err(Error::NonPositiveDilation(dilation[0], dilation[1]));
        }
        if let Some(b) = &bias {
            if b.shape() != [c_out] {
                return Err(Error::shape("ConvKernel::new bias", &[c_out], b.shape()));
            }
        }
        Ok(Self {
            weight,
            bias,
            dilation,
            padding: [dilation[0] * (kh - 1) / 2, dilation[1] * (kw - 1) / 2],
            mode,
        })
    }

    /// Uniform init in `±sqrt(1 / fan_in)` for weights and bias alike.
    #[allow(clippy::too_many_arguments)]
    pub fn init<R: Rng + ?Sized>(
        c_out: usize,
        c_in: usize,
        kernel: [usize; 2],
        bias: bool,
        dilation: [usize; 2],
        mode: PaddingMode,
        rng: &mut R,
    ) -> Result<Self> {
        let fan_in = (c_in * kernel[0] * kernel[1]).max(1);
        let bound = (1.0 / fan_in as f64).sqrt();
        let weight = uniform(&[c_out, c_in, kernel[0], kernel[1]], bound, rng);
        let bias = bias.then(|| uniform(&[c_out], bound, rng));
        Self::new(weight, bias, dilation, mode)
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel_size(&self) -> [usize; 2] {
        [self.weight.shape()[2], self.weight.shape()[3]]
    }

    pub fn dilation(&self) -> [usize; 2] {
        self.dilation
    }

    /// Resolution-preserving padding `dilation * (k - 1) / 2` per axis.
    pub fn padding(&self) -> [usize; 2] {
        self.padding
    }

    pub fn mode(&self) -> PaddingMode {
        self.mode
    }

    pub fn weight(&self) -> &Tensor<T> {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut Tensor<T> {
        &mut self.weight
    }

    pub fn bias(&self) -> Option<&Tensor<T>> {
        self.bias.as_ref()
    }

    pub fn bias_mut(&mut self) -> Option<&mut Tensor<T>> {
        self.bias.as_mut()
    }

    pub fn params_mut(&mut self) -> (&mut Tensor<T>, Option<&mut Tensor<T>>) {
        (&mut self.weight, self.bias.as_mut())
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.as_ref().map_or(0, |b| b.len())
    }

    /// Accumulate backward results into the parameter gradient buffers.
    pub fn accumulate(&mut self, grads: &ConvGrads<T>) {
        self.weight.accumulate_grad(grads.weight.data());
        if let (Some(b), Some(g)) = (&mut self.bias, &grads.bias) {
            b.accumulate_grad(g.data());
        }
    }

    fn geometry(&self, h: usize, w: usize) -> Geometry {
        let [kh, kw] = self.kernel_size();
        Geometry {
            c_in: self.in_channels(),
            h,
            w,
            kh,
            kw,
            dh: self.dilation[0],
            dw: self.dilation[1],
            mode: self.mode,
        }
    }
}

pub(crate) fn uniform<T: Scalar, R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor<T> {
    Tensor::from_fn(shape, |_| T::of(rng.random_range(-bound..=bound)))
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    c_in: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    dh: usize,
    dw: usize,
    mode: PaddingMode,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn offsets(&self, i: usize, j: usize) -> (isize, isize) {
        let oy = self.dh as isize * (i as isize - (self.kh as isize - 1) / 2);
        let ox = self.dw as isize * (j as isize - (self.kw as isize - 1) / 2);
        (oy, ox)
    }

    /// Columns `x` whose tap `x + ox` lands inside `[0, w)`.
    fn valid_cols(&self, ox: isize) -> (usize, usize) {
        let w = self.w as isize;
        let lo = (-ox).clamp(0, w);
        let hi = (w - ox).clamp(0, w);
        (lo as usize, hi.max(lo) as usize)
    }
}

/// Output rows per im2col band; keeps the column buffer near 32K elements.
fn band_rows(g: &Geometry) -> usize {
    (BAND_ELEMS / (g.rows() * g.w).max(1)).clamp(1, g.h.max(1))
}

const BAND_ELEMS: usize = 1 << 15;

/// Columns for output rows `ys`: `cols` is `rows() x (ys.len() * w)`.
fn im2col<T: Scalar>(g: &Geometry, input: &[T], ys: Range<usize>, cols: &mut [T]) {
    let hw = g.h * g.w;
    let bw = ys.len() * g.w;
    debug_assert_eq!(input.len(), g.c_in * hw);
    debug_assert_eq!(cols.len(), g.rows() * bw);
    for c in 0..g.c_in {
        let plane = &input[c * hw..(c + 1) * hw];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = (c * g.kh + i) * g.kw + j;
                let dst = &mut cols[row * bw..(row + 1) * bw];
                let (oy, ox) = g.offsets(i, j);
                for (r, y) in ys.clone().enumerate() {
                    let out_row = &mut dst[r * g.w..(r + 1) * g.w];
                    match g.mode {
                        PaddingMode::Zero => {
                            let (lo, hi) = g.valid_cols(ox);
                            let sy = y as isize + oy;
                            if sy < 0 || sy >= g.h as isize || lo >= hi {
                                out_row.iter_mut().for_each(|v| *v = T::zero());
                                continue;
                            }
                            let src_row = &plane[sy as usize * g.w..(sy as usize + 1) * g.w];
                            out_row[..lo].iter_mut().for_each(|v| *v = T::zero());
                            out_row[hi..].iter_mut().for_each(|v| *v = T::zero());
                            let s0 = (lo as isize + ox) as usize;
                            out_row[lo..hi].copy_from_slice(&src_row[s0..s0 + (hi - lo)]);
                        }
                        PaddingMode::Circular => {
                            let sy = (y as isize + oy).rem_euclid(g.h as isize) as usize;
                            let src_row = &plane[sy * g.w..(sy + 1) * g.w];
                            for (x, v) in out_row.iter_mut().enumerate() {
                                *v = src_row[(x as isize + ox).rem_euclid(g.w as isize) as usize];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add column entries back onto the image.
fn col2im<T: Scalar>(g: &Geometry, cols: &[T], ys: Range<usize>, out: &mut [T]) {
    let hw = g.h * g.w;
    let bw = ys.len() * g.w;
    for c in 0..g.c_in {
        let plane = &mut out[c * hw..(c + 1) * hw];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = (c * g.kh + i) * g.kw + j;
                let src = &cols[row * bw..(row + 1) * bw];
                let (oy, ox) = g.offsets(i, j);
                for (r, y) in ys.clone().enumerate() {
                    let src_row = &src[r * g.w..(r + 1) * g.w];
                    match g.mode {
                        PaddingMode::Zero => {
                            let (lo, hi) = g.valid_cols(ox);
                            let sy = y as isize + oy;
                            if lo >= hi || sy < 0 || sy >= g.h as isize {
                                continue;
                            }
                            let s0 = sy as usize * g.w + (lo as isize + ox) as usize;
                            let dst = &mut plane[s0..s0 + (hi - lo)];
                            for (d, &s) in dst.iter_mut().zip(&src_row[lo..hi]) {
                                *d = *d + s;
                            }
                        }
                        PaddingMode::Circular => {
                            let sy = (y as isize + oy).rem_euclid(g.h as isize) as usize;
                            for (x, &s) in src_row.iter().enumerate() {
                                let sx = (x as isize + ox).rem_euclid(g.w as isize) as usize;
                                let d = &mut plane[sy * g.w + sx];
                                *d = *d + s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Consecutive row ranges covering `0..h`.
fn bands(g: &Geometry) -> impl Iterator<Item = Range<usize>> + '_ {
    let step = band_rows(g);
    (0..g.h).step_by(step).map(move |y0| y0..(y0 + step).min(g.h))
}

fn check_input<T: Scalar>(op: &'static str, input: &Tensor<T>, c_in: usize) -> Result<(usize, usize, usize)> {
    let (n, c, h, w) = input.dims4()?;
    if c != c_in {
        return Err(Error::shape(op, &[n, c_in, h, w], input.shape()));
    }
    if h == 0 || w == 0 {
        return Err(Error::EmptySpatial { h, w });
    }
    Ok((n, h, w))
}

fn fill_bias<T: Scalar>(out: &mut [T], bias: Option<&Tensor<T>>, hw: usize) -> bool {
    match bias {
        Some(b) => {
            for (plane, &bv) in out.chunks_mut(hw).zip(b.data()) {
                plane.iter_mut().for_each(|v| *v = bv);
            }
            true
        }
        None => false,
    }
}

/// Dilated convolution; output has the input's spatial extent.
pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, kernel: &ConvKernel<T>) -> Result<Tensor<T>> {
    let (n, h, w) = check_input("conv2d_forward", input, kernel.in_channels())?;
    let g = kernel.geometry(h, w);
    let (c_out, hw, k) = (kernel.out_channels(), h * w, g.rows());
    let mut out = Tensor::zeros(&[n, c_out, h, w]);
    let weight = kernel.weight.data();
    out.data_mut()
        .par_chunks_mut(c_out * hw)
        .zip(input.data().par_chunks(g.c_in * hw))
        .for_each(|(o, x)| {
            let acc = fill_bias(o, kernel.bias.as_ref(), hw);
            for ys in bands(&g) {
                let bw = ys.len() * w;
                T::with_scratch(k * bw, |cols| {
                    im2col(&g, x, ys.clone(), cols);
                    matmul_ld(Mat::new(weight, c_out, k), Mat::new(cols, k, bw), &mut o[ys.start * w..], hw, acc);
                })
            }
        });
    Ok(out)
}

/// Exact adjoints of [`conv2d_forward`] with respect to input, weight and bias.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &ConvKernel<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (n, h, w) = check_input("conv2d_backward", input, kernel.in_channels())?;
    let c_out = kernel.out_channels();
    if grad_out.shape() != [n, c_out, h, w] {
        return Err(Error::shape("conv2d_backward", &[n, c_out, h, w], grad_out.shape()));
    }
    let g = kernel.geometry(h, w);
    let (hw, k) = (h * w, g.rows());
    let weight = kernel.weight.data();
    let mut grad_input = Tensor::zeros(input.shape());
    let partials: Vec<(Vec<T>, Vec<T>)> = grad_input
        .data_mut()
        .par_chunks_mut(g.c_in * hw)
        .zip(input.data().par_chunks(g.c_in * hw))
        .zip(grad_out.data().par_chunks(c_out * hw))
        .map(|((dx, x), dy)| {
            let mut dw = vec![T::zero(); c_out * k];
            for ys in bands(&g) {
                let bw = ys.len() * w;
                let dy_band = Mat::strided(&dy[ys.start * w..], c_out, bw, hw);
                T::with_scratch(k * bw, |cols| {
                    im2col(&g, x, ys.clone(), cols);
                    matmul(dy_band, Mat::new(cols, k, bw).t(), &mut dw, true);
                    matmul(Mat::new(weight, c_out, k).t(), dy_band, cols, false);
                    col2im(&g, cols, ys.clone(), dx);
                });
            }
            let db = dy.chunks(hw).map(|p| p.iter().fold(T::zero(), |a, &v| a + v)).collect();
            (dw, db)
        })
        .collect();
    Ok(reduce_partials(partials, kernel.weight.shape(), kernel.bias.is_some(), grad_input))
}

fn reduce_partials<T: Scalar>(
    partials: Vec<(Vec<T>, Vec<T>)>,
    weight_shape: &[usize],
    has_bias: bool,
    grad_input: Tensor<T>,
) -> ConvGrads<T> {
    let c_out = weight_shape[0];
    let mut gw = Tensor::zeros(weight_shape);
    let mut gb = Tensor::zeros(&[c_out]);
    for (dw, db) in partials {
        for (a, b) in gw.data_mut().iter_mut().zip(dw) {
            *a = *a + b;
        }
        for (a, b) in gb.data_mut().iter_mut().zip(db) {
            *a = *a + b;
        }
    }
    ConvGrads {
        input: grad_input,
        weight: gw,
        bias: has_bias.then_some(gb),
    }
}

/// Per-pixel affine channel map: `weight` is `(C_out, C_in)`.
pub fn pointwise_conv<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    let (c_out, c_in) = pointwise_dims(weight, bias)?;
    let (n, h, w) = check_input("pointwise_conv", input, c_in)?;
    let hw = h * w;
    let mut out = Tensor::zeros(&[n, c_out, h, w]);
    out.data_mut()
        .par_chunks_mut(c_out * hw)
        .zip(input.data().par_chunks(c_in * hw))
        .for_each(|(o, x)| {
            let acc = fill_bias(o, bias, hw);
            matmul(Mat::new(weight.data(), c_out, c_in), Mat::new(x, c_in, hw), o, acc);
        });
    Ok(out)
}

pub fn pointwise_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    has_bias: bool,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (c_out, c_in) = pointwise_dims(weight, None)?;
    let (n, h, w) = check_input("pointwise_backward", input, c_in)?;
    if grad_out.shape() != [n, c_out, h, w] {
        return Err(Error::shape("pointwise_backward", &[n, c_out, h, w], grad_out.shape()));
    }
    let hw = h * w;
    let mut grad_input = Tensor::zeros(input.shape());
    let partials: Vec<(Vec<T>, Vec<T>)> = grad_input
        .data_mut()
        .par_chunks_mut(c_in * hw)
        .zip(input.data().par_chunks(c_in * hw))
        .zip(grad_out.data().par_chunks(c_out * hw))
        .map(|((dx, x), dy)| {
            let mut dw = vec![T::zero(); c_out * c_in];
            matmul(Mat::new(dy, c_out, hw), Mat::new(x, c_in, hw).t(), &mut dw, false);
            matmul(Mat::new(weight.data(), c_out, c_in).t(), Mat::new(dy, c_out, hw), dx, false);
            let db = dy.chunks(hw).map(|p| p.iter().fold(T::zero(), |a, &v| a + v)).collect();
            (dw, db)
        })
        .collect();
    Ok(reduce_partials(partials, weight.shape(), has_bias, grad_input))
}

fn pointwise_dims<T: Scalar>(weight: &Tensor<T>, bias: Option<&Tensor<T>>) -> Result<(usize, usize)> {
    let (c_out, c_in) = match weight.shape() {
        &[o, i] => (o, i),
        other => return Err(Error::shape("pointwise weight", &[0, 0], other)),
    };
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(Error::shape("pointwise bias", &[c_out], b.shape()));
        }
    }
    Ok((c_out, c_in))
}

/// A 1x1 convolution layer with its own parameters.
#[derive(Debug, Clone)]
pub struct PointwiseConv<T: Scalar> {
    weight: Tensor<T>,
    bias: Option<Tensor<T>>,
}

impl<T: Scalar> PointwiseConv<T> {
    pub fn new(weight: Tensor<T>, bias: Option<Tensor<T>>) -> Result<Self> {
        let (c_out, c_in) = pointwise_dims(&weight, bias.as_ref())?;
        if c_out == 0 || c_in == 0 {
            return Err(Error::Config(format!(
                "pointwise channel counts must be positive, got {c_out}x{c_in}"
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn init<R: Rng + ?Sized>(c_out: usize, c_in: usize, bias: bool, rng: &mut R) -> Result<Self> {
        let bound = (1.0 / c_in.max(1) as f64).sqrt();
        let weight = uniform(&[c_out, c_in], bound, rng);
        let bias = bias.then(|| uniform(&[c_out], bound, rng));
        Self::new(weight, bias)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn weight(&self) -> &Tensor<T> {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut Tensor<T> {
        &mut self.weight
    }

    pub fn bias(&self) -> Option<&Tensor<T>> {
        self.bias.as_ref()
    }

    pub fn bias_mut(&mut self) -> Option<&mut Tensor<T>> {
        self.bias.as_mut()
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.as_ref().map_or(0, |b| b.len())
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        pointwise_conv(input, &self.weight, self.bias.as_ref())
    }

    /// Returns the input gradient and accumulates parameter gradients.
    pub fn backward(&mut self, input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let g = pointwise_backward(input, &self.weight, self.bias.is_some(), grad_out)?;
        self.weight.accumulate_grad(g.weight.data());
        if let (Some(b), Some(gb)) = (&mut self.bias, &g.bias) {
            b.accumulate_grad(gb.data());
        }
        Ok(g.input)
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = vec![&mut self.weight];
        if let Some(b) = &mut self.bias {
            v.push(b);
        }
        v
    }

    pub(crate) fn params(&self) -> Vec<&Tensor<T>> {
        let mut v = vec![&self.weight];
        if let Some(b) = &self.bias {
            v.push(b);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kernel(kh: usize, kw: usize, dil: [usize; 2]) -> Result<ConvKernel<f64>> {
        ConvKernel::new(Tensor::zeros(&[1, 1, kh, kw]), None, dil, PaddingMode::Zero)
    }

    #[test]
    fn rejects_even_kernels_and_zero_dilation() {
        assert!(matches!(kernel(2, 3, [1, 1]), Err(Error::EvenKernel { .. })));
        assert!(matches!(kernel(3, 4, [1, 1]), Err(Error::EvenKernel { .. })));
        assert!(matches!(kernel(3, 3, [0, 1]), Err(Error::NonPositiveDilation(0, 1))));
        assert!(kernel(3, 5, [2, 7]).is_ok());
    }

    #[test]
    fn padding_is_resolution_preserving() {
        let k = kernel(3, 5, [4, 3]).unwrap();
        assert_eq!(k.padding(), [4, 6]);
    }

    #[test]
    fn rejects_channel_mismatch() {
        let k = kernel(3, 3, [1, 1]).unwrap();
        let x = Tensor::<f64>::zeros(&[1, 2, 4, 4]);
        assert!(matches!(conv2d_forward(&x, &k), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Tensor<f64> = uniform(&[2, 1, 5, 6], 1.0, &mut rng);
        let k = ConvKernel::new(Tensor::full(&[1, 1, 1, 1], 1.0), Some(Tensor::zeros(&[1])), [1, 1], PaddingMode::Zero)
            .unwrap();
        assert_eq!(conv2d_forward(&x, &k).unwrap().data(), x.data());
        let g = conv2d_backward(&x, &k, &x).unwrap();
        assert_eq!(g.input.data(), x.data());
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Tensor<f64> = uniform(&[2, 3, 6, 5], 1.0, &mut rng);
        let k = ConvKernel::<f64>::init(4, 3, [3, 5], true, [2, 1], PaddingMode::Zero, &mut rng).unwrap();
        let g = conv2d_backward(&x, &k, &Tensor::zeros(&[2, 4, 6, 5])).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.weight.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pointwise_sums_channels() {
        let x = Tensor::<f64>::from_vec(&[1, 2, 1, 3], vec![1.0, 2.0, 3.0, 10.0, 20.0, 30.0]).unwrap();
        let w = Tensor::from_vec(&[1, 2], vec![1.0, 1.0]).unwrap();
        let y = pointwise_conv(&x, &w, Some(&Tensor::zeros(&[1]))).unwrap();
        assert_eq!(y.data(), &[11.0, 22.0, 33.0]);
    }

    #[test]
    fn dilation_larger_than_grid_reads_only_center_tap() {
        // every off-center tap falls outside a 3x3 grid at dilation 5
        let mut w = Tensor::<f64>::full(&[1, 1, 3, 3], 1.0);
        w.data_mut()[4] = 2.0;
        let k = ConvKernel::new(w, None, [5, 5], PaddingMode::Zero).unwrap();
        let x = Tensor::from_fn(&[1, 1, 3, 3], |i| i as f64);
        let y = conv2d_forward(&x, &k).unwrap();
        assert_eq!(y.data(), x.map(|v| 2.0 * v).data());
    }
}
