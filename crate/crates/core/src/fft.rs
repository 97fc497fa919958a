//! Real-input 2-D FFT over `(N, C, H, W)` planes.
//!
//! The forward transform is unnormalized and keeps the half spectrum
//! `(H, W / 2 + 1)`; the inverse is scaled by `1 / (H W)`. The inverse only
//! reads the half spectrum, which makes it real-linear: imaginary parts of
//! the zero-frequency and (for even `W`) Nyquist columns are discarded, as
//! in any complex-to-real transform.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub type C<T> = Complex<T>;

/// Planned transforms for one `H x W` grid.
#[derive(Clone)]
pub struct Fft2Plan<T: Scalar> {
    h: usize,
    w: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Scalar> Fft2Plan<T> {
    pub fn new(h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::EmptySpatial { h, w });
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            h,
            w,
            row_fwd: planner.plan_fft_forward(w),
            row_inv: planner.plan_fft_inverse(w),
            col_fwd: planner.plan_fft_forward(h),
            col_inv: planner.plan_fft_inverse(h),
        })
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    /// Number of retained columns, `W / 2 + 1`.
    pub fn half_width(&self) -> usize {
        self.w / 2 + 1
    }

    /// Multiplicity of half-spectrum column `q` in the full spectrum.
    pub fn column_weight(&self, q: usize) -> T {
        if q == 0 || (self.w % 2 == 0 && q == self.w / 2) {
            T::one()
        } else {
            T::of(2.0)
        }
    }

    /// `plane` is `H x W` real, `out` is `H x (W/2+1)` complex.
    pub fn forward_plane(&self, plane: &[T], out: &mut [C<T>]) {
        let (h, w, wh) = (self.h, self.w, self.half_width());
        debug_assert_eq!(plane.len(), h * w);
        debug_assert_eq!(out.len(), h * wh);
        let mut row = vec![C::new(T::zero(), T::zero()); w];
        for y in 0..h {
            for (r, &v) in row.iter_mut().zip(&plane[y * w..(y + 1) * w]) {
                *r = C::new(v, T::zero());
            }
            self.row_fwd.process(&mut row);
            out[y * wh..(y + 1) * wh].copy_from_slice(&row[..wh]);
        }
        self.columns(out, &self.col_fwd);
    }

    /// Inverse of [`forward_plane`](Self::forward_plane), normalized by `1/(H W)`.
    pub fn inverse_plane(&self, spec: &[C<T>], out: &mut [T]) {
        let (h, w, wh) = (self.h, self.w, self.half_width());
        debug_assert_eq!(spec.len(), h * wh);
        debug_assert_eq!(out.len(), h * w);
        let mut work = spec.to_vec();
        self.columns(&mut work, &self.col_inv);
        let scale = T::of(1.0 / (h * w) as f64);
        let mut row = vec![C::new(T::zero(), T::zero()); w];
        for y in 0..h {
            let half = &work[y * wh..(y + 1) * wh];
            row[..wh].copy_from_slice(half);
            for q in wh..w {
                row[q] = half[w - q].conj();
            }
            self.row_inv.process(&mut row);
            for (o, r) in out[y * w..(y + 1) * w].iter_mut().zip(&row) {
                *o = r.re * scale;
            }
        }
    }

    /// Adjoint of [`inverse_plane`](Self::inverse_plane) under the real inner
    /// product on (re, im) pairs: `(c_q / (H W)) * rfft2(grad)`.
    pub fn inverse_adjoint_plane(&self, grad: &[T], out: &mut [C<T>]) {
        self.forward_plane(grad, out);
        let wh = self.half_width();
        let inv = T::of(1.0 / (self.h * self.w) as f64);
        for (i, v) in out.iter_mut().enumerate() {
            *v = *v * (self.column_weight(i % wh) * inv);
        }
    }

    /// Adjoint of [`forward_plane`](Self::forward_plane):
    /// `H W * irfft2(grad / c_q)`.
    pub fn forward_adjoint_plane(&self, grad: &[C<T>], out: &mut [T]) {
        let wh = self.half_width();
        let scaled: Vec<C<T>> = grad
            .iter()
            .enumerate()
            .map(|(i, &v)| v * (T::one() / self.column_weight(i % wh)))
            .collect();
        self.inverse_plane(&scaled, out);
        let hw = T::of((self.h * self.w) as f64);
        out.iter_mut().for_each(|v| *v = *v * hw);
    }

    fn columns(&self, data: &mut [C<T>], fft: &Arc<dyn Fft<T>>) {
        let (h, wh) = (self.h, self.half_width());
        let mut col = vec![C::new(T::zero(), T::zero()); h];
        for q in 0..wh {
            for (p, c) in col.iter_mut().enumerate() {
                *c = data[p * wh + q];
            }
            fft.process(&mut col);
            for (p, c) in col.iter().enumerate() {
                data[p * wh + q] = *c;
            }
        }
    }
}

/// Half spectrum of a batch of real planes: `(N, C, H, W/2+1)` complex.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T: Scalar> {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    /// Width of the real grid the spectrum came from.
    pub w: usize,
    pub data: Vec<C<T>>,
}

impl<T: Scalar> Spectrum<T> {
    pub fn half_width(&self) -> usize {
        self.w / 2 + 1
    }

    pub fn at(&self, n: usize, c: usize, p: usize, q: usize) -> C<T> {
        let wh = self.half_width();
        self.data[((n * self.c + c) * self.h + p) * wh + q]
    }
}

pub fn rfft2<T: Scalar>(field: &Tensor<T>) -> Result<Spectrum<T>> {
    let (n, c, h, w) = field.dims4()?;
    let plan = Fft2Plan::new(h, w)?;
    let wh = plan.half_width();
    let mut data = vec![C::new(T::zero(), T::zero()); n * c * h * wh];
    data.par_chunks_mut(h * wh)
        .zip(field.data().par_chunks(h * w))
        .for_each(|(out, plane)| plan.forward_plane(plane, out));
    Ok(Spectrum { n, c, h, w, data })
}

pub fn irfft2<T: Scalar>(spec: &Spectrum<T>) -> Result<Tensor<T>> {
    let plan = Fft2Plan::new(spec.h, spec.w)?;
    let (h, w) = (spec.h, spec.w);
    let mut out = Tensor::zeros(&[spec.n, spec.c, h, w]);
    out.data_mut()
        .par_chunks_mut(h * w)
        .zip(spec.data.par_chunks(h * plan.half_width()))
        .for_each(|(o, s)| plan.inverse_plane(s, o));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_has_only_dc() {
        let x = Tensor::<f64>::full(&[1, 1, 6, 5], 2.5);
        let s = rfft2(&x).unwrap();
        assert_eq!(s.data.len(), 6 * 3);
        assert!((s.at(0, 0, 0, 0).re - 2.5 * 30.0).abs() < 1e-12);
        for (i, v) in s.data.iter().enumerate().skip(1) {
            assert!(v.norm() < 1e-12, "bin {i} = {v}");
        }
    }

    #[test]
    fn round_trip_odd_and_even_widths() {
        for (h, w) in [(8, 8), (5, 7), (4, 9), (1, 6), (3, 1)] {
            let x = Tensor::<f64>::from_fn(&[2, 2, h, w], |i| ((i * 37 % 11) as f64).sin());
            let y = irfft2(&rfft2(&x).unwrap()).unwrap();
            assert!(x.max_abs_diff(&y) < 1e-12, "{h}x{w}");
        }
    }

    #[test]
    fn adjoints_satisfy_inner_product_identity() {
        for (h, w) in [(6, 8), (5, 7)] {
            let plan = Fft2Plan::<f64>::new(h, w).unwrap();
            let wh = plan.half_width();
            let x: Vec<f64> = (0..h * w).map(|i| ((i * 13 % 7) as f64 - 3.0) * 0.3).collect();
            let g: Vec<C<f64>> = (0..h * wh)
                .map(|i| C::new(((i * 5 % 9) as f64).cos(), ((i * 3 % 4) as f64) - 1.5))
                .collect();
            let dot_c = |a: &[C<f64>], b: &[C<f64>]| a.iter().zip(b).map(|(a, b)| a.re * b.re + a.im * b.im).sum::<f64>();
            let dot_r = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| a * b).sum::<f64>();

            // <F x, g> = <x, F* g>
            let mut fx = vec![C::new(0.0, 0.0); h * wh];
            plan.forward_plane(&x, &mut fx);
            let mut ftg = vec![0.0; h * w];
            plan.forward_adjoint_plane(&g, &mut ftg);
            let (l, r) = (dot_c(&fx, &g), dot_r(&x, &ftg));
            assert!((l - r).abs() < 1e-10 * l.abs().max(1.0), "{l} vs {r}");

            // <I g, x> = <g, I* x>
            let mut ig = vec![0.0; h * w];
            plan.inverse_plane(&g, &mut ig);
            let mut itx = vec![C::new(0.0, 0.0); h * wh];
            plan.inverse_adjoint_plane(&x, &mut itx);
            let (l, r) = (dot_r(&ig, &x), dot_c(&g, &itx));
            assert!((l - r).abs() < 1e-10 * l.abs().max(1.0), "{l} vs {r}");
        }
    }
}
