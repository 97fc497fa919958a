//! Shape-level preprocessing: coordinate channels, strided subsampling and
//! trajectory windowing. All of it is pure indexing.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Grid position `index / (extent - 1)`, or 0 on a single-point axis.
pub fn grid_coordinate(index: usize, extent: usize) -> f64 {
    if extent > 1 {
        index as f64 / (extent - 1) as f64
    } else {
        0.0
    }
}

/// Append two channels holding the normalized row and column position of
/// each point to an `(N, C, H, W)` batch.
pub fn append_coords<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4()?;
    let plane = h * w;
    let mut out = Vec::with_capacity(n * (c + 2) * plane);
    for s in 0..n {
        out.extend_from_slice(&x.data()[s * c * plane..(s + 1) * c * plane]);
        out.extend((0..plane).map(|i| T::of(grid_coordinate(i / w, h))));
        out.extend((0..plane).map(|i| T::of(grid_coordinate(i % w, w))));
    }
    Tensor::from_vec(&[n, c + 2, h, w], out)
}

/// Keep every `stride`-th point of the last two axes, including both ends;
/// `r = (extent - 1) / stride + 1` points remain per axis.
pub fn darcy_subsample<T: Scalar>(field: &Tensor<T>, stride: usize) -> Result<Tensor<T>> {
    let rank = field.rank();
    if rank < 2 {
        return Err(Error::Data(format!("subsampling needs a rank >= 2 field, got rank {rank}")));
    }
    let (h, w) = (field.shape()[rank - 2], field.shape()[rank - 1]);
    if stride == 0 || h == 0 || w == 0 || (h - 1) % stride != 0 || (w - 1) % stride != 0 {
        return Err(Error::Data(format!(
            "stride {stride} does not divide the {h}x{w} grid spacing ({} x {})",
            h.saturating_sub(1),
            w.saturating_sub(1)
        )));
    }
    let (rh, rw) = ((h - 1) / stride + 1, (w - 1) / stride + 1);
    let planes = field.len() / (h * w);
    let mut out = Vec::with_capacity(planes * rh * rw);
    for p in 0..planes {
        let src = &field.data()[p * h * w..(p + 1) * h * w];
        for i in 0..rh {
            out.extend((0..rw).map(|j| src[i * stride * w + j * stride]));
        }
    }
    let mut shape = field.shape().to_vec();
    shape[rank - 2] = rh;
    shape[rank - 1] = rw;
    Tensor::from_vec(&shape, out)
}

/// Split one `(C_t, T, H, W)` trajectory into an input window of the first
/// `history` frames and the following `horizon` target frames, each stacked
/// component-major as `(C_t * len, H, W)`.
pub fn ns_windows<T: Scalar>(
    trajectory: &Tensor<T>,
    history: usize,
    horizon: usize,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (ct, t, h, w) = trajectory.dims4()?;
    if history == 0 || horizon == 0 {
        return Err(Error::Data("history and horizon must be positive".into()));
    }
    if t < history + horizon {
        return Err(Error::Data(format!(
            "trajectory has {t} frames, needs {} for history {history} + horizon {horizon}",
            history + horizon
        )));
    }
    let plane = h * w;
    let frames = |start: usize, len: usize| {
        let mut out = Vec::with_capacity(ct * len * plane);
        for c in 0..ct {
            let base = (c * t + start) * plane;
            out.extend_from_slice(&trajectory.data()[base..base + len * plane]);
        }
        Tensor::from_vec(&[ct * len, h, w], out)
    };
    Ok((frames(0, history)?, frames(history, horizon)?))
}

/// Channels `[start, end)` of every sample of an `(N, C, H, W)` batch.
pub fn select_channels<T: Scalar>(x: &Tensor<T>, start: usize, end: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4()?;
    if start > end || end > c {
        return Err(Error::Data(format!("channel range {start}..{end} outside 0..{c}")));
    }
    let plane = h * w;
    let mut out = Vec::with_capacity(n * (end - start) * plane);
    for s in 0..n {
        out.extend_from_slice(&x.data()[(s * c + start) * plane..(s * c + end) * plane]);
    }
    Tensor::from_vec(&[n, end - start, h, w], out)
}

/// Concatenate two `(N, C, H, W)` batches along the channel axis.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, ca, h, w) = a.dims4()?;
    let (nb, cb, hb, wb) = b.dims4()?;
    if (n, h, w) != (nb, hb, wb) {
        return Err(Error::shape("concat_channels", a.shape(), b.shape()));
    }
    let plane = h * w;
    let mut out = Vec::with_capacity(n * (ca + cb) * plane);
    for s in 0..n {
        out.extend_from_slice(&a.data()[s * ca * plane..(s + 1) * ca * plane]);
        out.extend_from_slice(&b.data()[s * cb * plane..(s + 1) * cb * plane]);
    }
    Tensor::from_vec(&[n, ca + cb, h, w], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_span_the_unit_square() {
        let x = Tensor::<f64>::zeros(&[1, 1, 3, 5]);
        let y = append_coords(&x).unwrap();
        assert_eq!(y.shape(), &[1, 3, 3, 5]);
        let d = y.data();
        assert_eq!(&d[15..20], &[0.0; 5]);
        assert_eq!(&d[25..30], &[1.0; 5]);
        assert_eq!(&d[30..35], &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn channel_split_and_join_invert() {
        let x = Tensor::<f64>::from_fn(&[2, 3, 2, 2], |i| i as f64);
        let a = select_channels(&x, 0, 1).unwrap();
        let b = select_channels(&x, 1, 3).unwrap();
        assert_eq!(concat_channels(&a, &b).unwrap(), x);
    }
}
