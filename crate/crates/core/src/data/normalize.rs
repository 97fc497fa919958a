use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Added to every standard deviation so constant channels stay finite.
pub const NORM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormPolicy {
    #[default]
    ZScore,
    None,
}

impl NormPolicy {
    pub fn name(self) -> &'static str {
        match self {
            NormPolicy::ZScore => "zscore",
            NormPolicy::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "zscore" => Some(NormPolicy::ZScore),
            "none" => Some(NormPolicy::None),
            _ => None,
        }
    }
}

/// Per-channel affine encoding `(x - mean) / scale` with
/// `scale = std + NORM_EPS`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Normalizer {
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            scale: vec![1.0; channels],
        }
    }

    pub fn from_parts(mean: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if mean.len() != scale.len() || scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Data("normalizer needs matching, positive scales".into()));
        }
        Ok(Self { mean, scale })
    }

    /// Population mean and standard deviation of every channel of an
    /// `(N, C, H, W)` batch, accumulated in float64.
    pub fn fit<T: Scalar>(x: &Tensor<T>) -> Result<Self> {
        let (n, c, h, w) = x.dims4()?;
        Self::fit_groups(x, (0..c).map(|ch| vec![ch]).collect(), n * h * w)
    }

    /// One shared statistic per group of `group` consecutive channels, for
    /// stacks of frames of the same field; the result has one entry per
    /// group.
    pub fn fit_pooled<T: Scalar>(x: &Tensor<T>, group: usize) -> Result<Self> {
        let (n, c, h, w) = x.dims4()?;
        if group == 0 || c % group != 0 {
            return Err(Error::Data(format!("{c} channels do not split into groups of {group}")));
        }
        let groups = (0..c / group).map(|g| (g * group..(g + 1) * group).collect()).collect();
        Self::fit_groups(x, groups, n * group * h * w)
    }

    fn fit_groups<T: Scalar>(x: &Tensor<T>, groups: Vec<Vec<usize>>, count: usize) -> Result<Self> {
        let (n, c, h, w) = x.dims4()?;
        if count == 0 {
            return Err(Error::Data("cannot fit a normalizer on an empty split".into()));
        }
        let plane = h * w;
        let planes = |ch: usize| (0..n).map(move |s| &x.data()[(s * c + ch) * plane..(s * c + ch + 1) * plane]);
        let (mut mean, mut scale) = (Vec::new(), Vec::new());
        for g in &groups {
            let m = g.iter().flat_map(|&ch| planes(ch)).flatten().map(|v| v.as_f64()).sum::<f64>() / count as f64;
            let var = g
                .iter()
                .flat_map(|&ch| planes(ch))
                .flatten()
                .map(|v| (v.as_f64() - m).powi(2))
                .sum::<f64>()
                / count as f64;
            mean.push(m);
            scale.push(var.sqrt() + NORM_EPS);
        }
        Ok(Self { mean, scale })
    }

    /// The same statistics repeated `times` times, component-major.
    pub fn repeat(&self, times: usize) -> Self {
        let rep = |v: &[f64]| v.iter().flat_map(|&x| std::iter::repeat_n(x, times)).collect();
        Self {
            mean: rep(&self.mean),
            scale: rep(&self.scale),
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn encode<T: Scalar>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.apply(x, |v, m, s| (v - m) / s)
    }

    pub fn decode<T: Scalar>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.apply(x, |v, m, s| v * s + m)
    }

    /// Chain rule through [`decode`](Self::decode): multiply by the scale.
    pub fn decode_grad<T: Scalar>(&self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        self.apply(grad, |v, _, s| v * s)
    }

    /// Apply `f(value, mean, scale)` to every element; the channel axis is
    /// the third from last, so `(C, H, W)` and `(N, C, H, W)` both work.
    fn apply<T: Scalar>(&self, x: &Tensor<T>, f: impl Fn(f64, f64, f64) -> f64) -> Result<Tensor<T>> {
        let rank = x.rank();
        if rank < 3 || x.shape()[rank - 3] != self.channels() {
            return Err(Error::Data(format!(
                "normalizer has {} channels, tensor shape is {:?}",
                self.channels(),
                x.shape()
            )));
        }
        let c = self.channels();
        let plane = x.shape()[rank - 2] * x.shape()[rank - 1];
        let mut out = x.clone();
        out.clear_grad();
        for (i, chunk) in out.data_mut().chunks_mut(plane.max(1)).enumerate() {
            let (m, s) = (self.mean[i % c], self.scale[i % c]);
            for v in chunk {
                *v = T::of(f(v.as_f64(), m, s));
            }
        }
        Ok(out)
    }

    /// `(2, C)` float64 tensor of means then scales, for storage.
    pub fn to_tensor(&self) -> Tensor<f64> {
        let mut data = self.mean.clone();
        data.extend_from_slice(&self.scale);
        Tensor::from_vec(&[2, self.channels()], data).expect("length matches")
    }

    pub fn from_tensor(t: &Tensor<f64>) -> Result<Self> {
        match t.shape() {
            [2, c] => {
                let (m, s) = t.data().split_at(*c);
                Self::from_parts(m.to_vec(), s.to_vec())
            }
            other => Err(Error::Data(format!("normalizer tensor must be (2, C), got {other:?}"))),
        }
    }
}
