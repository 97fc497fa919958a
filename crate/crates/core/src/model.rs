//! Uniform interface over the two model families.

use rand::Rng;

use crate::dseno::{Architecture, Dseno, DsenoCache};
use crate::error::{Error, Result};
use crate::fno::{FnoCache, FnoPlus};
use crate::nn::DifferentiableOp;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone)]
pub enum AnyModel<T: Scalar> {
    Dseno(Dseno<T>),
    FnoPlus(FnoPlus<T>),
}

#[derive(Debug, Clone)]
pub enum AnyCache<T: Scalar> {
    Dseno(DsenoCache<T>),
    FnoPlus(FnoCache<T>),
}

impl<T: Scalar> AnyModel<T> {
    pub fn new<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<Self> {
        Ok(match arch {
            Architecture::Dseno(c) => AnyModel::Dseno(Dseno::new(c, rng)?),
            Architecture::FnoPlus(c) => AnyModel::FnoPlus(FnoPlus::new(c, rng)?),
        })
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            AnyModel::Dseno(m) => Architecture::Dseno(m.config().clone()),
            AnyModel::FnoPlus(m) => Architecture::FnoPlus(m.config().clone()),
        }
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let out = match self {
            AnyModel::Dseno(m) => m.forward(input)?,
            AnyModel::FnoPlus(m) => m.forward(input)?,
        };
        out.ensure_finite("model output")?;
        Ok(out)
    }

    pub fn forward_cached(&self, input: &Tensor<T>) -> Result<(Tensor<T>, AnyCache<T>)> {
        let (out, cache) = match self {
            AnyModel::Dseno(m) => {
                let (o, c) = m.forward_cached(input)?;
                (o, AnyCache::Dseno(c))
            }
            AnyModel::FnoPlus(m) => {
                let (o, c) = m.forward_cached(input)?;
                (o, AnyCache::FnoPlus(c))
            }
        };
        out.ensure_finite("model output")?;
        Ok((out, cache))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &AnyCache<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        match (self, cache) {
            (AnyModel::Dseno(m), AnyCache::Dseno(c)) => m.backward(c, grad_out),
            (AnyModel::FnoPlus(m), AnyCache::FnoPlus(c)) => m.backward(c, grad_out),
            _ => Err(Error::Config("cache was produced by a different model family".into())),
        }
    }

    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        match self {
            AnyModel::Dseno(m) => m.params(),
            AnyModel::FnoPlus(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        match self {
            AnyModel::Dseno(m) => m.params_mut(),
            AnyModel::FnoPlus(m) => m.params_mut(),
        }
    }

    /// Number of trainable scalars actually held by the model.
    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for (_, p) in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Overwrite every parameter from a list in [`params`](Self::params) order.
    pub fn load_params(&mut self, values: &[Tensor<T>]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != values.len() {
            return Err(Error::Data(format!(
                "expected {} parameter tensors, got {}",
                params.len(),
                values.len()
            )));
        }
        for ((name, p), v) in params.iter_mut().zip(values) {
            if p.shape() != v.shape() {
                return Err(Error::Data(format!(
                    "parameter {name}: expected shape {:?}, got {:?}",
                    p.shape(),
                    v.shape()
                )));
            }
            p.data_mut().copy_from_slice(v.data());
        }
        Ok(())
    }
}

/// Adapter exposing a whole float64 model to the gradient checker: input 0
/// is the model input, the rest are the parameters in `params` order.
pub struct ModelOp {
    model: AnyModel<f64>,
}

impl ModelOp {
    pub fn new(model: AnyModel<f64>) -> Self {
        Self { model }
    }

    /// The model input followed by the current parameter values.
    pub fn inputs(&self, input: Tensor<f64>) -> Vec<Tensor<f64>> {
        let mut v = vec![input];
        v.extend(self.model.params().into_iter().map(|(_, p)| {
            let mut p = p.clone();
            p.clear_grad();
            p
        }));
        v
    }

    fn with_params(&self, inputs: &[Tensor<f64>]) -> Result<AnyModel<f64>> {
        let mut m = self.model.clone();
        m.load_params(&inputs[1..])?;
        Ok(m)
    }
}

impl DifferentiableOp for ModelOp {
    fn forward(&self, inputs: &[Tensor<f64>]) -> Result<Tensor<f64>> {
        self.with_params(inputs)?.forward(&inputs[0])
    }

    fn backward(&self, inputs: &[Tensor<f64>], grad_out: &Tensor<f64>) -> Result<Vec<Tensor<f64>>> {
        let mut m = self.with_params(inputs)?;
        for (_, p) in m.params_mut() {
            p.clear_grad();
        }
        let (_, cache) = m.forward_cached(&inputs[0])?;
        let dx = m.backward(&cache, grad_out)?;
        let mut grads = vec![dx];
        for (name, p) in m.params() {
            let g = p.grad().ok_or_else(|| Error::MissingBackward(name.clone()))?;
            grads.push(Tensor::from_vec(p.shape(), g.to_vec())?);
        }
        Ok(grads)
    }

    fn input_names(&self, count: usize) -> Vec<String> {
        let mut names = vec!["input".to_string()];
        names.extend(self.model.params().into_iter().map(|(n, _)| n));
        names.truncate(count);
        names
    }
}
