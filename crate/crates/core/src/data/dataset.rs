use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

use super::format::read_any;
use super::manifest::{DatasetManifest, Windowing};
use super::normalize::{NormPolicy, Normalizer};
use super::transform::{append_coords, darcy_subsample, ns_windows};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Train,
    Test,
}

/// Physical-unit inputs and targets of one split, `(N, C, H, W)` each.
#[derive(Debug, Clone, PartialEq)]
pub struct Split<T: Scalar> {
    pub inputs: Tensor<T>,
    pub targets: Tensor<T>,
}

impl<T: Scalar> Split<T> {
    pub fn new(inputs: Tensor<T>, targets: Tensor<T>) -> Result<Self> {
        let (n, _, h, w) = inputs.dims4()?;
        let (nt, _, ht, wt) = targets.dims4()?;
        if (n, h, w) != (nt, ht, wt) {
            return Err(Error::Data(format!(
                "inputs {:?} and targets {:?} disagree on sample count or grid",
                inputs.shape(),
                targets.shape()
            )));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Samples `indices`, in that order, as a new batch.
    pub fn gather(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            inputs: gather(&self.inputs, indices)?,
            targets: gather(&self.targets, indices)?,
        })
    }
}

fn gather<T: Scalar>(x: &Tensor<T>, indices: &[usize]) -> Result<Tensor<T>> {
    let n = x.shape()[0];
    let per = if n == 0 { 0 } else { x.len() / n };
    let mut data = Vec::with_capacity(per * indices.len());
    for &i in indices {
        if i >= n {
            return Err(Error::Data(format!("sample index {i} out of range for {n} samples")));
        }
        data.extend_from_slice(&x.data()[i * per..(i + 1) * per]);
    }
    let mut shape = x.shape().to_vec();
    shape[0] = indices.len();
    Tensor::from_vec(&shape, data)
}

/// One (input, target) pair in physical units with its encodings, each
/// `(C, H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample<T: Scalar> {
    pub input: Tensor<T>,
    pub target: Tensor<T>,
    /// Model-ready input: normalized, with coordinates when enabled.
    pub encoded_input: Tensor<T>,
    pub encoded_target: Tensor<T>,
}

/// Train and test splits plus the fitted encodings.
///
/// For trajectory data the inputs hold the history window and the targets
/// the full horizon; the model predicts one step of `C_t` field components
/// at a time and `output_norm` covers those components only.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar> {
    pub name: String,
    pub train: Split<T>,
    pub test: Split<T>,
    input_norm: Normalizer,
    output_norm: Normalizer,
    append_coords: bool,
    windowing: Option<Windowing>,
}

impl<T: Scalar> Dataset<T> {
    /// Fit encodings on the training split.
    pub fn new(
        name: impl Into<String>,
        train: Split<T>,
        test: Split<T>,
        policy: NormPolicy,
        append_coords: bool,
        windowing: Option<Windowing>,
    ) -> Result<Self> {
        let c_in = train.inputs.shape()[1];
        let c_out = train.targets.shape()[1];
        let (input_norm, output_norm) = match (policy, windowing) {
            (NormPolicy::ZScore, None) => (Normalizer::fit(&train.inputs)?, Normalizer::fit(&train.targets)?),
            (NormPolicy::ZScore, Some(w)) => {
                let field = Normalizer::fit_pooled(&train.inputs, w.history)?;
                (field.repeat(w.history), field)
            }
            (NormPolicy::None, None) => (Normalizer::identity(c_in), Normalizer::identity(c_out)),
            (NormPolicy::None, Some(w)) => (Normalizer::identity(c_in), Normalizer::identity(c_in / w.history)),
        };
        Self::with_normalizers(name, train, test, input_norm, output_norm, append_coords, windowing)
    }

    /// Assemble with previously fitted encodings, e.g. from a checkpoint.
    pub fn with_normalizers(
        name: impl Into<String>,
        train: Split<T>,
        test: Split<T>,
        input_norm: Normalizer,
        output_norm: Normalizer,
        append_coords: bool,
        windowing: Option<Windowing>,
    ) -> Result<Self> {
        let (c_in, c_out) = (train.inputs.shape()[1], train.targets.shape()[1]);
        if test.inputs.shape()[1..] != train.inputs.shape()[1..] || test.targets.shape()[1] != c_out {
            return Err(Error::Data("train and test splits have different layouts".into()));
        }
        if input_norm.channels() != c_in {
            return Err(Error::Data(format!(
                "input normalizer has {} channels, data has {c_in}",
                input_norm.channels()
            )));
        }
        let expected_out = match windowing {
            None => c_out,
            Some(w) => {
                if w.history == 0 || w.horizon == 0 || c_in % w.history != 0 || c_out != c_in / w.history * w.horizon {
                    return Err(Error::Data(format!(
                        "{c_in} input and {c_out} target channels do not fit history {} / horizon {}",
                        w.history, w.horizon
                    )));
                }
                c_in / w.history
            }
        };
        if output_norm.channels() != expected_out {
            return Err(Error::Data(format!(
                "output normalizer has {} channels, expected {expected_out}",
                output_norm.channels()
            )));
        }
        Ok(Self {
            name: name.into(),
            train,
            test,
            input_norm,
            output_norm,
            append_coords,
            windowing,
        })
    }

    pub fn input_norm(&self) -> &Normalizer {
        &self.input_norm
    }

    pub fn output_norm(&self) -> &Normalizer {
        &self.output_norm
    }

    pub fn append_coords(&self) -> bool {
        self.append_coords
    }

    pub fn windowing(&self) -> Option<Windowing> {
        self.windowing
    }

    pub fn split(&self, kind: SplitKind) -> &Split<T> {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::Test => &self.test,
        }
    }

    /// `(H, W)` of every sample.
    pub fn mesh(&self) -> (usize, usize) {
        let s = self.train.inputs.shape();
        (s[2], s[3])
    }

    /// Channels the model consumes.
    pub fn model_in_channels(&self) -> usize {
        self.input_norm.channels() + if self.append_coords { 2 } else { 0 }
    }

    /// Channels the model produces per call.
    pub fn model_out_channels(&self) -> usize {
        self.output_norm.channels()
    }

    /// Normalize a physical `(N, C, H, W)` batch and append coordinates.
    pub fn encode_inputs(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let z = self.input_norm.encode(x)?;
        if self.append_coords {
            append_coords(&z)
        } else {
            Ok(z)
        }
    }

    /// Encode targets; trajectory horizons are encoded frame by frame.
    pub fn encode_targets(&self, y: &Tensor<T>) -> Result<Tensor<T>> {
        match self.windowing {
            None => self.output_norm.encode(y),
            Some(w) => self.output_norm.repeat(w.horizon).encode(y),
        }
    }

    pub fn sample(&self, kind: SplitKind, index: usize) -> Result<FieldSample<T>> {
        let batch = self.split(kind).gather(&[index])?;
        let encoded_input = self.encode_inputs(&batch.inputs)?;
        let encoded_target = self.encode_targets(&batch.targets)?;
        let drop_batch = |t: Tensor<T>| {
            let shape = t.shape()[1..].to_vec();
            t.reshape(&shape)
        };
        Ok(FieldSample {
            input: drop_batch(batch.inputs)?,
            target: drop_batch(batch.targets)?,
            encoded_input: drop_batch(encoded_input)?,
            encoded_target: drop_batch(encoded_target)?,
        })
    }
}

/// Read, check and split the data described by a manifest, then fit the
/// encodings on the training split.
pub fn load_dataset<T: Scalar>(manifest: &DatasetManifest) -> Result<Dataset<T>> {
    let name = if manifest.name.is_empty() { "dataset" } else { &manifest.name };
    if manifest.inputs.as_os_str().is_empty() {
        return Err(Error::Data(format!("manifest `{name}` has no inputs path")));
    }
    let mut inputs = read_any(&manifest.inputs)?.cast::<T>();
    let (inputs, targets) = match manifest.windowing {
        None => {
            let path = manifest
                .targets
                .as_ref()
                .ok_or_else(|| Error::Data(format!("manifest `{name}` has no targets path")))?;
            let mut targets = read_any(path)?.cast::<T>();
            if manifest.subsample != 1 {
                inputs = darcy_subsample(&inputs, manifest.subsample)?;
                targets = darcy_subsample(&targets, manifest.subsample)?;
            }
            (inputs, targets)
        }
        Some(w) => {
            if manifest.subsample != 1 {
                inputs = darcy_subsample(&inputs, manifest.subsample)?;
            }
            window_all(&inputs, w)?
        }
    };
    let (n, c_in, h, w) = inputs.dims4()?;
    let (nt, c_out, _, _) = targets.dims4()?;
    if (h, w) != manifest.mesh {
        return Err(Error::Data(format!(
            "{}: grid {h}x{w} does not match manifest mesh {}x{}",
            manifest.inputs.display(),
            manifest.mesh.0,
            manifest.mesh.1
        )));
    }
    if nt != n {
        return Err(Error::Data(format!("{n} input samples but {nt} target samples")));
    }
    let needed = manifest.n_train + manifest.n_test;
    if needed > n {
        return Err(Error::Data(format!(
            "manifest asks for {} train + {} test samples, file holds {n}",
            manifest.n_train, manifest.n_test
        )));
    }
    if !manifest.channels.is_empty() {
        let declared = match manifest.windowing {
            None => c_in + c_out,
            Some(w) => c_in / w.history,
        };
        if manifest.channels.len() != declared {
            return Err(Error::Data(format!(
                "manifest labels {} channels, data has {declared}",
                manifest.channels.len()
            )));
        }
    }
    if let Some(path) = &manifest.sample_ids {
        check_disjoint(&read_any(path)?.cast::<f64>(), manifest.n_train, manifest.n_test)?;
    }
    let all = Split::new(inputs, targets)?;
    let train_idx: Vec<usize> = (0..manifest.n_train).collect();
    let test_idx: Vec<usize> = (manifest.n_train..needed).collect();
    Dataset::new(
        name,
        all.gather(&train_idx)?,
        all.gather(&test_idx)?,
        manifest.normalize,
        manifest.append_coords,
        manifest.windowing,
    )
}

/// `(N, T, H, W)` or `(N, C_t, T, H, W)` trajectories to stacked windows.
fn window_all<T: Scalar>(traj: &Tensor<T>, w: Windowing) -> Result<(Tensor<T>, Tensor<T>)> {
    let shape = traj.shape();
    let (n, ct, t, h, wd) = match *shape {
        [n, t, h, w] => (n, 1, t, h, w),
        [n, c, t, h, w] => (n, c, t, h, w),
        _ => {
            return Err(Error::Data(format!(
                "trajectories must be (N, T, H, W) or (N, C, T, H, W), got {shape:?}"
            )))
        }
    };
    let per = ct * t * h * wd;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for s in 0..n {
        let one = Tensor::from_vec(&[ct, t, h, wd], traj.data()[s * per..(s + 1) * per].to_vec())?;
        let (x, y) = ns_windows(&one, w.history, w.horizon)?;
        xs.extend_from_slice(x.data());
        ys.extend_from_slice(y.data());
    }
    Ok((
        Tensor::from_vec(&[n, ct * w.history, h, wd], xs)?,
        Tensor::from_vec(&[n, ct * w.horizon, h, wd], ys)?,
    ))
}

fn check_disjoint(ids: &Tensor<f64>, n_train: usize, n_test: usize) -> Result<()> {
    if ids.rank() != 1 || ids.len() < n_train + n_test {
        return Err(Error::Data(format!(
            "sample ids must be a vector of at least {} entries, got {:?}",
            n_train + n_test,
            ids.shape()
        )));
    }
    let train: HashSet<u64> = ids.data()[..n_train].iter().map(|v| v.to_bits()).collect();
    if let Some(dup) = ids.data()[n_train..n_train + n_test].iter().find(|v| train.contains(&v.to_bits())) {
        return Err(Error::Data(format!("sample id {dup} appears in both train and test splits")));
    }
    Ok(())
}
