//! Loss, optimizer, schedule, the epoch loop with checkpoints, and the
//! autoregressive rollout protocol.

mod checkpoint;
mod engine;
mod loss;
mod optim;
mod rollout;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dseno::Architecture;
use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::model::AnyModel;
use crate::tensor::{DType, Scalar};
use crate::data::Normalizer;

pub use checkpoint::{config_digest, read_history, CHECKPOINT_FORMAT};
pub use engine::{evaluate, loss_and_backward, predict, train, TrainOutputs};
pub use loss::{relative_l2, relative_l2_per_sample, relative_l2_with_grad};
pub use optim::{clip_grad_norm, lr_schedule, optimizer_step, Moments, ADAM_EPS, BETA1, BETA2};
pub use rollout::{rollout_eval, rollout_with, RolloutOutput};

/// Keys understood by [`TrainConfig::from_kv`].
pub const TRAIN_KEYS: &[&str] = &[
    "n_train",
    "n_test",
    "epochs",
    "batch_size",
    "lr",
    "step_size",
    "gamma",
    "weight_decay",
    "seed",
    "dtype",
    "checkpoint_every",
    "grad_clip",
    "threads",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Zero means evaluate only.
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub step_size: usize,
    pub gamma: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub dtype: DType,
    /// Save a checkpoint every this many epochs; 0 saves only at the end.
    pub checkpoint_every: usize,
    /// Joint gradient-norm bound; off when `None`.
    pub grad_clip: Option<f64>,
    /// Worker threads; 0 uses the process-wide pool.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_train: 1000,
            n_test: 200,
            epochs: 500,
            batch_size: 20,
            lr: 1e-3,
            step_size: 100,
            gamma: 0.5,
            weight_decay: 1e-4,
            seed: 0,
            dtype: DType::F32,
            checkpoint_every: 0,
            grad_clip: None,
            threads: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.step_size == 0 {
            return Err(Error::Config("batch_size and step_size must be positive".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite() && self.gamma > 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::Config("lr, gamma and weight_decay must be finite and non-negative".into()));
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config("grad_clip must be positive".into()));
        }
        Ok(())
    }

    /// Defaults overridden by whichever [`TRAIN_KEYS`] the document holds.
    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let d = Self::default();
        let dtype = match doc.get("dtype") {
            Some(s) => DType::parse(s).ok_or_else(|| doc.err(format!("unknown dtype `{s}`")))?,
            None => d.dtype,
        };
        let grad_clip = match doc.get("grad_clip") {
            None | Some("off") | Some("none") => None,
            Some(_) => Some(doc.require::<f64>("grad_clip")?),
        };
        let cfg = Self {
            n_train: doc.value_or("n_train", d.n_train)?,
            n_test: doc.value_or("n_test", d.n_test)?,
            epochs: doc.value_or("epochs", d.epochs)?,
            batch_size: doc.value_or("batch_size", d.batch_size)?,
            lr: doc.value_or("lr", d.lr)?,
            step_size: doc.value_or("step_size", d.step_size)?,
            gamma: doc.value_or("gamma", d.gamma)?,
            weight_decay: doc.value_or("weight_decay", d.weight_decay)?,
            seed: doc.value_or("seed", d.seed)?,
            dtype,
            checkpoint_every: doc.value_or("checkpoint_every", d.checkpoint_every)?,
            grad_clip,
            threads: doc.value_or("threads", d.threads)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn write_kv(&self, doc: &mut KvDoc) {
        doc.set("n_train", self.n_train);
        doc.set("n_test", self.n_test);
        doc.set("epochs", self.epochs);
        doc.set("batch_size", self.batch_size);
        doc.set("lr", self.lr);
        doc.set("step_size", self.step_size);
        doc.set("gamma", self.gamma);
        doc.set("weight_decay", self.weight_decay);
        doc.set("seed", self.seed);
        doc.set("dtype", self.dtype);
        doc.set("checkpoint_every", self.checkpoint_every);
        doc.set("grad_clip", self.grad_clip.map_or("off".to_string(), |c| c.to_string()));
        doc.set("threads", self.threads);
    }
}

/// Metrics of one completed epoch; `epoch` is zero-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_rel_l2: f64,
    pub test_rel_l2: f64,
    pub wall_seconds: f64,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Debug, Clone)]
pub struct TrainState<T: Scalar> {
    pub model: AnyModel<T>,
    pub moments: Moments<T>,
    /// Completed epochs.
    pub epoch: usize,
    /// Completed optimizer updates.
    pub step: u64,
    pub seed: u64,
    pub history: Vec<EpochRecord>,
    /// Input and output encodings the model was trained with.
    pub normalizers: Option<(Normalizer, Normalizer)>,
    /// Resolved run configuration, stored with checkpoints.
    pub config_text: String,
}

/// Generator for model initialization (`stream = 0`) and for the shuffle of
/// epoch `e` (`stream = e + 1`).
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl<T: Scalar> TrainState<T> {
    /// Fresh model initialized from `seed`.
    pub fn new(arch: &Architecture, seed: u64) -> Result<Self> {
        let model = AnyModel::new(arch, &mut seeded_rng(seed, 0))?;
        Ok(Self::from_model(model, seed))
    }

    pub fn from_model(model: AnyModel<T>, seed: u64) -> Self {
        let moments = Moments::zeros_like(model.params().into_iter().map(|(_, p)| p));
        Self {
            model,
            moments,
            epoch: 0,
            step: 0,
            seed,
            history: Vec::new(),
            normalizers: None,
            config_text: String::new(),
        }
    }

    pub fn report(&self, final_test: f64) -> TrainReport {
        let best = self
            .history
            .iter()
            .min_by(|a, b| a.test_rel_l2.total_cmp(&b.test_rel_l2));
        TrainReport {
            epochs: self.epoch,
            params: self.model.parameter_count(),
            final_train: self.history.last().map(|r| r.train_rel_l2),
            final_test,
            best_test: best.map_or(final_test, |r| r.test_rel_l2.min(final_test)),
            best_epoch: best.map(|r| r.epoch),
        }
    }
}

/// Summary of a run: the last epoch's numbers and the best test epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    pub params: usize,
    pub final_train: Option<f64>,
    pub final_test: f64,
    pub best_test: f64,
    pub best_epoch: Option<usize>,
}
