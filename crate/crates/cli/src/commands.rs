//! The train, evaluate and export commands.

use std::fs;
use std::path::{Path, PathBuf};

use dseno_core::data::SplitKind;
use dseno_core::kv::KvDoc;
use dseno_core::train::{evaluate, predict, train, EpochRecord, TrainOutputs, TrainReport, TrainState};
use dseno_core::{DType, Error, Result, Scalar};

use crate::config::{read_doc, RunConfig};
use crate::export::{write_fields, FieldFormat};
use crate::inspect::millions;

/// Per-epoch progress callback.
pub type Progress<'a> = &'a mut (dyn FnMut(&EpochRecord) + Send);

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub label: String,
    pub dtype: DType,
    pub out: PathBuf,
    pub report: TrainReport,
}

impl RunSummary {
    /// `key: value` lines; the last epoch and the best test epoch are both listed.
    pub fn render(&self) -> String {
        let r = &self.report;
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
        format!(
            "model: {}\nparams: {} ({})\ndtype: {}\nepochs: {}\nfinal_train_rel_l2: {}\nfinal_test_rel_l2: {:.6e}\n\
             best_test_rel_l2: {:.6e}\nbest_epoch: {}\n",
            self.label,
            r.params,
            millions(r.params),
            self.dtype,
            r.epochs,
            opt(r.final_train),
            r.final_test,
            r.best_test,
            r.best_epoch.map_or("n/a".to_string(), |e| e.to_string()),
        )
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Overrides applied on top of a configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, doc: &mut KvDoc) {
        if let Some(s) = self.seed {
            doc.set("seed", s);
        }
        if let Some(e) = self.epochs {
            doc.set("epochs", e);
        }
        if let Some(o) = &self.out {
            doc.set("out", o.display());
        }
        if let Some(t) = self.threads {
            doc.set("threads", t);
        }
    }
}

pub fn cmd_train(config: &Path, overrides: &Overrides, resume: bool, progress: Progress) -> Result<RunSummary> {
    let mut doc = read_doc(config)?;
    overrides.apply(&mut doc);
    train_doc(doc, config.parent().unwrap_or(Path::new(".")), resume, progress)
}

/// Train the run a configuration document describes. The output directory
/// receives `config.cfg`, `metrics.csv`, `checkpoints/{last,best}` and
/// `report.txt`.
pub fn train_doc(doc: KvDoc, base_dir: &Path, resume: bool, progress: Progress) -> Result<RunSummary> {
    let rc = RunConfig::from_doc(doc, base_dir)?;
    match rc.train.dtype {
        DType::F32 => run::<f32>(&rc, resume, progress),
        DType::F64 => run::<f64>(&rc, resume, progress),
    }
}

fn run<T: Scalar>(rc: &RunConfig, resume: bool, progress: Progress) -> Result<RunSummary> {
    fs::create_dir_all(&rc.out).map_err(io(&rc.out))?;
    let cfg_path = rc.out.join("config.cfg");
    fs::write(&cfg_path, rc.resolved_text()).map_err(io(&cfg_path))?;
    let ckpt = rc.out.join("checkpoints");
    let metrics = rc.out.join("metrics.csv");

    let last = ckpt.join("last");
    let mut state = if resume && last.exists() {
        let state = TrainState::<T>::load(&last)?;
        if state.model.architecture() != rc.arch {
            return Err(Error::Config(format!(
                "{} holds a different architecture than the configuration",
                last.display()
            )));
        }
        state
    } else {
        if metrics.exists() {
            fs::remove_file(&metrics).map_err(io(&metrics))?;
        }
        TrainState::new(&rc.arch, rc.train.seed)?
    };
    state.config_text = rc.resolved_text();
    let data = rc.dataset::<T>(state.normalizers.as_ref())?;
    let outputs = TrainOutputs {
        checkpoint_dir: Some(ckpt),
        metrics_csv: Some(metrics),
    };
    let report = train(&mut state, &data, &rc.train, &outputs, progress)?;
    let summary = RunSummary {
        label: rc.label.clone(),
        dtype: rc.train.dtype,
        out: rc.out.clone(),
        report,
    };
    let path = rc.out.join("report.txt");
    fs::write(&path, summary.render()).map_err(io(&path))?;
    Ok(summary)
}

fn checkpoint_dtype(dir: &Path) -> Result<DType> {
    let meta = read_doc(&dir.join("meta.txt"))?;
    let name: String = meta.require("dtype")?;
    DType::parse(&name).ok_or_else(|| meta.err(format!("unknown dtype `{name}`")))
}

/// Run configuration stored with a checkpoint, or an explicit one.
fn checkpoint_config<T: Scalar>(state: &TrainState<T>, config: Option<&Path>) -> Result<RunConfig> {
    match config {
        Some(path) => RunConfig::load(path),
        None if state.config_text.is_empty() => Err(Error::Config(
            "checkpoint carries no run configuration; pass --config".into(),
        )),
        None => RunConfig::from_doc(KvDoc::parse(&state.config_text, "checkpoint config.cfg")?, Path::new(".")),
    }
}

pub fn parse_split(s: &str) -> Result<SplitKind> {
    match s {
        "train" => Ok(SplitKind::Train),
        "test" => Ok(SplitKind::Test),
        other => Err(Error::Config(format!("unknown split `{other}` (expected train or test)"))),
    }
}

/// Mean relative L2 error of a checkpoint on one split.
pub fn cmd_evaluate(checkpoint: &Path, config: Option<&Path>, split: SplitKind) -> Result<f64> {
    match checkpoint_dtype(checkpoint)? {
        DType::F32 => evaluate_as::<f32>(checkpoint, config, split),
        DType::F64 => evaluate_as::<f64>(checkpoint, config, split),
    }
}

fn evaluate_as<T: Scalar>(checkpoint: &Path, config: Option<&Path>, split: SplitKind) -> Result<f64> {
    let state = TrainState::<T>::load(checkpoint)?;
    let rc = checkpoint_config(&state, config)?;
    let data = rc.dataset::<T>(state.normalizers.as_ref())?;
    evaluate(&state.model, &data, split, rc.train.batch_size)
}

/// Export ground truth, prediction and error of one sample.
pub fn cmd_export(
    checkpoint: &Path,
    config: Option<&Path>,
    split: SplitKind,
    sample: usize,
    format: FieldFormat,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    match checkpoint_dtype(checkpoint)? {
        DType::F32 => export_as::<f32>(checkpoint, config, split, sample, format, out),
        DType::F64 => export_as::<f64>(checkpoint, config, split, sample, format, out),
    }
}

fn export_as<T: Scalar>(
    checkpoint: &Path,
    config: Option<&Path>,
    split: SplitKind,
    sample: usize,
    format: FieldFormat,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let state = TrainState::<T>::load(checkpoint)?;
    let rc = checkpoint_config(&state, config)?;
    let data = rc.dataset::<T>(state.normalizers.as_ref())?;
    let n = data.split(split).len();
    if sample >= n {
        return Err(Error::Config(format!("sample {sample} out of range: the split holds {n}")));
    }
    let pred = predict(&state.model, &data, split, &[sample])?.cast::<f64>();
    let truth = data.split(split).gather(&[sample])?.targets.cast::<f64>();
    let shape = truth.shape()[1..].to_vec();
    let name = match split {
        SplitKind::Train => "train",
        SplitKind::Test => "test",
    };
    write_fields(
        out,
        &format!("{name}_{sample}"),
        &truth.reshape(&shape)?,
        &pred.reshape(&shape)?,
        format,
    )
}
