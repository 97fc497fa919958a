//! Checkpoint directories.
//!
//! ```text
//! meta.txt          epoch, step, seed, dtype, params, config_sha256
//! model.cfg         architecture
//! config.cfg        resolved run configuration (when known)
//! history.csv       epoch,lr,train_rel_l2,test_rel_l2
//! params/NAME.dsnt  one file per parameter
//! moments/m/NAME.dsnt, moments/v/NAME.dsnt
//! norm_input.dsnt, norm_output.dsnt   (2, C) mean and scale rows
//! ```
//!
//! Nothing time-dependent is stored, so identical runs give byte-identical
//! directories.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::data::format::{read_tensor, write_tensor};
use crate::data::Normalizer;
use crate::dseno::Architecture;
use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::model::AnyModel;
use crate::tensor::{DType, Scalar, Tensor};

use super::{EpochRecord, Moments, TrainState};

pub const CHECKPOINT_FORMAT: u32 = 1;
const HISTORY_HEADER: &str = "epoch,lr,train_rel_l2,test_rel_l2";

/// Hex SHA-256 of a configuration text.
pub fn config_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

impl<T: Scalar> TrainState<T> {
    /// Write the state to `dir`, replacing any previous contents once the
    /// new copy is complete.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let staging = sibling(dir, "partial");
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        self.write_into(&staging)?;
        if dir.exists() {
            fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::rename(&staging, dir).map_err(|e| Error::io(dir, e))
    }

    fn write_into(&self, dir: &Path) -> Result<()> {
        for sub in ["params", "moments/m", "moments/v"] {
            mkdir(&dir.join(sub))?;
        }
        let mut meta = KvDoc::new("meta");
        meta.set("format", CHECKPOINT_FORMAT);
        meta.set("epoch", self.epoch);
        meta.set("step", self.step);
        meta.set("seed", self.seed);
        meta.set("dtype", T::DTYPE);
        meta.set("params", self.model.parameter_count());
        meta.set("config_sha256", config_digest(&self.config_text));
        write_text(&dir.join("meta.txt"), &meta.render())?;
        write_text(&dir.join("model.cfg"), &self.model.architecture().to_kv()?.render())?;
        if !self.config_text.is_empty() {
            write_text(&dir.join("config.cfg"), &self.config_text)?;
        }
        let mut history = format!("{HISTORY_HEADER}\n");
        for r in &self.history {
            history.push_str(&format!("{},{},{},{}\n", r.epoch, r.lr, r.train_rel_l2, r.test_rel_l2));
        }
        write_text(&dir.join("history.csv"), &history)?;

        let params = self.model.params();
        for (i, (name, p)) in params.iter().enumerate() {
            let file = format!("{name}.dsnt");
            write_tensor(dir.join("params").join(&file), &without_grad(p))?;
            write_tensor(dir.join("moments/m").join(&file), &self.moments.first[i])?;
            write_tensor(dir.join("moments/v").join(&file), &self.moments.second[i])?;
        }
        if let Some((input, output)) = &self.normalizers {
            write_tensor(dir.join("norm_input.dsnt"), &input.to_tensor())?;
            write_tensor(dir.join("norm_output.dsnt"), &output.to_tensor())?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta_path = dir.join("meta.txt");
        let meta = KvDoc::parse(&read_text(&meta_path)?, meta_path.display().to_string())?;
        let format: u32 = meta.require("format")?;
        if format != CHECKPOINT_FORMAT {
            return Err(Error::format(&meta_path, format!("unsupported checkpoint format {format}")));
        }
        let dtype = meta.require::<String>("dtype")?;
        let found = DType::parse(&dtype).ok_or_else(|| Error::format(&meta_path, format!("unknown dtype `{dtype}`")))?;
        if found != T::DTYPE {
            return Err(Error::DTypeMismatch {
                expected: T::DTYPE.name(),
                found: found.name(),
            });
        }
        let model_path = dir.join("model.cfg");
        let arch = Architecture::from_kv(&KvDoc::parse(&read_text(&model_path)?, model_path.display().to_string())?)?;
        let seed: u64 = meta.require("seed")?;
        let mut model = AnyModel::<T>::new(&arch, &mut super::seeded_rng(seed, 0))?;
        let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
        let read_all = |sub: &str| -> Result<Vec<Tensor<T>>> {
            names
                .iter()
                .map(|n| read_tensor(dir.join(sub).join(format!("{n}.dsnt"))))
                .collect()
        };
        model.load_params(&read_all("params")?)?;
        let moments = Moments {
            first: read_all("moments/m")?,
            second: read_all("moments/v")?,
        };
        for ((n, p), m) in model.params().iter().zip(&moments.first) {
            if p.shape() != m.shape() {
                return Err(Error::Data(format!("moment buffer for {n} has shape {:?}", m.shape())));
            }
        }
        let norm = |f: &str| -> Result<Option<Normalizer>> {
            let path = dir.join(f);
            if path.exists() {
                Ok(Some(Normalizer::from_tensor(&read_tensor::<f64>(&path)?)?))
            } else {
                Ok(None)
            }
        };
        let normalizers = match (norm("norm_input.dsnt")?, norm("norm_output.dsnt")?) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        };
        let config_path = dir.join("config.cfg");
        let config_text = if config_path.exists() { read_text(&config_path)? } else { String::new() };
        Ok(Self {
            model,
            moments,
            epoch: meta.require("epoch")?,
            step: meta.require("step")?,
            seed,
            history: read_history(&dir.join("history.csv"))?,
            normalizers,
            config_text,
        })
    }
}

fn without_grad<T: Scalar>(p: &Tensor<T>) -> Tensor<T> {
    let mut p = p.clone();
    p.clear_grad();
    p
}

fn sibling(dir: &Path, suffix: &str) -> PathBuf {
    let mut name = dir.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".{suffix}"));
    dir.with_file_name(name)
}

/// Parse a history file written by a checkpoint or a metrics CSV; extra
/// trailing columns are ignored and wall time is read when present.
pub fn read_history(path: &Path) -> Result<Vec<EpochRecord>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.starts_with(HISTORY_HEADER) => {}
        _ => return Err(Error::format(path, "missing history header")),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let num = |i: usize| -> Result<f64> {
                f.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::format(path, format!("bad history line `{line}`")))
            };
            Ok(EpochRecord {
                epoch: num(0)? as usize,
                lr: num(1)?,
                train_rel_l2: num(2)?,
                test_rel_l2: num(3)?,
                wall_seconds: if f.len() > 4 { num(4)? } else { 0.0 },
            })
        })
        .collect()
}
