//! Run configuration files.
//!
//! A run configuration is a `key = value` document combining the
//! architecture keys, the training keys and the keys below. Every key is
//! optional:
//!
//! | key          | default                     | meaning                                   |
//! |--------------|-----------------------------|-------------------------------------------|
//! | `manifest`   | none                        | dataset manifest; relative to the config  |
//! | `synthetic`  | `darcy` without a manifest  | `darcy` or `ns` generated data            |
//! | `resolution` | 85 (darcy), 64 (ns)         | grid of generated data                    |
//! | `data_seed`  | 0                           | seed of generated data                    |
//! | `history`    | 10                          | input frames of generated trajectories    |
//! | `horizon`    | 10                          | predicted frames of generated trajectories|
//! | `out`        | `run`                       | output directory                          |
//!
//! Without `model` or `family` the model is the `Darcy-F` table row.

use std::fs;
use std::path::{Path, PathBuf};

use dseno_core::data::synthetic::{darcy_dataset, ns_dataset, NsParams};
use dseno_core::data::{load_dataset, Dataset, DatasetManifest, Normalizer, Windowing};
use dseno_core::dseno::ARCH_KEYS;
use dseno_core::kv::KvDoc;
use dseno_core::train::{TrainConfig, TRAIN_KEYS};
use dseno_core::{Architecture, Error, Result, Scalar};

pub const DATA_KEYS: &[&str] = &["manifest", "synthetic", "resolution", "data_seed", "history", "horizon", "out"];
pub const DEFAULT_MODEL: &str = "Darcy-F";

/// Every key a run configuration may contain.
pub fn run_keys() -> Vec<&'static str> {
    let mut keys: Vec<&str> = ARCH_KEYS.iter().chain(TRAIN_KEYS).chain(DATA_KEYS).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    keys
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Manifest(DatasetManifest),
    Darcy { resolution: usize, seed: u64 },
    NavierStokes { resolution: usize, seed: u64, window: Windowing },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Table row name, or `custom` for a model spelled out key by key.
    pub label: String,
    pub arch: Architecture,
    pub train: TrainConfig,
    pub data: DataSource,
    pub out: PathBuf,
    resolved: KvDoc,
}

/// Model named by a document, with `model` defaulting to [`DEFAULT_MODEL`].
pub fn architecture(doc: &KvDoc) -> Result<(String, Architecture)> {
    let mut doc = doc.clone();
    if doc.get("model").is_none() && doc.get("family").is_none() {
        doc.set("model", DEFAULT_MODEL);
    }
    let label = doc.get("model").unwrap_or("custom").to_string();
    Ok((label, Architecture::from_kv(&doc)?))
}

pub fn read_doc(path: &Path) -> Result<KvDoc> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    KvDoc::parse(&text, path.display().to_string())
}

impl RunConfig {
    /// Read a configuration file; `manifest` paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_doc(read_doc(path)?, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_doc(mut doc: KvDoc, base_dir: &Path) -> Result<Self> {
        doc.reject_unknown(&run_keys())?;
        if doc.get("model").is_none() && doc.get("family").is_none() {
            doc.set("model", DEFAULT_MODEL);
        }
        let (label, arch) = architecture(&doc)?;

        let data = match (doc.get("manifest"), doc.get("synthetic")) {
            (Some(_), Some(_)) => return Err(doc.err("give either `manifest` or `synthetic`, not both")),
            (Some(m), None) => {
                let path = base_dir.join(m);
                let manifest = DatasetManifest::load(&path)?;
                // Split sizes come from the manifest unless the run overrides them.
                for (key, v) in [("n_train", manifest.n_train), ("n_test", manifest.n_test)] {
                    if doc.get(key).is_none() {
                        doc.set(key, v);
                    }
                }
                doc.set("manifest", path.canonicalize().unwrap_or(path).display());
                DataSource::Manifest(manifest)
            }
            (None, kind) => {
                let kind = kind.unwrap_or("darcy").to_string();
                let seed = doc.value_or("data_seed", 0)?;
                let source = match kind.as_str() {
                    "darcy" => DataSource::Darcy {
                        resolution: doc.value_or("resolution", 85)?,
                        seed,
                    },
                    "ns" => DataSource::NavierStokes {
                        resolution: doc.value_or("resolution", 64)?,
                        seed,
                        window: Windowing {
                            history: doc.value_or("history", 10)?,
                            horizon: doc.value_or("horizon", 10)?,
                        },
                    },
                    other => return Err(doc.err(format!("unknown synthetic data `{other}` (expected darcy or ns)"))),
                };
                doc.set("synthetic", &kind);
                match &source {
                    DataSource::Darcy { resolution, seed } => {
                        doc.set("resolution", resolution);
                        doc.set("data_seed", seed);
                    }
                    DataSource::NavierStokes { resolution, seed, window } => {
                        doc.set("resolution", resolution);
                        doc.set("data_seed", seed);
                        doc.set("history", window.history);
                        doc.set("horizon", window.horizon);
                    }
                    DataSource::Manifest(_) => unreachable!(),
                }
                source
            }
        };
        if matches!(data, DataSource::Manifest(_)) {
            for key in ["resolution", "data_seed", "history", "horizon"] {
                if doc.get(key).is_some() {
                    return Err(doc.err(format!("`{key}` applies to synthetic data only")));
                }
            }
        }

        let train = TrainConfig::from_kv(&doc)?;
        train.write_kv(&mut doc);
        let out = PathBuf::from(doc.get("out").unwrap_or("run"));
        doc.set("out", out.display());
        Ok(Self {
            label,
            arch,
            train,
            data,
            out,
            resolved: doc,
        })
    }

    /// The configuration with every default filled in; running it again
    /// reproduces this run.
    pub fn resolved_text(&self) -> String {
        self.resolved.render()
    }

    pub fn resolved(&self) -> &KvDoc {
        &self.resolved
    }

    /// Training and test data, optionally with encodings from a checkpoint.
    pub fn dataset<T: Scalar>(&self, normalizers: Option<&(Normalizer, Normalizer)>) -> Result<Dataset<T>> {
        let (n_train, n_test) = (self.train.n_train, self.train.n_test);
        let data = match &self.data {
            DataSource::Manifest(m) => load_dataset(&DatasetManifest {
                n_train,
                n_test,
                ..m.clone()
            })?,
            DataSource::Darcy { resolution, seed } => darcy_dataset(n_train, n_test, *resolution, *seed)?,
            DataSource::NavierStokes { resolution, seed, window } => {
                let params = NsParams {
                    resolution: *resolution,
                    frames: window.history + window.horizon,
                    ..NsParams::default()
                };
                ns_dataset(n_train, n_test, &params, *window, *seed)?
            }
        };
        match normalizers {
            None => Ok(data),
            Some((i, o)) => Dataset::with_normalizers(
                data.name.clone(),
                data.train.clone(),
                data.test.clone(),
                i.clone(),
                o.clone(),
                data.append_coords(),
                data.windowing(),
            ),
        }
    }
}
