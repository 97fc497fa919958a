use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kv::{join, KvDoc};

use super::normalize::NormPolicy;

/// Keys accepted in a manifest file.
pub const MANIFEST_KEYS: &[&str] = &[
    "name",
    "n_train",
    "n_test",
    "inputs",
    "targets",
    "mesh",
    "channels",
    "normalize",
    "append_coords",
    "ns_history",
    "ns_horizon",
    "subsample",
    "sample_ids",
];

/// Trajectory windowing for time-dependent data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Windowing {
    pub history: usize,
    pub horizon: usize,
}

/// Where one benchmark split lives and how to prepare it.
///
/// Static data stores inputs as `(N, C_in, H, W)` and targets as
/// `(N, C_out, H, W)`. Trajectory data (`ns_history` set) stores one file of
/// `(N, T, H, W)` scalar or `(N, C_t, T, H, W)` vector trajectories in
/// `inputs` and no `targets`. The first `n_train` samples form the training
/// split and the next `n_test` the test split.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub n_train: usize,
    pub n_test: usize,
    pub inputs: PathBuf,
    pub targets: Option<PathBuf>,
    /// Grid after subsampling, `(H, W)`.
    pub mesh: (usize, usize),
    pub channels: Vec<String>,
    pub normalize: NormPolicy,
    pub append_coords: bool,
    pub windowing: Option<Windowing>,
    /// Stride applied to both spatial axes when loading.
    pub subsample: usize,
    /// Optional rank-1 tensor of sample identifiers used to check that the
    /// splits are disjoint.
    pub sample_ids: Option<PathBuf>,
}

impl DatasetManifest {
    /// Parse manifest text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path, origin: &str) -> Result<Self> {
        let doc = KvDoc::parse(text, origin)?;
        doc.reject_unknown(MANIFEST_KEYS)?;
        let path = |key: &str| doc.get(key).filter(|p| !p.is_empty()).map(|p| base_dir.join(p));
        let mesh = match doc.list::<usize>("mesh")?.as_deref() {
            Some([h, w]) => (*h, *w),
            Some(_) => return Err(doc.err("`mesh` takes two values, H and W")),
            None => return Err(doc.err("missing required key `mesh`")),
        };
        let normalize = match doc.get("normalize") {
            Some(p) => NormPolicy::parse(p).ok_or_else(|| doc.err(format!("unknown normalize policy `{p}`")))?,
            None => NormPolicy::ZScore,
        };
        let windowing = match (doc.value::<usize>("ns_history")?, doc.value::<usize>("ns_horizon")?) {
            (Some(history), Some(horizon)) => Some(Windowing { history, horizon }),
            (None, None) => None,
            _ => return Err(doc.err("`ns_history` and `ns_horizon` go together")),
        };
        Ok(Self {
            name: doc.value_or("name", String::new())?,
            n_train: doc.require("n_train")?,
            n_test: doc.require("n_test")?,
            inputs: path("inputs").unwrap_or_default(),
            targets: path("targets"),
            mesh,
            channels: doc.list("channels")?.unwrap_or_default(),
            normalize,
            append_coords: doc.flag("append_coords")?.unwrap_or(false),
            windowing,
            subsample: doc.value_or("subsample", 1)?,
            sample_ids: path("sample_ids"),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, &path.display().to_string()).map_err(|e| match e {
            Error::Config(msg) => Error::Format {
                path: path.to_path_buf(),
                msg,
            },
            other => other,
        })
    }

    /// Text form with paths written relative to `base_dir` where possible.
    pub fn render(&self, base_dir: &Path) -> String {
        let rel = |p: &Path| p.strip_prefix(base_dir).unwrap_or(p).display().to_string();
        let mut doc = KvDoc::new("manifest");
        doc.set("name", &self.name);
        doc.set("n_train", self.n_train);
        doc.set("n_test", self.n_test);
        doc.set("inputs", rel(&self.inputs));
        if let Some(t) = &self.targets {
            doc.set("targets", rel(t));
        }
        doc.set("mesh", join([self.mesh.0, self.mesh.1]));
        if !self.channels.is_empty() {
            doc.set("channels", join(&self.channels));
        }
        doc.set("normalize", self.normalize.name());
        doc.set("append_coords", self.append_coords);
        if let Some(w) = self.windowing {
            doc.set("ns_history", w.history);
            doc.set("ns_horizon", w.horizon);
        }
        if self.subsample != 1 {
            doc.set("subsample", self.subsample);
        }
        if let Some(p) = &self.sample_ids {
            doc.set("sample_ids", rel(p));
        }
        doc.render()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        fs::write(path, self.render(base)).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DARCY: &str = "name = darcy\nn_train = 1000\nn_test = 200\ninputs = a.dsnt\ntargets = u.dsnt\n\
                         mesh = 85, 85\nchannels = a, u\nappend_coords = true\nsubsample = 5\n";

    #[test]
    fn parse_render_round_trip() {
        let base = Path::new("/data");
        let m = DatasetManifest::parse(DARCY, base, "m").unwrap();
        assert_eq!(m.inputs, Path::new("/data/a.dsnt"));
        assert_eq!(m.mesh, (85, 85));
        assert_eq!(m.subsample, 5);
        let again = DatasetManifest::parse(&m.render(base), base, "m").unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn unknown_keys_and_half_windowing_are_rejected() {
        let base = Path::new(".");
        assert!(DatasetManifest::parse(&format!("{DARCY}colour = red\n"), base, "m").is_err());
        assert!(DatasetManifest::parse(&format!("{DARCY}ns_history = 10\n"), base, "m").is_err());
    }
}
