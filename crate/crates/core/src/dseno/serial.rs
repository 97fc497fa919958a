//! Architecture descriptions as key-value documents.
//!
//! A document either names a table row (`model = Darcy-F`) and optionally
//! overrides some of its fields, or spells out a model from scratch starting
//! with `family = dseno` or `family = fno+`.

use crate::error::{Error, Result};
use crate::fno::FnoPlusConfig;
use crate::kv::{join, KvDoc};
use crate::nn::PaddingMode;
use crate::tensor::DType;

use super::config::{ConvSpec, DsBlockConfig, Mixer, ModelConfig, SeConfig};
use super::tables::{reconstruct_row, Architecture, PROJ_HIDDEN};

/// Keys understood by [`Architecture::from_kv`].
pub const ARCH_KEYS: &[&str] = &[
    "model",
    "family",
    "in_channels",
    "out_channels",
    "width",
    "proj_hidden",
    "append_coords",
    "dtype",
    "dilation_h",
    "dilation_w",
    "kernel1",
    "bias1",
    "kernel2",
    "bias2",
    "mixer",
    "se_reduction",
    "padding",
    "layers",
    "modes",
];

const DSENO_ONLY: &[&str] = &[
    "append_coords",
    "dilation_h",
    "dilation_w",
    "kernel1",
    "bias1",
    "kernel2",
    "bias2",
    "mixer",
    "se_reduction",
    "padding",
];
const FNO_ONLY: &[&str] = &["layers", "modes"];

impl Architecture {
    /// Build from a document; keys outside [`ARCH_KEYS`] are ignored here so
    /// callers can mix in their own sections.
    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let base = match (doc.get("model"), doc.get("family")) {
            (Some(_), Some(_)) => return Err(doc.err("give either `model` or `family`, not both")),
            (Some(row), None) => reconstruct_row(row)?,
            (None, Some("dseno")) => Architecture::Dseno(dseno_skeleton(doc)?),
            (None, Some("fno+")) => Architecture::FnoPlus(fno_skeleton(doc)?),
            (None, Some(other)) => return Err(doc.err(format!("unknown model family `{other}`"))),
            (None, None) => return Err(doc.err("missing `model` or `family`")),
        };
        let arch = match base {
            Architecture::Dseno(c) => {
                reject_present(doc, FNO_ONLY, "D-SENO")?;
                Architecture::Dseno(dseno_overrides(doc, c)?)
            }
            Architecture::FnoPlus(c) => {
                reject_present(doc, DSENO_ONLY, "FNO+")?;
                Architecture::FnoPlus(fno_overrides(doc, c)?)
            }
        };
        arch.validate()?;
        Ok(arch)
    }

    /// Explicit description; `from_kv` on the result rebuilds an equal value.
    /// Fails for D-SENO models whose blocks differ in anything but dilation.
    pub fn to_kv(&self) -> Result<KvDoc> {
        let mut doc = KvDoc::new("architecture");
        match self {
            Architecture::Dseno(c) => {
                let first = c
                    .blocks
                    .first()
                    .ok_or_else(|| Error::Config("a model needs at least one block".into()))?;
                if c.blocks.iter().any(|b| DsBlockConfig { dilation: first.dilation, ..*b } != *first) {
                    return Err(Error::Config(
                        "blocks differ in more than dilation; not representable".into(),
                    ));
                }
                let (dh, dw) = c.dilations();
                doc.set("family", "dseno");
                doc.set("in_channels", c.in_channels);
                doc.set("out_channels", c.out_channels);
                doc.set("width", c.width);
                doc.set("proj_hidden", c.proj_hidden);
                doc.set("append_coords", c.append_coords);
                doc.set("dtype", c.dtype);
                doc.set("dilation_h", join(dh));
                doc.set("dilation_w", join(dw));
                doc.set("kernel1", first.conv1.kernel);
                doc.set("bias1", first.conv1.bias);
                doc.set("kernel2", first.conv2.kernel);
                doc.set("bias2", first.conv2.bias);
                doc.set("mixer", first.mixer.name());
                if let Mixer::Se(se) = first.mixer {
                    doc.set("se_reduction", se.reduction);
                }
                doc.set("padding", first.padding.name());
            }
            Architecture::FnoPlus(c) => {
                doc.set("family", "fno+");
                doc.set("in_channels", c.in_channels);
                doc.set("out_channels", c.out_channels);
                doc.set("width", c.width);
                doc.set("proj_hidden", c.proj_hidden);
                doc.set("layers", c.n_layers);
                doc.set("modes", join(c.modes));
            }
        }
        Ok(doc)
    }
}

fn reject_present(doc: &KvDoc, keys: &[&str], family: &str) -> Result<()> {
    match keys.iter().find(|k| doc.get(k).is_some()) {
        Some(k) => Err(doc.err(format!("key `{k}` does not apply to {family} models"))),
        None => Ok(()),
    }
}

fn dseno_skeleton(doc: &KvDoc) -> Result<ModelConfig> {
    let width = doc.require("width")?;
    let n = doc.list::<usize>("dilation_h")?.map_or(0, |d| d.len());
    let proto = DsBlockConfig {
        width,
        dilation: [1, 1],
        conv1: ConvSpec { kernel: 3, bias: true },
        conv2: ConvSpec { kernel: 3, bias: true },
        mixer: Mixer::Se(SeConfig { channels: width, reduction: 1 }),
        padding: PaddingMode::Zero,
    };
    Ok(ModelConfig {
        in_channels: doc.require("in_channels")?,
        out_channels: doc.require("out_channels")?,
        width,
        blocks: vec![proto; n],
        proj_hidden: PROJ_HIDDEN,
        append_coords: false,
        dtype: DType::F32,
    })
}

fn dseno_overrides(doc: &KvDoc, mut c: ModelConfig) -> Result<ModelConfig> {
    if let Some(w) = doc.value("width")? {
        c = c.with_width(w);
    }
    c.in_channels = doc.value_or("in_channels", c.in_channels)?;
    c.out_channels = doc.value_or("out_channels", c.out_channels)?;
    c.proj_hidden = doc.value_or("proj_hidden", c.proj_hidden)?;
    c.append_coords = doc.flag("append_coords")?.unwrap_or(c.append_coords);
    if let Some(d) = doc.get("dtype") {
        c.dtype = DType::parse(d).ok_or_else(|| doc.err(format!("unknown dtype `{d}`")))?;
    }

    let proto = *c
        .blocks
        .first()
        .ok_or_else(|| doc.err("`dilation_h` must list at least one block"))?;
    let (old_h, old_w) = c.dilations();
    // A lone `dilation_h` describes an isotropic schedule.
    let (dh, dw) = match (doc.list::<usize>("dilation_h")?, doc.list::<usize>("dilation_w")?) {
        (Some(h), Some(w)) => (h, w),
        (Some(h), None) => (h.clone(), h),
        (None, Some(w)) => (old_h, w),
        (None, None) => (old_h, old_w),
    };
    if dh.len() != dw.len() || dh.is_empty() {
        return Err(doc.err(format!(
            "dilation_h has {} entries but dilation_w has {}",
            dh.len(),
            dw.len()
        )));
    }
    c.blocks = dh
        .iter()
        .zip(&dw)
        .map(|(&a, &b)| DsBlockConfig { dilation: [a, b], ..proto })
        .collect();

    for b in &mut c.blocks {
        b.conv1.kernel = doc.value_or("kernel1", b.conv1.kernel)?;
        b.conv1.bias = doc.flag("bias1")?.unwrap_or(b.conv1.bias);
        b.conv2.kernel = doc.value_or("kernel2", b.conv2.kernel)?;
        b.conv2.bias = doc.flag("bias2")?.unwrap_or(b.conv2.bias);
        if let Some(p) = doc.get("padding") {
            b.padding = PaddingMode::parse(p).ok_or_else(|| doc.err(format!("unknown padding `{p}`")))?;
        }
        let reduction = match b.mixer {
            Mixer::Se(se) => se.reduction,
            _ => 1,
        };
        let reduction = doc.value_or("se_reduction", reduction)?;
        b.mixer = match doc.get("mixer").unwrap_or(b.mixer.name()) {
            "se" => Mixer::Se(SeConfig { channels: c.width, reduction }),
            "none" => Mixer::Plain,
            "pm" => Mixer::ParamMatched,
            other => return Err(doc.err(format!("unknown mixer `{other}` (expected se, none or pm)"))),
        };
    }
    Ok(c)
}

fn fno_skeleton(doc: &KvDoc) -> Result<FnoPlusConfig> {
    Ok(FnoPlusConfig {
        in_channels: doc.require("in_channels")?,
        out_channels: doc.require("out_channels")?,
        width: doc.require("width")?,
        n_layers: 4,
        modes: [0, 0],
        proj_hidden: PROJ_HIDDEN,
    })
}

fn fno_overrides(doc: &KvDoc, mut c: FnoPlusConfig) -> Result<FnoPlusConfig> {
    c.in_channels = doc.value_or("in_channels", c.in_channels)?;
    c.out_channels = doc.value_or("out_channels", c.out_channels)?;
    c.width = doc.value_or("width", c.width)?;
    c.proj_hidden = doc.value_or("proj_hidden", c.proj_hidden)?;
    c.n_layers = doc.value_or("layers", c.n_layers)?;
    if let Some(m) = doc.list::<usize>("modes")? {
        c.modes = match m[..] {
            [a] => [a, a],
            [a, b] => [a, b],
            _ => return Err(doc.err("`modes` takes one or two values")),
        };
    }
    Ok(c)
}
