//! Published model rows: per-benchmark widths, kernels and dilation
//! schedules, addressable by name (`"Darcy-F"`, `"Airfoil-G w/o SE (PM)"`,
//! `"Pipe-G-alt"`, `"Darcy-64x64"`, `"Darcy FNO+ (m=16)"`, ...).

use std::fmt;

use crate::error::{Error, Result};
use crate::fno::FnoPlusConfig;
use crate::nn::PaddingMode;
use crate::tensor::DType;

use super::config::{ConvSpec, DsBlockConfig, Mixer, ModelConfig, SeConfig};

/// Projection head hidden width shared by every published model.
pub const PROJ_HIDDEN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Benchmark {
    Airfoil,
    Pipe,
    Darcy,
    NavierStokes,
}

type Schedule = (&'static [usize], &'static [usize]);

struct BenchSpec {
    width: usize,
    in_channels: usize,
    append_coords: bool,
    conv1: ConvSpec,
    conv2: ConvSpec,
    /// `(along H, along W)` per depth letter.
    depths: &'static [Schedule],
    alt: Schedule,
}

const K3_BIAS: ConvSpec = ConvSpec { kernel: 3, bias: true };
const K5_NO_BIAS: ConvSpec = ConvSpec { kernel: 5, bias: false };

const AIRFOIL: BenchSpec = BenchSpec {
    width: 64,
    in_channels: 2,
    append_coords: false,
    conv1: K3_BIAS,
    conv2: K5_NO_BIAS,
    depths: &[
        (&[16], &[6]),
        (&[16, 54], &[4, 10]),
        (&[16, 48, 2], &[1, 6, 4]),
        (&[16, 56, 30, 2], &[1, 2, 10, 4]),
        (&[16, 56, 36, 24, 1], &[1, 2, 10, 6, 1]),
        (&[16, 56, 42, 36, 24, 1], &[1, 2, 8, 12, 6, 1]),
        (&[16, 56, 42, 36, 32, 24, 1], &[1, 2, 8, 12, 6, 2, 1]),
    ],
    alt: (&[20, 52, 46, 38, 30, 20, 2], &[2, 4, 8, 10, 8, 4, 2]),
};

const PIPE: BenchSpec = BenchSpec {
    width: 96,
    in_channels: 2,
    append_coords: false,
    conv1: K3_BIAS,
    conv2: K3_BIAS,
    depths: &[
        (&[9], &[9]),
        (&[23, 1], &[23, 1]),
        (&[23, 11, 1], &[23, 11, 1]),
        (&[23, 15, 7, 1], &[23, 15, 7, 1]),
        (&[23, 15, 9, 3, 1], &[23, 15, 9, 3, 1]),
        (&[25, 19, 11, 7, 3, 1], &[25, 19, 11, 7, 3, 1]),
        (&[23, 17, 13, 9, 7, 3, 1], &[23, 17, 13, 9, 7, 3, 1]),
    ],
    alt: (&[25, 19, 11, 9, 5, 3, 1], &[25, 19, 11, 9, 5, 3, 1]),
};

const DARCY: BenchSpec = BenchSpec {
    width: 48,
    in_channels: 3,
    append_coords: true,
    conv1: K3_BIAS,
    conv2: K5_NO_BIAS,
    depths: &[
        (&[7], &[7]),
        (&[1, 19], &[1, 19]),
        (&[1, 11, 19], &[1, 11, 19]),
        (&[1, 7, 13, 19], &[1, 7, 13, 19]),
        (&[1, 5, 9, 13, 19], &[1, 5, 9, 13, 19]),
        (&[1, 3, 5, 9, 13, 19], &[1, 3, 5, 9, 13, 19]),
    ],
    alt: (&[1, 3, 7, 11, 15, 21], &[1, 3, 7, 11, 15, 21]),
};

const NAVIER_STOKES: BenchSpec = BenchSpec {
    width: 64,
    in_channels: 10,
    append_coords: false,
    conv1: K3_BIAS,
    conv2: K3_BIAS,
    depths: &[(&[15, 25, 17, 13, 7, 5, 3, 1], &[15, 25, 17, 13, 7, 5, 3, 1])],
    alt: (&[21, 27, 19, 11, 9, 7, 3, 1], &[21, 27, 19, 11, 9, 7, 3, 1]),
};

/// Darcy schedules tuned per input resolution.
const DARCY_RESOLUTIONS: &[(usize, &[usize])] = &[
    (32, &[1, 2, 6]),
    (64, &[1, 3, 5, 7, 9, 13, 15]),
    (128, &[1, 5, 9, 15, 21, 27]),
    (256, &[1, 5, 7, 15, 23, 39, 61]),
];

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [
        Benchmark::Airfoil,
        Benchmark::Pipe,
        Benchmark::Darcy,
        Benchmark::NavierStokes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Airfoil => "Airfoil",
            Benchmark::Pipe => "Pipe",
            Benchmark::Darcy => "Darcy",
            Benchmark::NavierStokes => "NS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name().eq_ignore_ascii_case(s.trim()))
    }

    fn spec(self) -> &'static BenchSpec {
        match self {
            Benchmark::Airfoil => &AIRFOIL,
            Benchmark::Pipe => &PIPE,
            Benchmark::Darcy => &DARCY,
            Benchmark::NavierStokes => &NAVIER_STOKES,
        }
    }

    pub fn width(self) -> usize {
        self.spec().width
    }

    pub fn in_channels(self) -> usize {
        self.spec().in_channels
    }

    pub fn out_channels(self) -> usize {
        1
    }

    pub fn append_coords(self) -> bool {
        self.spec().append_coords
    }

    /// Published depth letters, `A` upward.
    pub fn depth_letters(self) -> Vec<char> {
        (0..self.spec().depths.len()).map(|i| (b'A' + i as u8) as char).collect()
    }

    /// Published FNO+ mode sweep.
    pub fn fno_modes(self) -> &'static [usize] {
        match self {
            Benchmark::Airfoil => &[8, 16, 24],
            Benchmark::Pipe => &[8, 16, 32],
            Benchmark::Darcy => &[8, 16, 32, 42],
            Benchmark::NavierStokes => &[8, 16, 32],
        }
    }

    /// Mesh of the benchmark data, `(H, W)`.
    pub fn mesh(self) -> (usize, usize) {
        match self {
            Benchmark::Airfoil => (221, 51),
            Benchmark::Pipe => (129, 129),
            Benchmark::Darcy => (85, 85),
            Benchmark::NavierStokes => (64, 64),
        }
    }

    fn model(self, schedule: Schedule, mixer_se: bool) -> ModelConfig {
        let s = self.spec();
        let mixer = if mixer_se {
            Mixer::Se(SeConfig {
                channels: s.width,
                reduction: 1,
            })
        } else {
            Mixer::Plain
        };
        let blocks = schedule
            .0
            .iter()
            .zip(schedule.1)
            .map(|(&dh, &dw)| DsBlockConfig {
                width: s.width,
                dilation: [dh, dw],
                conv1: s.conv1,
                conv2: s.conv2,
                mixer,
                padding: PaddingMode::Zero,
            })
            .collect();
        ModelConfig {
            in_channels: s.in_channels,
            out_channels: self.out_channels(),
            width: s.width,
            blocks,
            proj_hidden: PROJ_HIDDEN,
            append_coords: s.append_coords,
            dtype: DType::F32,
        }
    }

    /// FNO+ baseline with the benchmark's width and channel layout.
    pub fn fno_plus(self, modes: usize) -> FnoPlusConfig {
        FnoPlusConfig {
            in_channels: self.in_channels(),
            out_channels: self.out_channels(),
            width: self.width(),
            n_layers: 4,
            modes: [modes, modes],
            proj_hidden: PROJ_HIDDEN,
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Variant applied on top of a depth row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    Full,
    WithoutSe,
    ParamMatched,
}

/// Parsed table-row identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableRow {
    Dseno {
        benchmark: Benchmark,
        depth: char,
        alt: bool,
        ablation: Ablation,
    },
    DarcyResolution {
        resolution: usize,
        ablation: Ablation,
    },
    FnoPlus {
        benchmark: Benchmark,
        modes: usize,
    },
}

/// Either kind of model configuration a table row can describe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Architecture {
    Dseno(ModelConfig),
    FnoPlus(FnoPlusConfig),
}

impl Architecture {
    pub fn parameter_count(&self) -> usize {
        match self {
            Architecture::Dseno(c) => c.parameter_count(),
            Architecture::FnoPlus(c) => c.parameter_count(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Architecture::Dseno(c) => c.validate(),
            Architecture::FnoPlus(c) => c.validate(),
        }
    }

    pub fn in_channels(&self) -> usize {
        match self {
            Architecture::Dseno(c) => c.in_channels,
            Architecture::FnoPlus(c) => c.in_channels,
        }
    }

    pub fn out_channels(&self) -> usize {
        match self {
            Architecture::Dseno(c) => c.out_channels,
            Architecture::FnoPlus(c) => c.out_channels,
        }
    }

    /// Number of DS blocks or Fourier layers.
    pub fn depth(&self) -> usize {
        match self {
            Architecture::Dseno(c) => c.blocks.len(),
            Architecture::FnoPlus(c) => c.n_layers,
        }
    }

    pub fn with_width(self, width: usize) -> Self {
        match self {
            Architecture::Dseno(c) => Architecture::Dseno(c.with_width(width)),
            Architecture::FnoPlus(c) => Architecture::FnoPlus(FnoPlusConfig { width, ..c }),
        }
    }
}

impl TableRow {
    pub fn parse(name: &str) -> Result<Self> {
        let unknown = || Error::UnknownTableRow(name.to_string());
        let s = name.trim();
        let s = s.strip_prefix("Model ").unwrap_or(s).trim();

        if let Some((bench, rest)) = s.split_once(" FNO+") {
            let benchmark = Benchmark::parse(bench).ok_or_else(unknown)?;
            let modes = rest
                .trim()
                .strip_prefix("(m=")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|m| m.trim().parse::<usize>().ok())
                .filter(|&m| m > 0)
                .ok_or_else(unknown)?;
            return Ok(TableRow::FnoPlus { benchmark, modes });
        }

        let (base, ablation) = if let Some(b) = s.strip_suffix(" w/o SE (PM)") {
            (b, Ablation::ParamMatched)
        } else if let Some(b) = s.strip_suffix(" w/o SE") {
            (b, Ablation::WithoutSe)
        } else {
            (s, Ablation::Full)
        };
        let (base, alt) = match base.strip_suffix("-alt") {
            Some(b) => (b, true),
            None => (base, false),
        };
        let (bench, tag) = base.split_once('-').ok_or_else(unknown)?;
        let benchmark = Benchmark::parse(bench).ok_or_else(unknown)?;

        if let Some((a, b)) = tag.split_once('x') {
            let (a, b) = (a.parse::<usize>().ok(), b.parse::<usize>().ok());
            return match (benchmark, a, b, alt) {
                (Benchmark::Darcy, Some(a), Some(b), false)
                    if a == b && DARCY_RESOLUTIONS.iter().any(|(r, _)| *r == a) =>
                {
                    Ok(TableRow::DarcyResolution {
                        resolution: a,
                        ablation,
                    })
                }
                _ => Err(unknown()),
            };
        }

        let mut chars = tag.chars();
        let depth = match (chars.next(), chars.next()) {
            (Some(c), None) if benchmark.depth_letters().contains(&c) => c,
            _ => return Err(unknown()),
        };
        // Alternate schedules exist only for the deepest row.
        if alt && depth != *benchmark.depth_letters().last().unwrap() {
            return Err(unknown());
        }
        Ok(TableRow::Dseno {
            benchmark,
            depth,
            alt,
            ablation,
        })
    }

    pub fn architecture(&self) -> Architecture {
        match *self {
            TableRow::Dseno {
                benchmark,
                depth,
                alt,
                ablation,
            } => {
                let spec = benchmark.spec();
                let schedule = if alt {
                    spec.alt
                } else {
                    spec.depths[(depth as u8 - b'A') as usize]
                };
                Architecture::Dseno(apply(benchmark.model(schedule, true), ablation))
            }
            TableRow::DarcyResolution { resolution, ablation } => {
                let (_, d) = DARCY_RESOLUTIONS.iter().find(|(r, _)| *r == resolution).unwrap();
                Architecture::Dseno(apply(Benchmark::Darcy.model((d, d), true), ablation))
            }
            TableRow::FnoPlus { benchmark, modes } => Architecture::FnoPlus(benchmark.fno_plus(modes)),
        }
    }

    pub fn benchmark(&self) -> Benchmark {
        match *self {
            TableRow::Dseno { benchmark, .. } | TableRow::FnoPlus { benchmark, .. } => benchmark,
            TableRow::DarcyResolution { .. } => Benchmark::Darcy,
        }
    }
}

fn apply(cfg: ModelConfig, ablation: Ablation) -> ModelConfig {
    match ablation {
        Ablation::Full => cfg,
        Ablation::WithoutSe => cfg.with_mixer(Mixer::Plain),
        Ablation::ParamMatched => cfg.with_mixer(Mixer::ParamMatched),
    }
}

/// Configuration of a published D-SENO row.
pub fn reconstruct_table_config(name: &str) -> Result<ModelConfig> {
    match TableRow::parse(name)?.architecture() {
        Architecture::Dseno(c) => Ok(c),
        Architecture::FnoPlus(_) => Err(Error::UnknownTableRow(format!("{name} is not a D-SENO row"))),
    }
}

/// Configuration of any published row, D-SENO or FNO+.
pub fn reconstruct_row(name: &str) -> Result<Architecture> {
    Ok(TableRow::parse(name)?.architecture())
}

/// Every D-SENO and FNO+ row name this module knows, in table order.
pub fn table_row_names() -> Vec<String> {
    let mut names = Vec::new();
    for b in Benchmark::ALL {
        let letters = b.depth_letters();
        for l in &letters {
            names.push(format!("{b}-{l}"));
        }
        let deepest = letters.last().unwrap();
        names.push(format!("{b}-{deepest} w/o SE"));
        names.push(format!("{b}-{deepest} w/o SE (PM)"));
        names.push(format!("{b}-{deepest}-alt"));
        if b == Benchmark::Darcy {
            for (r, _) in DARCY_RESOLUTIONS {
                names.push(format!("Darcy-{r}x{r}"));
            }
        }
        for m in b.fno_modes() {
            names.push(format!("{b} FNO+ (m={m})"));
        }
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn darcy_f_schedule() {
        let cfg = reconstruct_table_config("Darcy-F").unwrap();
        assert_eq!(cfg.blocks.len(), 6);
        assert_eq!(cfg.width, 48);
        let (dx, dy) = cfg.dilations();
        assert_eq!(dx, [1, 3, 5, 9, 13, 19]);
        assert_eq!(dy, dx);
        assert_eq!(cfg.parameter_count(), 505_121);
        assert_eq!(cfg.receptive_field(), [301, 301]);
    }

    #[test]
    fn airfoil_g_is_anisotropic() {
        let cfg = reconstruct_table_config("Model Airfoil-G").unwrap();
        let (dx, dy) = cfg.dilations();
        assert_eq!(dx, [16, 56, 42, 36, 32, 24, 1]);
        assert_eq!(dy, [1, 2, 8, 12, 6, 2, 1]);
    }

    #[test]
    fn variants_parse() {
        let pm = reconstruct_table_config("Pipe-G w/o SE (PM)").unwrap();
        assert!(pm.blocks.iter().all(|b| b.mixer == Mixer::ParamMatched));
        let plain = reconstruct_table_config("NS-A w/o SE").unwrap();
        assert!(plain.blocks.iter().all(|b| b.mixer == Mixer::Plain));
        assert_eq!(reconstruct_table_config("NS-A-alt").unwrap().dilations().0, [21, 27, 19, 11, 9, 7, 3, 1]);
        assert_eq!(reconstruct_table_config("Darcy-32x32").unwrap().blocks.len(), 3);
        assert_eq!(
            reconstruct_row("Darcy FNO+ (m=16)").unwrap(),
            Architecture::FnoPlus(Benchmark::Darcy.fno_plus(16))
        );
    }

    #[test]
    fn unknown_rows_are_rejected() {
        for bad in ["Darcy-G", "Airfoil-C-alt", "Heat-A", "Darcy-48x48", "Darcy FNO+ (m=0)", "NS-B", ""] {
            assert!(
                matches!(TableRow::parse(bad), Err(Error::UnknownTableRow(_))),
                "{bad} accepted"
            );
        }
    }

    #[test]
    fn every_listed_name_parses() {
        for name in table_row_names() {
            reconstruct_row(&name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
