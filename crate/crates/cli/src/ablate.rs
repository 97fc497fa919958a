//! Ablation matrices.
//!
//! A matrix file is a `key = value` document:
//!
//! ```text
//! rows       = Airfoil-G, Pipe-G w/o SE   # explicit table rows
//! benchmark  = Airfoil, Darcy             # cross product of the keys below
//! depth      = A, B, C                    # default: deepest published row
//! se         = on, off, pm                # default: on
//! schedule   = main, alt                  # default: main; alt exists for the deepest row
//! width      = 32, 64                     # default: published width
//! modes      = 8, 16                      # FNO+ rows
//! resolution = 32, 64, 128, 256           # Darcy resolution rows
//! config     = base.cfg                   # run settings for cells that train
//! ```
//!
//! Depth cells are generated when any of `depth`, `se`, `schedule` or
//! `width` is present, or when neither `modes` nor `resolution` is.

use std::fmt::Write as _;
use std::path::Path;

use dseno_core::dseno::{Benchmark, ARCH_KEYS};
use dseno_core::kv::KvDoc;
use dseno_core::{reconstruct_row, Architecture, Error, Result};

use crate::commands::{train_doc, Progress};
use crate::config::read_doc;
use crate::inspect::millions;

pub const MATRIX_KEYS: &[&str] = &[
    "rows",
    "benchmark",
    "depth",
    "se",
    "schedule",
    "width",
    "modes",
    "resolution",
    "config",
];

pub const CSV_HEADER: &str = "model,blocks,params,params_m,rel_l2";

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub label: String,
    pub row: String,
    pub width: Option<usize>,
    /// Grid of the training data for resolution rows.
    pub resolution: Option<usize>,
    pub arch: Architecture,
}

impl Cell {
    fn new(row: String, width: Option<usize>, resolution: Option<usize>) -> Result<Self> {
        let mut arch = reconstruct_row(&row)?;
        let label = match width {
            Some(w) => {
                arch = arch.with_width(w);
                format!("{row} (width {w})")
            }
            None => row.clone(),
        };
        Ok(Self {
            label,
            row,
            width,
            resolution,
            arch,
        })
    }
}

fn list(doc: &KvDoc, key: &str) -> Result<Vec<String>> {
    Ok(doc.list::<String>(key)?.unwrap_or_default())
}

/// Cells of a matrix in file order.
pub fn expand(doc: &KvDoc) -> Result<Vec<Cell>> {
    doc.reject_unknown(MATRIX_KEYS)?;
    let mut cells = Vec::new();
    for row in list(doc, "rows")? {
        cells.push(Cell::new(row, None, None)?);
    }
    let benches = list(doc, "benchmark")?
        .iter()
        .map(|b| Benchmark::parse(b).ok_or_else(|| doc.err(format!("unknown benchmark `{b}`"))))
        .collect::<Result<Vec<_>>>()?;
    let depth = list(doc, "depth")?;
    let se = list(doc, "se")?;
    let schedule = list(doc, "schedule")?;
    let widths = doc.list::<usize>("width")?.unwrap_or_default();
    let modes = doc.list::<usize>("modes")?.unwrap_or_default();
    let resolutions = doc.list::<usize>("resolution")?.unwrap_or_default();
    let depth_cells = !(depth.is_empty() && se.is_empty() && schedule.is_empty() && widths.is_empty())
        || (modes.is_empty() && resolutions.is_empty());

    for b in benches {
        let letters = b.depth_letters();
        let deepest = *letters.last().expect("every benchmark has a depth row");
        if depth_cells {
            let depths: Vec<char> = if depth.is_empty() {
                vec![deepest]
            } else {
                depth
                    .iter()
                    .map(|d| match d.chars().collect::<Vec<_>>()[..] {
                        [c] if letters.contains(&c) => Ok(c),
                        _ => Err(doc.err(format!("unknown depth `{d}` for {b}"))),
                    })
                    .collect::<Result<_>>()?
            };
            let se_suffixes = or_default(&se, "on")
                .iter()
                .map(|s| match s.as_str() {
                    "on" => Ok(""),
                    "off" => Ok(" w/o SE"),
                    "pm" => Ok(" w/o SE (PM)"),
                    other => Err(doc.err(format!("unknown se value `{other}` (expected on, off or pm)"))),
                })
                .collect::<Result<Vec<_>>>()?;
            let schedules = or_default(&schedule, "main");
            let widths: Vec<Option<usize>> = if widths.is_empty() { vec![None] } else { widths.iter().map(|&w| Some(w)).collect() };
            for &d in &depths {
                for sched in &schedules {
                    let alt = match sched.as_str() {
                        "main" => "",
                        // Alternate schedules are published for the deepest row only.
                        "alt" if d == deepest => "-alt",
                        "alt" => continue,
                        other => return Err(doc.err(format!("unknown schedule `{other}` (expected main or alt)"))),
                    };
                    for suffix in &se_suffixes {
                        for &w in &widths {
                            cells.push(Cell::new(format!("{b}-{d}{alt}{suffix}"), w, None)?);
                        }
                    }
                }
            }
        }
        for &m in &modes {
            cells.push(Cell::new(format!("{b} FNO+ (m={m})"), None, None)?);
        }
        for &r in &resolutions {
            if b != Benchmark::Darcy {
                return Err(doc.err(format!("resolution rows exist for Darcy only, not {b}")));
            }
            cells.push(Cell::new(format!("Darcy-{r}x{r}"), None, Some(r))?);
        }
    }
    Ok(cells)
}

fn or_default(v: &[String], default: &str) -> Vec<String> {
    if v.is_empty() {
        vec![default.to_string()]
    } else {
        v.to_vec()
    }
}

/// One output line per cell; `rel_l2` is empty for counting-only runs.
pub fn csv(cells: &[(Cell, Option<f64>)]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for (c, err) in cells {
        let params = c.arch.parameter_count();
        let label = if c.label.contains(',') { format!("\"{}\"", c.label) } else { c.label.clone() };
        let m = millions(params);
        writeln!(
            s,
            "{label},{},{params},{},{}",
            c.arch.depth(),
            m.trim_end_matches('M'),
            err.map_or(String::new(), |e| format!("{e:.6e}"))
        )
        .unwrap();
    }
    s
}

fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// Expand a matrix file and either count parameters or train every cell.
pub fn cmd_ablate(matrix: &Path, dry_run: bool, progress: Progress) -> Result<String> {
    let doc = read_doc(matrix)?;
    let cells = expand(&doc)?;
    if dry_run {
        return Ok(csv(&cells.into_iter().map(|c| (c, None)).collect::<Vec<_>>()));
    }
    let base_dir = matrix.parent().unwrap_or(Path::new("."));
    let base = match doc.get("config") {
        Some(p) => read_doc(&base_dir.join(p))?,
        None if cells.is_empty() => KvDoc::new("empty"),
        None => return Err(doc.err("training cells needs `config = <run configuration>`")),
    };
    let config_dir = doc.get("config").map(|p| base_dir.join(p)).and_then(|p| p.parent().map(Path::to_path_buf));
    let config_dir = config_dir.unwrap_or_else(|| base_dir.to_path_buf());
    let root = std::path::PathBuf::from(base.get("out").unwrap_or("run")).join("ablate");

    let mut rows = Vec::new();
    for cell in cells {
        let mut run = base.clone();
        for key in ARCH_KEYS {
            if *key != "dtype" {
                run.remove(key);
            }
        }
        run.set("model", &cell.row);
        if let Some(w) = cell.width {
            run.set("width", w);
        }
        if let Some(r) = cell.resolution {
            if run.get("manifest").is_some() {
                return Err(Error::Config(format!(
                    "{}: resolution cells train on generated data; remove `manifest` from the base configuration",
                    cell.label
                )));
            }
            run.set("resolution", r);
        }
        run.set("out", root.join(slug(&cell.label)).display());
        let summary = train_doc(run, &config_dir, false, progress)?;
        rows.push((cell, Some(summary.report.final_test)));
    }
    Ok(csv(&rows))
}
