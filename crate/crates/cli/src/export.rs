//! Field export as CSV grids or 8-bit PGM images.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dseno_core::{Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFormat {
    Csv,
    Pgm,
}

impl FieldFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Self::Csv),
            "pgm" => Some(Self::Pgm),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Pgm => "pgm",
        }
    }
}

/// One line per row, values separated by commas.
pub fn to_csv(plane: &[f64], w: usize) -> String {
    let mut s = String::with_capacity(plane.len() * 12);
    for row in plane.chunks(w) {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            write!(s, "{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Binary PGM (`P5`, maxval 255) scaled so the minimum maps to 0 and the
/// maximum to 255. Returns the image and the `(min, max)` used.
pub fn to_pgm(plane: &[f64], h: usize, w: usize) -> (Vec<u8>, f64, f64) {
    let lo = plane.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = plane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(plane.iter().map(|&v| {
        if span > 0.0 {
            ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    (out, lo, hi)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write ground truth, prediction and absolute error of every channel of a
/// `(C, H, W)` pair as `{stem}_{truth|pred|error}_c{k}.{ext}`. PGM output
/// also gets `{stem}_scale.txt` listing each file's value range.
pub fn write_fields(
    dir: &Path,
    stem: &str,
    truth: &Tensor<f64>,
    pred: &Tensor<f64>,
    format: FieldFormat,
) -> Result<Vec<PathBuf>> {
    if truth.shape() != pred.shape() || truth.rank() != 3 {
        return Err(Error::Data(format!(
            "cannot export fields of shapes {:?} and {:?}",
            truth.shape(),
            pred.shape()
        )));
    }
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let (c, h, w) = (truth.shape()[0], truth.shape()[1], truth.shape()[2]);
    let error: Vec<f64> = truth.data().iter().zip(pred.data()).map(|(t, p)| (t - p).abs()).collect();
    let mut written = Vec::new();
    let mut scale = String::from("file,min,max\n");
    for k in 0..c {
        let range = k * h * w..(k + 1) * h * w;
        for (kind, values) in [
            ("truth", &truth.data()[range.clone()]),
            ("pred", &pred.data()[range.clone()]),
            ("error", &error[range.clone()]),
        ] {
            let name = format!("{stem}_{kind}_c{k}.{}", format.extension());
            let path = dir.join(&name);
            match format {
                FieldFormat::Csv => write(&path, to_csv(values, w).as_bytes())?,
                FieldFormat::Pgm => {
                    let (img, lo, hi) = to_pgm(values, h, w);
                    write(&path, &img)?;
                    writeln!(scale, "{name},{lo},{hi}").unwrap();
                }
            }
            written.push(path);
        }
    }
    if format == FieldFormat::Pgm {
        let path = dir.join(format!("{stem}_scale.txt"));
        write(&path, scale.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_pgm_is_monotone_over_full_range() {
        let ramp: Vec<f64> = (0..256).map(|i| -1.0 + i as f64 * 0.01).collect();
        let (img, lo, hi) = to_pgm(&ramp, 1, 256);
        let header = b"P5\n256 1\n255\n";
        assert_eq!(&img[..header.len()], header);
        let px = &img[header.len()..];
        assert_eq!((px[0], px[255]), (0, 255));
        assert!(px.windows(2).all(|p| p[1] >= p[0]));
        assert_eq!((lo, hi), (ramp[0], ramp[255]));
    }

    #[test]
    fn csv_grid_shape() {
        let plane: Vec<f64> = (0..85 * 85).map(|i| i as f64 / 7.0).collect();
        let text = to_csv(&plane, 85);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 85);
        assert!(lines.iter().all(|l| l.split(',').count() == 85));
        assert_eq!(lines[1].split(',').next().unwrap().parse::<f64>().unwrap(), 85.0 / 7.0);
    }
}
