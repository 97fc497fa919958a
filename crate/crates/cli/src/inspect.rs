//! Text report describing a model.

use std::fmt::Write;

use dseno_core::dseno::Mixer;
use dseno_core::kv::KvDoc;
use dseno_core::{Architecture, Result};

use crate::config::architecture;

/// Parameters in millions with three decimals, e.g. `1.042M`.
pub fn millions(count: usize) -> String {
    format!("{:.3}M", count as f64 / 1e6)
}

fn bracketed(v: &[usize]) -> String {
    let items: Vec<String> = v.iter().map(|d| d.to_string()).collect();
    format!("[{}]", items.join(","))
}

/// Report for the model a configuration document describes. Keys that do
/// not concern the model are ignored.
pub fn inspect(doc: &KvDoc) -> Result<String> {
    let (label, arch) = architecture(doc)?;
    Ok(describe(&label, &arch))
}

pub fn describe(label: &str, arch: &Architecture) -> String {
    let mut s = String::new();
    let params = arch.parameter_count();
    writeln!(s, "model: {label}").unwrap();
    writeln!(s, "params: {params} ({})", millions(params)).unwrap();
    match arch {
        Architecture::Dseno(c) => {
            let [rh, rw] = c.receptive_field();
            writeln!(s, "family: D-SENO").unwrap();
            writeln!(s, "width: {}", c.width).unwrap();
            writeln!(s, "blocks: {}", c.blocks.len()).unwrap();
            writeln!(s, "rf: {rh} × {rw}").unwrap();
            let (dh, dw) = c.dilations();
            if dh == dw {
                writeln!(s, "dilations: {}", bracketed(&dh)).unwrap();
            } else {
                writeln!(s, "dilations_h: {}", bracketed(&dh)).unwrap();
                writeln!(s, "dilations_w: {}", bracketed(&dw)).unwrap();
            }
            writeln!(s, "block  d_h  d_w  kernels  mixer").unwrap();
            for (i, b) in c.blocks.iter().enumerate() {
                let mixer = match b.mixer {
                    Mixer::Se(se) => format!("se (r={})", se.reduction),
                    other => other.name().to_string(),
                };
                writeln!(
                    s,
                    "{:>5}  {:>3}  {:>3}  {:>7}  {mixer}",
                    i + 1,
                    b.dilation[0],
                    b.dilation[1],
                    format!("{}/{}", b.conv1.kernel, b.conv2.kernel)
                )
                .unwrap();
            }
        }
        Architecture::FnoPlus(c) => {
            writeln!(s, "family: FNO+").unwrap();
            writeln!(s, "width: {}", c.width).unwrap();
            writeln!(s, "layers: {}", c.n_layers).unwrap();
            writeln!(s, "modes: {} × {}", c.modes[0], c.modes[1]).unwrap();
            writeln!(s, "rf: global").unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(text: &str) -> String {
        inspect(&KvDoc::parse(text, "t").unwrap()).unwrap()
    }

    #[test]
    fn published_examples() {
        assert!(report("model = Pipe-G\n").contains("rf: 293 × 293"));
        assert!(report("model = Airfoil-G\n").contains("params: 1042177 (1.042M)"));
        assert!(report("model = NS-A\n").contains("dilations: [15,25,17,13,7,5,3,1]"));
    }

    #[test]
    fn fno_rows_and_defaults() {
        assert!(report("model = Darcy FNO+ (m=8)\n").contains("params: 1195649 (1.196M)"));
        assert!(report("epochs = 3\n").contains("model: Darcy-F"));
    }
}
