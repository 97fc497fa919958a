//! The dilated squeeze-excitation neural operator.

mod block;
mod config;
mod model;
mod se;
mod serial;
mod tables;

pub use block::{BlockCache, BlockMixer, DsBlock};
pub use config::{ConvSpec, DsBlockConfig, Mixer, ModelConfig, SeConfig};
pub use model::{Dseno, DsenoCache};
pub use se::{SeCache, SqueezeExcite};
pub use serial::ARCH_KEYS;
pub use tables::{
    reconstruct_row, reconstruct_table_config, table_row_names, Ablation, Architecture, Benchmark, TableRow,
    PROJ_HIDDEN,
};
