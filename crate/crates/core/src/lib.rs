pub mod data;
pub mod dseno;
pub mod error;
pub mod fft;
pub mod fno;
pub mod kv;
pub mod model;
pub mod nn;
pub mod tensor;
pub mod train;

pub use dseno::{reconstruct_row, reconstruct_table_config, Architecture, Benchmark, Dseno, ModelConfig};
pub use error::{Error, ErrorKind, Result};
pub use fno::{FnoPlus, FnoPlusConfig};
pub use model::{AnyModel, ModelOp};
pub use tensor::{DType, Scalar, Tensor};
