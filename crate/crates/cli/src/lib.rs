//! Library behind the `dseno` command-line tool.

pub mod ablate;
pub mod commands;
pub mod config;
pub mod export;
pub mod inspect;

pub use commands::{cmd_evaluate, cmd_export, cmd_train, train_doc, Overrides, RunSummary};
pub use config::RunConfig;

use dseno_core::ErrorKind;

/// Process exit status for an error class.
pub fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Divergence => 3,
    }
}
