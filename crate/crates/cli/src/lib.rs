//! Library side of the `qof` command: signed batch files and the commands
//! behind each subcommand.

pub mod batchfile;
pub mod commands;

pub use batchfile::{verify_batch_file, KeysFile, LedgerEntry, Rejection, SignedBatchFile};
pub use commands::{CliError, Report};
