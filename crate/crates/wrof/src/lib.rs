//! File formats, reports, seeded verification suites and the `wrof`
//! command-line tool on top of `wrof-core`.

pub mod cli;
pub mod error;
pub mod format;
pub mod instances;
pub mod io;
pub mod report;
pub mod verify;

pub use error::{CliError, Result};
