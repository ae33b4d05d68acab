//! File formats, dataset generation, index files, querying, auditing and
//! benchmarks on top of [`ballnn`]. The `ballnn` binary is a thin clap
//! front end over this crate.

pub mod audit;
pub mod bench;
mod error;
pub mod formats;
pub mod gen;
pub mod index;
pub mod query;

pub use error::{CliError, CliResult};
