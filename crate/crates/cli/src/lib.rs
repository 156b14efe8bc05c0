//! Experiment runner behind the `occtime` binary.
//!
//! A run is configured from an optional `key = value` file plus
//! `--param key=value` overrides, validated completely before any
//! computation, and produces one CSV table (two for `occurrence`) and a
//! summary sidecar. CSV bodies depend only on the configuration: numbers
//! are rounded to a fixed number of significant digits, reductions run in a
//! fixed order, and the timestamp lives only in the summary.
//!
//! ```no_run
//! use occtime_cli::{run, Experiment, RunConfig};
//!
//! let config = RunConfig::load(Experiment::Zeno, None, &["omega=2", "tau=1"])?;
//! let report = run(&config)?;
//! print!("{}", report.table.to_csv());
//! # Ok::<(), occtime_cli::CliError>(())
//! ```

pub mod config;
pub mod error;
pub mod format;
pub mod output;
pub mod run;

pub use config::{Experiment, RawConfig, RunConfig};
pub use error::{CliError, Result};
pub use output::{render_summary, write_report};
pub use run::{run, Report};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
