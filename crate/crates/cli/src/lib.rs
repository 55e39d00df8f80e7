//! Batch driver: scenario configs in, simulations, verifications and
//! convergence studies out, as deterministic CSV and JSON artifacts.
//!
//! * [`config`]: the strict JSON scenario schema and its hash.
//! * [`scenario`]: grid, initial data, forcing and closed-form solution of
//!   a config.
//! * [`checks`]: residual checks, norms and estimates on a stored flow.
//! * [`manifest`]: the per-run JSON record.
//! * [`run`]: the `simulate`, `verify` and `converge` subcommands.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod error;
pub mod manifest;
pub mod run;
pub mod scenario;

pub use error::{CliError, Result};

/// Exit code of a run whose checks all passed.
pub const EXIT_OK: i32 = 0;
/// Exit code of a run with at least one failed check.
pub const EXIT_CHECK_FAILED: i32 = 1;

/// Reads `GRAFLOW_THREADS` and sizes the global worker pool. Unset means
/// one worker per core.
pub fn configure_threads(value: Option<&str>) -> Result<()> {
    let Some(v) = value else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("GRAFLOW_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the worker pool: {e}")))
}
