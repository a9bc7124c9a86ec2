//! Command implementations behind the `stablepose` binary.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::cmd_pipeline;
pub use config::RunConfig;
pub use error::{CliError, ErrorKind};

/// Runs `f` on a dedicated pool with `workers` threads, or on the global
/// pool when `workers` is `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(CliError::usage("--workers must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::other(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
