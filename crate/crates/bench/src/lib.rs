//! Benchmark runner for `fpf-core`: TOML configs, a deterministic trial pool
//! and CSV/JSON output. The `bench` binary is a thin CLI over [`commands`].

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;

pub use config::BenchConfig;
pub use error::{BenchError, Result};

/// Build identifier written into every output row.
pub fn version() -> &'static str {
    env!("FPF_BENCH_VERSION")
}
