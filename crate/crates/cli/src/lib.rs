//! Experiment runner for entry-fee simultaneous auctions: TOML configs in,
//! CSV tables and pass/fail reports out.

pub mod config;
pub mod csv;
pub mod dispatch;

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig};
pub use dispatch::{dispatch, Command, RunOutput};

use std::path::{Path, PathBuf};

/// Writes every table of `out` as `<dir>/<name>_<table>.csv`; returns the paths.
pub fn write_tables(out: &RunOutput, name: &str, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(out.tables.len());
    for (table, t) in &out.tables {
        let p = dir.join(format!("{name}_{table}.csv"));
        t.write(&p)?;
        paths.push(p);
    }
    Ok(paths)
}
