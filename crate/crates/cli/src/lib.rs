//! Experiment runner behind the `topoflow` binary: single scenario runs,
//! policy comparison sweeps, calibration of the cost constants and traffic
//! density export.

pub mod calibrate;
mod commands;
pub mod experiment;

use std::path::{Path, PathBuf};

use thiserror::Error;
use topoflow::config::{ConfigError, KvConfig};
use topoflow::gridmap::{GridMap, MapError};
use topoflow::sim::{ScenarioConfig, SimError};

pub use calibrate::CalibrateError;
pub use commands::{run, Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("map {path}: {source}")]
    Map { path: PathBuf, source: MapError },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("{failed} of {total} sweep cells failed")]
    PartialSweep { failed: usize, total: usize },
}

impl CliError {
    /// 2 for bad input, 3 for simulation or output failures, 4 when a sweep
    /// finished with failed cells.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::Map { .. }
            | CliError::Read { .. }
            | CliError::Usage(_)
            | CliError::Calibrate(CalibrateError::InsufficientPoints(_) | CalibrateError::Degenerate | CalibrateError::NoGroup) => 2,
            CliError::Sim(SimError::Config(_)) => 2,
            CliError::Calibrate(CalibrateError::Sim(_)) | CliError::Sim(_) | CliError::Write { .. } => 3,
            CliError::PartialSweep { .. } => 4,
        }
    }
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

pub fn load_map(path: &Path) -> Result<GridMap, CliError> {
    GridMap::from_text(&read_file(path)?).map_err(|source| CliError::Map { path: path.to_path_buf(), source })
}

/// Applies `key=value` overrides on top of a parsed config.
pub fn apply_overrides(kv: &mut KvConfig, sets: &[String]) -> Result<(), CliError> {
    for s in sets {
        let (k, v) = s.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{s}`")))?;
        kv.set(k.trim(), v.trim());
    }
    Ok(())
}

/// Reads the config (if any), applies overrides and finds the map. A `map`
/// key is resolved against the config file's directory; `map_flag` wins.
pub fn load_scenario(
    config: Option<&Path>,
    map_flag: Option<&Path>,
    sets: &[String],
) -> Result<(ScenarioConfig, KvConfig, GridMap), CliError> {
    let mut kv = match config {
        Some(p) => KvConfig::parse(&read_file(p)?)?,
        None => KvConfig::default(),
    };
    apply_overrides(&mut kv, sets)?;
    let cfg = ScenarioConfig::from_kv(&kv)?;
    let map_path = match (map_flag, &cfg.map) {
        (Some(m), _) => m.to_path_buf(),
        (None, Some(m)) => {
            let base = config.and_then(Path::parent).unwrap_or(Path::new("."));
            base.join(m)
        }
        (None, None) => return Err(CliError::Usage("no map: pass --map or set `map` in the config".into())),
    };
    cfg.validate()?;
    let map = load_map(&map_path)?;
    Ok((cfg, kv, map))
}
