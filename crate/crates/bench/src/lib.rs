//! Experiment harness: scenario files, Monte Carlo sweeps, reports and
//! dual-function scans.

pub mod report;
pub mod runner;
pub mod scan;

use std::path::Path;

use thiserror::Error;
use zfbound::ScenarioConfig;

pub use report::{write_report, write_scan};
pub use runner::{run_realization, run_scenario, Aggregate, Method, MethodResult, RealizationRecord, RunOptions, RunReport, Status};
pub use scan::{scan_dual, ScanGrid};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] zfbound::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl BenchError {
    /// Process exit code: 1 for configuration problems, 2 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Io(_) => 1,
            BenchError::Numerical(_) => 2,
        }
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, BenchError> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
    config.validate().map_err(|e| BenchError::Config(e.to_string()))?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, BenchError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}
