//! Experiment drivers: JSON configs in, JSON reports and CSV tables out.

pub mod artifacts;
pub mod config;
pub mod experiments;
pub mod fixtures;

use std::fmt;

pub use artifacts::Artifacts;
pub use config::{ExperimentConfig, Kind};

/// Why a run did not succeed. Maps onto the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Malformed or out-of-range configuration; nothing is written.
    Schema(String),
    /// The experiment ran but a check or computation failed.
    Experiment(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Schema(_) => 2,
            Failure::Experiment(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Schema(m) => write!(f, "schema violation: {m}"),
            Failure::Experiment(m) => write!(f, "experiment failed: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<finsler_core::Error> for Failure {
    fn from(e: finsler_core::Error) -> Self {
        Failure::Experiment(e.to_string())
    }
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub config_hash: String,
    pub files: Vec<String>,
    /// Check failures reported by the experiment; empty on success.
    pub failures: Vec<String>,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        i32::from(!self.failures.is_empty())
    }
}

/// Validate, execute and write artifacts.
///
/// Schema problems are detected before anything touches the output
/// directory. Experiment errors leave a `diagnostics.json` behind.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary, Failure> {
    config.validate()?;
    let plan = experiments::plan(config)?;
    let hash = config.hash();
    let mut art = Artifacts::new(config, &hash);
    let failures = match plan.execute(config, &mut art) {
        Ok(f) => f,
        Err(Failure::Schema(m)) => return Err(Failure::Schema(m)),
        Err(Failure::Experiment(m)) => {
            let mut diag = Artifacts::new(config, &hash);
            diag.json("diagnostics.json", &serde_json::json!({ "error": m, "stage": plan.name() }))?;
            diag.flush(&config.out)?;
            return Err(Failure::Experiment(m));
        }
    };
    if !failures.is_empty() {
        art.json("diagnostics.json", &serde_json::json!({ "failures": failures, "stage": plan.name() }))?;
    }
    let files = art.flush(&config.out)?;
    Ok(RunSummary {
        config_hash: hash,
        files,
        failures,
    })
}
