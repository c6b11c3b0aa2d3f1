//! Reproducible runner for the dqubit experiments.
//!
//! A run is fully determined by its resolved [`RunConfig`]. Every emitted
//! file carries the config hash and seed.

mod config;
mod experiments;

use std::fs;
use std::path::{Path, PathBuf};

use dqubit_core::doc::Provenance;

pub use config::{
    BenchmarkSection, DetectionSection, Experiment, MatrixSource, OutputSection, Qubit, RabiSection, RamseySection,
    RunConfig, SynthSection, TomoSection,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration at `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation { .. } => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<dqubit_core::Error> for CliError {
    fn from(e: dqubit_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// One emitted file: name relative to the output directory, and contents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutput {
    pub experiment: Experiment,
    pub provenance: Provenance,
    pub artifacts: Vec<Artifact>,
    /// One-line result summaries for the terminal.
    pub summary: Vec<String>,
    pub warnings: Vec<String>,
}

/// Resolved configuration echoed next to the results.
pub fn resolved_config_document(config: &RunConfig) -> String {
    format!("# config_hash = {}\n# seed = {}\n{}", config.hash(), config.seed, config.to_toml())
}

/// Validates `config` and runs its experiment. Nothing is written.
pub fn run(config: &RunConfig) -> Result<RunOutput, CliError> {
    config.validate()?;
    let experiment = config.experiment()?;
    let provenance = Provenance { config_hash: config.hash(), seed: config.seed };
    let mut out = RunOutput { experiment, provenance, artifacts: Vec::new(), summary: Vec::new(), warnings: Vec::new() };
    experiments::dispatch(config, &mut out)?;
    out.artifacts.push(Artifact { name: "config.toml".to_string(), contents: resolved_config_document(config) });
    Ok(out)
}

/// Writes every artifact into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, output: &RunOutput) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for a in &output.artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}
