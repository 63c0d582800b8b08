use crate::config::RunConfig;
use crate::CliError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub fn code_version() -> String {
    format!(
        "datquant {} (feature table v{})",
        env!("CARGO_PKG_VERSION"),
        datquant::features::TABLE_VERSION
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

impl InputFile {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(CliError::io(path))?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex(&Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub code_version: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    /// True when no seed was given and one was drawn for this run.
    pub seed_generated: bool,
    pub inputs: Vec<InputFile>,
}

impl Provenance {
    pub fn new(command: &str, cfg: &RunConfig, seed_generated: bool, inputs: &[&Path]) -> Result<Self, CliError> {
        Ok(Self {
            command: command.to_string(),
            code_version: code_version(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            seed_generated,
            inputs: inputs.iter().map(|p| InputFile::of(p)).collect::<Result<_, _>>()?,
        })
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
