//! `<file>.provenance.json` sidecars recording which stage, seed and config
//! produced an output file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub stage: String,
    pub seed: u64,
    pub config_hash: String,
    pub tool_version: String,
    /// SHA-256 of the file this sidecar describes.
    pub sha256: String,
}

pub fn sidecar_path(file: &Path) -> PathBuf {
    let mut name = file.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    file.with_file_name(name)
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Writes the sidecar for an already written `file`.
pub fn record(file: &Path, stage: &str, seed: u64, config_hash: &str) -> Result<(), CliError> {
    let p = Provenance {
        stage: stage.to_string(),
        seed,
        config_hash: config_hash.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        sha256: file_sha256(file)?,
    };
    fs::write(sidecar_path(file), serde_json::to_vec_pretty(&p)?)?;
    Ok(())
}

pub fn read(file: &Path) -> Result<Provenance, CliError> {
    let path = sidecar_path(file);
    let bytes = fs::read(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_slice(&bytes)?)
}
