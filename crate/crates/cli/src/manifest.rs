use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let path = std::fs::canonicalize(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self { path, sha256: sha256(&bytes) })
    }

    /// Re-hashes the file and compares.
    pub fn check(&self) -> Result<(), CliError> {
        let bytes = std::fs::read(&self.path).map_err(|e| CliError::io(&self.path, e))?;
        let now = sha256(&bytes);
        if now == self.sha256 {
            Ok(())
        } else {
            Err(CliError::Verify(format!("{} changed: sha256 {} != recorded {}", self.path.display(), now, self.sha256)))
        }
    }
}

pub fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: Option<FileHash>,
    pub operators: FileHash,
    pub seed: u64,
    pub threads: Option<usize>,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// `bound`, `eps_glob` or `max_iterations`.
    pub termination: String,
    pub outputs: Vec<FileHash>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(FILE_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Verify(format!("{}: {e}", path.display())))
    }
}
