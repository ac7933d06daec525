//! Run manifests: what a command read and wrote, with content hashes.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;
use crate::io::{list_files, sha256_file, write_json};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn hashes(paths: &[PathBuf]) -> Result<Vec<FileHash>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileHash {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

/// Hashes `inputs` and every file under `output_dir`, then writes
/// `<out>/manifests/<command>.json`. Returns the manifest path.
pub fn write_manifest(
    config: &RunConfig,
    command: &str,
    started_unix_s: u64,
    inputs: &[PathBuf],
    output_dir: &Path,
) -> Result<PathBuf> {
    let mut inputs = inputs.to_vec();
    inputs.sort();
    inputs.dedup();
    let manifest = RunManifest {
        command: command.into(),
        version: crate::VERSION.into(),
        config: config.to_json(),
        config_sha256: config.hash(),
        inputs: hashes(&inputs)?,
        outputs: hashes(&list_files(output_dir)?)?,
        started_unix_s,
        finished_unix_s: unix_now(),
    };
    let path = config.out.join("manifests").join(format!("{command}.json"));
    write_json(&path, &manifest)?;
    Ok(path)
}
