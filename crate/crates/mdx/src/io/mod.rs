//! File formats: WAV audio, CSV tables and JSON documents.

pub mod tables;
pub mod wav;

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{write_err, MdxError, Result};

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| write_err(path, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| MdxError::internal(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| write_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| MdxError::at(path, e))?;
    serde_json::from_str(&text).map_err(|e| MdxError::at(path, e))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| MdxError::at(path, e))?;
    Ok(sha256_bytes(&bytes))
}

/// Every regular file under `dir`, sorted.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let entries = match std::fs::read_dir(&d) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
            Err(e) => return Err(MdxError::at(&d, e)),
        };
        for entry in entries {
            let entry = entry.map_err(|e| MdxError::at(&d, e))?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}
