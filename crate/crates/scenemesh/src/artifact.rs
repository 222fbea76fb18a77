//! Versioned JSON envelopes, atomic writes and content hashes.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PipelineError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Every JSON artifact is wrapped in this envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub schema_version: u32,
    pub kind: String,
    pub config_hash: String,
    pub payload: T,
}

#[derive(Serialize)]
struct ArtifactRef<'a, T> {
    schema_version: u32,
    kind: &'a str,
    config_hash: &'a str,
    payload: &'a T,
}

#[derive(Deserialize)]
struct Header {
    schema_version: u32,
    kind: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn encode<T: Serialize>(kind: &str, config_hash: &str, payload: &T) -> Vec<u8> {
    let artifact = ArtifactRef {
        schema_version: SCHEMA_VERSION,
        kind,
        config_hash,
        payload,
    };
    let mut bytes = serde_json::to_vec_pretty(&artifact).expect("artifact serializes");
    bytes.push(b'\n');
    bytes
}

/// Parses an envelope, checking version and kind before the payload.
pub fn decode<T: DeserializeOwned>(path: &Path, bytes: &[u8], kind: &str) -> Result<Artifact<T>> {
    let parse = |e: serde_json::Error| PipelineError::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    };
    let header: Header = serde_json::from_slice(bytes).map_err(parse)?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(PipelineError::Version {
            path: path.to_path_buf(),
            found: header.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    if header.kind != kind {
        return Err(PipelineError::Kind {
            path: path.to_path_buf(),
            expected: kind.into(),
            found: header.kind,
        });
    }
    serde_json::from_slice(bytes).map_err(parse)
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| PipelineError::io(path, e))
}

pub fn load<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<Artifact<T>> {
    decode(path, &read_bytes(path)?, kind)
}

pub fn save<T: Serialize>(path: &Path, kind: &str, config_hash: &str, payload: &T) -> Result<()> {
    write_atomic(path, &encode(kind, config_hash, payload))
}

/// Writes to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| PipelineError::io(dir, e))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| PipelineError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| PipelineError::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_checked_before_payload() {
        let bytes = br#"{"schema_version": 7, "kind": "x", "config_hash": "h", "payload": 1}"#;
        let err = decode::<String>(Path::new("a.json"), bytes, "x").unwrap_err();
        assert!(matches!(err, PipelineError::Version { found: 7, .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let bytes = encode("scene_model", "h", &1u32);
        let err = decode::<u32>(Path::new("a.json"), &bytes, "stb").unwrap_err();
        assert!(matches!(err, PipelineError::Kind { .. }));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/file.json");
        save(&path, "n", "h", &1u32).unwrap();
        save(&path, "n", "h", &2u32).unwrap();
        let a: Artifact<u32> = load(&path, "n").unwrap();
        assert_eq!(a.payload, 2);
        assert_eq!(
            std::fs::read_dir(path.parent().unwrap()).unwrap().count(),
            1
        );
    }

    #[test]
    fn missing_file_maps_to_exit_two() {
        let err = load::<u32>(Path::new("/nonexistent/x.json"), "n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
