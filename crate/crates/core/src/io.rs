//! File helpers shared by the dataset and model formats.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Writes `bytes` to a sibling temp file and renames it over `path`, so a
/// reader never observes a partially written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    atomic_write(path, s.as_bytes())
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Corrupt {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn f32_to_le(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn f64_to_le(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn f32_from_le(path: &Path, bytes: &[u8], expected: usize) -> Result<Vec<f32>> {
    check_len(path, bytes.len(), expected * 4)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn f64_from_le(path: &Path, bytes: &[u8], expected: usize) -> Result<Vec<f64>> {
    check_len(path, bytes.len(), expected * 8)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn check_len(path: &Path, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Corrupt {
            path: PathBuf::from(path),
            reason: format!("expected {want} bytes, found {got}"),
        });
    }
    Ok(())
}

/// SHA-256 of the compact JSON encoding, hex.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        atomic_write(&path, b"abc").unwrap();
        atomic_write(&path, b"defg").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"defg");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn float_codecs_check_length() {
        let p = Path::new("t");
        let v = [1.5f32, -0.25];
        assert_eq!(f32_from_le(p, &f32_to_le(&v), 2).unwrap(), v);
        assert!(matches!(f32_from_le(p, &f32_to_le(&v)[..7], 2), Err(Error::Corrupt { .. })));
        let w = [std::f64::consts::PI];
        assert_eq!(f64_from_le(p, &f64_to_le(&w), 1).unwrap(), w);
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash(&(1, "a")), config_hash(&(1, "a")));
        assert_ne!(config_hash(&(1, "a")), config_hash(&(2, "a")));
        assert_eq!(config_hash(&1).len(), 64);
    }
}
