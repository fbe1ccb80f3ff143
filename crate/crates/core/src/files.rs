//! Versioned structured-text files and atomic writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// Parses TOML text carrying a top-level `schema_version`, checks it and
/// deserializes the remaining keys into `T`.
pub fn parse_versioned_toml<T: DeserializeOwned>(
    text: &str,
    path: &Path,
    expected: u32,
) -> Result<T> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    let version = table
        .remove("schema_version")
        .ok_or_else(|| Error::Malformed {
            path: path.to_path_buf(),
            detail: "missing field `schema_version`".into(),
        })?;
    let found = version
        .as_integer()
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| Error::Malformed {
            path: path.to_path_buf(),
            detail: "`schema_version` must be a non-negative integer".into(),
        })?;
    if found != expected {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            found,
            expected,
        });
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Malformed {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
}

pub fn load_versioned_toml<T: DeserializeOwned>(path: &Path, expected: u32) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_versioned_toml(&text, path, expected)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`, so
/// readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
