//! Output directory writer and the content-hash manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects every file a command writes so the manifest can be updated once
/// at the end.
pub struct Outputs {
    dir: PathBuf,
    written: BTreeMap<String, String>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Outputs, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, data).map_err(|e| CliError::io(&path, e))?;
        self.written.insert(name.to_string(), sha256_hex(data));
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::from(velotrace::Error::from(e)))?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    /// Renders through one of the library's CSV writers.
    pub fn csv<F>(&mut self, name: &str, render: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> velotrace::Result<()>,
    {
        let mut buf = Vec::new();
        render(&mut buf)?;
        self.bytes(name, &buf)
    }

    /// Records a file that was written by other means.
    pub fn record(&mut self, name: &str) -> Result<(), CliError> {
        let path = self.path(name);
        let data = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        self.written.insert(name.to_string(), sha256_hex(&data));
        Ok(())
    }

    /// Merges this command's files into `manifest.json`.
    pub fn finish(self) -> Result<BTreeMap<String, String>, CliError> {
        let path = self.dir.join(MANIFEST);
        let mut manifest: BTreeMap<String, String> = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| CliError::schema(format!("{}: {e}", path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(CliError::io(&path, e)),
        };
        manifest.extend(self.written);
        let mut text = serde_json::to_string_pretty(&manifest).expect("string map serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}
