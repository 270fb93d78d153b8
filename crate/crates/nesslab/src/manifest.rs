//! Run manifest: input hash, versions and timings.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    /// SHA-256 of the configuration bytes as read (or of the built-in default).
    pub config_sha256: String,
    pub arguments: Vec<String>,
    pub outputs: Vec<PathBuf>,
    pub wall_seconds: f64,
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(command: &str, config_bytes: &[u8], arguments: Vec<String>) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(config_bytes),
            arguments,
            outputs: Vec::new(),
            wall_seconds: 0.0,
            warnings: Vec::new(),
        }
    }

    pub fn finish(mut self, elapsed: Duration) -> Self {
        self.wall_seconds = elapsed.as_secs_f64();
        self
    }

    pub fn write(&self, directory: &Path) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(directory)?;
        let path = directory.join(format!("{}.manifest.toml", self.command));
        std::fs::write(&path, toml::to_string(self).expect("manifest serializes"))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
