use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};
use crate::CliError;

pub const CROSS_PERIOD_DIR: &str = "all-periods";
pub const MANIFEST: &str = "manifest.json";

/// Lowercase, dash-separated directory name for a period label.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn pretty_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("artifact serializes");
    bytes.push(b'\n');
    bytes
}

/// Writes artifacts under one results directory and remembers their hashes
/// for the manifest.
#[derive(Debug)]
pub struct Artifacts {
    root: PathBuf,
    written: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct ArtifactEntry<'a> {
    path: &'a str,
    sha256: &'a str,
}

#[derive(Serialize)]
pub struct InputEntry {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    config_hash: String,
    seed: u64,
    inputs: &'a BTreeMap<String, InputEntry>,
    config: &'a RunConfig,
    artifacts: Vec<ArtifactEntry<'a>>,
}

impl Artifacts {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Artifacts {
            root: root.into(),
            written: BTreeMap::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.written.keys().map(String::as_str)
    }

    pub fn bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.written
            .insert(rel.to_string(), hex(&Sha256::digest(bytes)));
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, v: &T) -> Result<(), CliError> {
        self.bytes(rel, &pretty_json(v))
    }

    /// Render with a writer-based exporter, then store.
    pub fn csv(
        &mut self,
        rel: &str,
        render: impl FnOnce(&mut Vec<u8>) -> contagion_core::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        self.bytes(rel, &buf)
    }

    /// Serializable rows as CSV with a header taken from the field names.
    pub fn csv_rows<T: Serialize>(&mut self, rel: &str, rows: &[T]) -> Result<(), CliError> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        for r in rows {
            wtr.serialize(r).map_err(contagion_core::Error::from)?;
        }
        let buf = wtr
            .into_inner()
            .map_err(|e| io_err(&self.root.join(rel), e.into_error()))?;
        self.bytes(rel, &buf)
    }

    pub fn write_manifest(
        &mut self,
        subcommand: &str,
        cfg: &RunConfig,
        inputs: &BTreeMap<String, InputEntry>,
    ) -> Result<(), CliError> {
        let manifest = Manifest {
            tool: "contagion",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            inputs,
            config: cfg,
            artifacts: self
                .written
                .iter()
                .map(|(path, sha256)| ArtifactEntry { path, sha256 })
                .collect(),
        };
        let bytes = pretty_json(&manifest);
        let path = self.root.join(MANIFEST);
        std::fs::create_dir_all(&self.root).map_err(|e| io_err(&self.root, e))?;
        std::fs::write(&path, bytes).map_err(|e| io_err(&path, e))
    }
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex(&Sha256::digest(bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("Pre-crises"), "pre-crises");
        assert_eq!(slug("Financial Crisis"), "financial-crisis");
        assert_eq!(slug("  2008 / Q3 "), "2008-q3");
    }
}
