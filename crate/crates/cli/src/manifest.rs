use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Record of one command run, written next to its outputs.
///
/// Paths are stored relative to the output directory and inputs by content
/// hash only, so re-running a command elsewhere yields the same manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub model_hash: Option<String>,
    pub parameters: serde_json::Value,
    /// Input role -> sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output file name -> sha256.
    pub outputs: BTreeMap<String, String>,
    /// sha256 of this document with `manifest_hash` empty.
    pub manifest_hash: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, model_hash: Option<String>, parameters: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            model_hash,
            parameters,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            manifest_hash: String::new(),
        }
    }

    fn compute_hash(&self) -> String {
        let mut bare = self.clone();
        bare.manifest_hash.clear();
        sha256_hex(&serde_json::to_vec(&bare).expect("plain data serializes"))
    }

    /// Hashes `files` (all inside `dir`), seals the manifest and writes it to `dir`.
    pub fn write(mut self, dir: &Path, files: &[impl AsRef<Path>]) -> Result<Self> {
        for f in files {
            let f = f.as_ref();
            let name = f
                .strip_prefix(dir)
                .unwrap_or(f)
                .to_string_lossy()
                .replace('\\', "/");
            self.outputs.insert(name, file_sha256(f)?);
        }
        self.manifest_hash = self.compute_hash();
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self)? + "\n";
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(self)
    }

    /// Reads the manifest in `dir` and checks its own hash and every listed output.
    pub fn verify(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
        let manifest: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("{}: malformed manifest", path.display()))?;
        if manifest.compute_hash() != manifest.manifest_hash {
            bail!("{}: manifest hash does not match its contents", path.display());
        }
        for (name, expected) in &manifest.outputs {
            let file = dir.join(name);
            if &file_sha256(&file)? != expected {
                bail!("{}: contents do not match the manifest hash", file.display());
            }
        }
        Ok(manifest)
    }
}

/// Fails if `dir` exists and is not empty, unless `overwrite` is set.
pub fn prepare_output_dir(dir: &Path, overwrite: bool) -> Result<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))?;
        if entries.next().is_some() && !overwrite {
            bail!("{}: output directory is not empty (use --overwrite)", dir.display());
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}
