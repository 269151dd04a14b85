//! Run manifest and the input reader that records content digests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::settings::Settings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: u64,
    /// Command line as invoked, program name excluded.
    pub args: Vec<String>,
    pub config: Settings,
    /// SHA-256 of every input file read, keyed by path.
    pub inputs: BTreeMap<String, String>,
}

/// Reads input files whole, remembering each one's digest.
#[derive(Debug, Default)]
pub struct Inputs {
    pub digests: BTreeMap<String, String>,
}

impl Inputs {
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.digests.insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(bytes)
    }

    /// Files in `dir` with the given extension, sorted by name.
    pub fn list(&self, dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
            let p = entry.map_err(|e| CliError::io(dir, e))?.path();
            if p.extension().is_some_and(|x| x == ext) {
                out.push(p);
            }
        }
        out.sort();
        Ok(out)
    }
}
