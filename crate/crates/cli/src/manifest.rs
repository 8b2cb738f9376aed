//! Run manifests: configuration, content hashes of every file read and
//! written, match-call counters and headline results. No timestamps, so
//! identical runs produce identical manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::io;

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub counters: BTreeMap<String, u64>,
    pub results: BTreeMap<String, Value>,
}

fn record(role: &str, path: &Path, bytes: &[u8]) -> FileRecord {
    FileRecord {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: io::sha256_hex(bytes),
        bytes: bytes.len(),
    }
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            counters: BTreeMap::new(),
            results: BTreeMap::new(),
        }
    }

    /// Reads an input file and records its hash.
    pub fn read(&mut self, role: &str, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = io::read_bytes(path)?;
        self.inputs.push(record(role, path, &bytes));
        Ok(bytes)
    }

    /// Writes an output file atomically and records its hash.
    pub fn write(&mut self, role: &str, path: &Path, bytes: &[u8]) -> CliResult<()> {
        io::write_atomic(path, bytes)?;
        self.outputs.push(record(role, path, bytes));
        Ok(())
    }

    pub fn count(&mut self, name: &str, n: u64) {
        *self.counters.entry(name.to_string()).or_default() += n;
    }

    pub fn result(&mut self, name: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("serializable result");
        self.results.insert(name.to_string(), v);
    }

    pub fn finish(self, path: &Path) -> CliResult<()> {
        io::write_atomic(path, &io::to_json_bytes(&self))
    }
}
