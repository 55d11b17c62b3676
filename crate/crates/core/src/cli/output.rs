use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Files of one run, held in memory until the whole command has succeeded.
#[derive(Debug)]
pub struct Outputs {
    header: String,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new(config_hash: &str) -> Self {
        Self {
            header: format!("# rmtp {} config={config_hash}\n", env!("CARGO_PKG_VERSION")),
            files: Vec::new(),
        }
    }

    /// Buffer a CSV file; the provenance comment line comes first.
    pub fn csv(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = self.header.clone().into_bytes();
        body(&mut buf)?;
        self.files.push((name.to_string(), buf));
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn write_all(&self, dir: &Path, summary: &RunSummary) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes)?;
        }
        let mut json = serde_json::to_vec_pretty(summary).map_err(std::io::Error::other)?;
        json.push(b'\n');
        fs::write(dir.join("run_summary.json"), json)
    }
}

/// Contents of `run_summary.json`.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub config: BTreeMap<&'static str, String>,
    pub outputs: Vec<String>,
    pub results: serde_json::Value,
}
