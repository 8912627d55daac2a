//! Output files and the run manifest written next to them.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Format, RunConfig};
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub format: Format,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    manifest_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    seed: u64,
    threads: usize,
    finished_unix_s: u64,
    wall_clock_s: f64,
    outputs: &'a [OutputFile],
}

pub struct Outputs {
    dir: PathBuf,
    only: Vec<Format>,
    written: Vec<OutputFile>,
}

impl Outputs {
    pub fn new(dir: &Path, only: &[Format]) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            only: only.to_vec(),
            written: Vec::new(),
        })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.only.is_empty() || self.only.contains(&f)
    }

    /// Writes `name` unless its format was filtered out.
    pub fn emit(&mut self, name: &str, format: Format, contents: &[u8]) -> Result<(), CliError> {
        if !self.wants(format) {
            return Ok(());
        }
        std::fs::write(self.dir.join(name), contents)?;
        self.written.push(OutputFile {
            file: name.to_string(),
            format,
            bytes: contents.len(),
            sha256: format!("{:x}", Sha256::digest(contents)),
        });
        Ok(())
    }

    pub fn emit_json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
        text.push('\n');
        self.emit(name, Format::Json, text.as_bytes())
    }

    pub fn finish(mut self, command: &str, cfg: &RunConfig, wall_clock_s: f64, threads: usize) -> Result<(), CliError> {
        if self.written.is_empty() && !self.only.is_empty() {
            return Err(CliError::Config(format!(
                "command `{command}` produces none of the requested formats"
            )));
        }
        let finished_unix_s = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let written = std::mem::take(&mut self.written);
        let manifest = RunManifest {
            manifest_version: 1,
            tool: "modegraph",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: cfg,
            seed: cfg.seed,
            threads,
            finished_unix_s,
            wall_clock_s,
            outputs: &written,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}
