//! Output directories: every file is tagged with the run id, and a single
//! manifest lists the configuration, the code version and a SHA-256 per file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const MANIFEST: &str = "manifest.json";
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of the canonical JSON of `config` together with the code version.
pub fn run_id<C: Serialize>(config: &C) -> Result<String> {
    let json = serde_json::to_string(config)?;
    Ok(sha256_hex(format!("{CODE_VERSION}\n{json}").as_bytes()))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub run_id: String,
    pub code_version: String,
    pub config: serde_json::Value,
    /// Wall time of the run; the only entry that differs between reruns.
    pub wall_time_seconds: f64,
    pub files: BTreeMap<String, String>,
}

/// Collects the files of one output directory.
pub struct ArtifactWriter {
    dir: PathBuf,
    run_id: String,
    config: serde_json::Value,
    files: BTreeMap<String, String>,
}

impl ArtifactWriter {
    pub fn create<C: Serialize>(dir: &Path, config: &C) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            run_id: run_id(config)?,
            config: serde_json::to_value(config)?,
            files: BTreeMap::new(),
        })
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Writes `value` wrapped as `{"run_id": …, "data": value}`.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let doc = serde_json::json!({ "run_id": self.run_id, "data": value });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `body` (which may carry its own `#` comment lines) after a
    /// `# run_id=…` line.
    pub fn csv(&mut self, name: &str, body: &str) -> Result<()> {
        let text = format!("# run_id={}\n{body}", self.run_id);
        self.write(name, text.as_bytes())
    }

    /// One JSON object per line.
    pub fn json_lines(&mut self, name: &str, lines: &[String]) -> Result<()> {
        let mut text = String::new();
        for l in lines {
            text.push_str(l);
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    pub fn finish(self, wall_time_seconds: f64) -> Result<RunManifest> {
        let manifest = RunManifest {
            run_id: self.run_id,
            code_version: CODE_VERSION.to_string(),
            config: self.config,
            wall_time_seconds,
            files: self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join(MANIFEST), text)?;
        Ok(manifest)
    }
}
