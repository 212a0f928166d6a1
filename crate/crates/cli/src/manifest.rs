//! `manifest.json`: what was run, with which settings, and what it wrote.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub settings: Value,
    pub kernel_cache_dir: Option<String>,
    pub outputs: Vec<String>,
    pub results: Value,
    pub exit_code: i32,
    pub elapsed_seconds: f64,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            settings: Value::Null,
            kernel_cache_dir: None,
            outputs: Vec::new(),
            results: Value::Null,
            exit_code: 0,
            elapsed_seconds: 0.0,
        }
    }

    pub fn record(&mut self, path: PathBuf) {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        self.outputs.push(name);
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}
