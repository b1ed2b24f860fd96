use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

/// Provenance of one command run, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub version: &'static str,
    pub wall_s: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(config: serde_json::Value, seeds: Vec<u64>, start: Instant, outputs: Vec<PathBuf>) -> Self {
        RunManifest {
            command: std::env::args().collect(),
            config,
            seeds,
            version: env!("CARGO_PKG_VERSION"),
            wall_s: start.elapsed().as_secs_f64(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        }
    }

    /// Writes `<output>.manifest.json`.
    pub fn write_for(&self, output: &Path) -> anyhow::Result<()> {
        let path = with_suffix(output, ".manifest.json");
        crate::write_file(&path, &serde_json::to_string_pretty(self)?)
    }
}

/// `path` with `suffix` appended to its file name.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
