//! Run manifests: enough provenance to reproduce every output bit for bit
//! (input content hash, subcommand, fully resolved configuration), plus
//! wall-clock timings per stage for the record.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub input: InputRecord,
    pub config: crate::config::Resolved,
    pub outputs: Vec<String>,
    pub timings_seconds: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        input: &Path,
        config: crate::config::Resolved,
    ) -> std::io::Result<Self> {
        let bytes = std::fs::read(input)?;
        let digest = Sha256::digest(&bytes);
        Ok(RunManifest {
            tool: "lpcm",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            input: InputRecord {
                path: input.display().to_string(),
                sha256: hex_string(&digest),
            },
            config,
            outputs: Vec::new(),
            timings_seconds: BTreeMap::new(),
        })
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn record_timing(&mut self, stage: &str, seconds: f64) {
        self.timings_seconds.insert(stage.to_string(), seconds);
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json)
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Output path helper: `<out_dir>/<input stem><suffix>`.
pub fn output_path(out_dir: &Path, input: &Path, suffix: &str) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "mesh".into());
    out_dir.join(format!("{stem}{suffix}"))
}
