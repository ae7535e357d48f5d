//! Run manifests: every command leaves a record of what it resolved, read,
//! and wrote, next to the outputs themselves.

use std::path::Path;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;

use hdnet::io::write_json_pretty;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to re-run a command: the fully resolved configuration
/// after flag/file/default precedence, not the raw flags. Timestamps are the
/// only fields that differ between identical runs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub config: serde_json::Value,
    pub started_at: String,
    pub finished_at: String,
}

pub fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// Write `manifest.json` into `dir` atomically.
pub fn write(dir: &Path, manifest: &RunManifest, force: bool) -> hdnet::Result<()> {
    write_json_pretty(&dir.join(MANIFEST_FILE), manifest, force)
}
