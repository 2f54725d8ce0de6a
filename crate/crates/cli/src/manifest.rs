//! Run provenance: a manifest describing what was run, and its hash.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub root_seed: u64,
    pub version: String,
    pub hash: String,
    pub started: u64,
    pub finished: Option<u64>,
    pub wall_seconds: Option<f64>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// SHA-256 over the canonical JSON of command, config, seed and version.
/// `serde_json` keeps object keys sorted, so equal inputs hash equally.
pub fn manifest_hash(command: &str, config: &Value, root_seed: u64, version: &str) -> String {
    let canonical = serde_json::json!({
        "command": command,
        "config": config,
        "root_seed": root_seed,
        "version": version,
    });
    let bytes = serde_json::to_vec(&canonical).expect("JSON values serialize");
    hex::encode(Sha256::digest(&bytes))
}

impl RunManifest {
    pub fn start(command: &str, config: Value, root_seed: u64) -> Self {
        let version = env!("CARGO_PKG_VERSION").to_string();
        let hash = manifest_hash(command, &config, root_seed, &version);
        Self {
            command: command.to_string(),
            config,
            root_seed,
            version,
            hash,
            started: unix_now(),
            finished: None,
            wall_seconds: None,
        }
    }

    pub fn finish(&mut self, wall_seconds: f64) {
        self.finished = Some(unix_now());
        self.wall_seconds = Some(wall_seconds);
    }

    /// Header comment carried by every output file.
    pub fn tag(&self) -> String {
        format!("manifest: {}", self.hash)
    }
}
