//! Run manifests: every output directory records the command, config,
//! seed, timestamps, and SHA-256 of each artifact, enough to rerun the
//! command bit-identically (modulo the timestamps).

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct ArtifactRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    config: Option<String>,
    seed: u64,
    started_unix: u64,
    finished_unix: u64,
    outputs: Vec<ArtifactRecord>,
}

pub struct RunWriter {
    out: Option<PathBuf>,
    pub config_path: Option<PathBuf>,
    seed: u64,
    started: u64,
    outputs: Vec<ArtifactRecord>,
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunWriter {
    pub fn new(out: Option<PathBuf>, seed: u64) -> anyhow::Result<Self> {
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Self { out, config_path: None, seed, started: now_unix(), outputs: Vec::new() })
    }

    /// Writes text to the output directory, or stdout when no --out given.
    pub fn emit_text(&mut self, name: &str, text: &str) -> anyhow::Result<()> {
        match &self.out {
            Some(dir) => {
                let path = dir.join(name);
                std::fs::write(&path, text)?;
                self.outputs.push(ArtifactRecord {
                    path: name.to_string(),
                    sha256: hex::encode(Sha256::digest(text.as_bytes())),
                });
            }
            None => print!("{text}"),
        }
        Ok(())
    }

    pub fn emit_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.emit_text(name, &text)
    }

    pub fn finish(self, command: &str) -> anyhow::Result<()> {
        let Some(dir) = &self.out else { return Ok(()) };
        let manifest = Manifest {
            command: command.to_string(),
            config: self.config_path.map(|p| p.display().to_string()),
            seed: self.seed,
            started_unix: self.started,
            finished_unix: now_unix(),
            outputs: self.outputs,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(dir.join("run_manifest.json"), text)?;
        Ok(())
    }
}
