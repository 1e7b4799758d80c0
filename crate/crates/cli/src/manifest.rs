//! Run manifest: what went in, what came out, and what each stage cost.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Streams the file through SHA-256.
pub fn file_sha256(path: &Path) -> Result<(String, u64)> {
    let file = File::open(path).map_err(|e| CliError::at(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    let mut total = 0u64;
    loop {
        let k = reader.read(&mut buf).map_err(|e| CliError::at(path, e))?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
        total += k as u64;
    }
    Ok((hex(&hasher.finalize()), total))
}

/// Peak resident set size so far, from `VmHWM` (Linux only).
pub fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse().ok())
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub wall_seconds: f64,
    pub peak_rss_kib: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub config: PipelineConfig,
    pub inputs: Vec<FileDigest>,
    pub cache: Option<FileDigest>,
    pub stages: Vec<StageRecord>,
    pub outputs: Vec<FileDigest>,
    pub status: String,
    pub error: Option<String>,
}

/// Collects the manifest during a run and writes every output file.
pub struct Recorder {
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl Recorder {
    pub fn new(command: &str, config: &PipelineConfig) -> Result<Self> {
        std::fs::create_dir_all(&config.out).map_err(|e| CliError::at(&config.out, e))?;
        Ok(Recorder {
            out_dir: config.out.clone(),
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                config_hash: config.hash(),
                config: config.clone(),
                inputs: Vec::new(),
                cache: None,
                stages: Vec::new(),
                outputs: Vec::new(),
                status: "running".into(),
                error: None,
            },
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Checksums an input and returns its digest.
    pub fn input(&mut self, path: &Path) -> Result<String> {
        let (sha256, bytes) = file_sha256(path)?;
        self.manifest.inputs.push(FileDigest {
            path: path.to_path_buf(),
            bytes,
            sha256: sha256.clone(),
        });
        Ok(sha256)
    }

    pub fn cache(&mut self, path: &Path) -> Result<()> {
        let (sha256, bytes) = file_sha256(path)?;
        self.manifest.cache = Some(FileDigest {
            path: path.to_path_buf(),
            bytes,
            sha256,
        });
        Ok(())
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let r = f(self);
        self.manifest.stages.push(StageRecord {
            name: name.to_string(),
            wall_seconds: start.elapsed().as_secs_f64(),
            peak_rss_kib: peak_rss_kib(),
        });
        r
    }

    /// Writes `bytes` to `name` under the output directory.
    pub fn output(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out_dir.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::at(dir, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::at(&path, e))?;
        self.manifest.outputs.push(FileDigest {
            path,
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("report serialises");
        bytes.push(b'\n');
        self.output(name, &bytes)
    }

    /// Writes the manifest; called exactly once per run.
    pub fn finish(mut self, outcome: &Result<()>) -> Result<()> {
        match outcome {
            Ok(()) => self.manifest.status = "ok".into(),
            Err(e) => {
                self.manifest.status = "error".into();
                self.manifest.error = Some(e.to_string());
            }
        }
        let path = self.out_dir.join(MANIFEST_FILE);
        let mut bytes = serde_json::to_vec_pretty(&self.manifest).expect("manifest serialises");
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| CliError::at(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn peak_rss_is_readable_on_linux() {
        if cfg!(target_os = "linux") {
            assert!(peak_rss_kib().unwrap() > 0);
        }
    }
}
