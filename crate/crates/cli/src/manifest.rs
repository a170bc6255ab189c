use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use elastica::io::digest;

/// Content digest of one file.
#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    /// FNV-1a 64-bit, hex.
    pub digest: String,
}

impl FileDigest {
    pub fn of(path: &FsPath) -> std::io::Result<Self> {
        let bytes = fs::read(path)?;
        Ok(FileDigest {
            path: path.to_path_buf(),
            digest: format!("{:016x}", digest(&bytes)),
        })
    }
}

/// Provenance record written next to every output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub inputs: Vec<FileDigest>,
    pub version: String,
    pub wall_time: f64,
    pub outputs: Vec<FileDigest>,
    /// Command-specific facts (decompositions, stop reasons, asymmetry).
    #[serde(skip_serializing_if = "Value::is_null")]
    pub notes: Value,
}

pub struct Recorder {
    command: String,
    start: Instant,
    inputs: Vec<FileDigest>,
}

impl Recorder {
    pub fn new(command: &str) -> Self {
        Recorder {
            command: command.to_string(),
            start: Instant::now(),
            inputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &FsPath) -> std::io::Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    /// Write `<first output>.manifest.json` and return its path.
    pub fn finish(self, config: Value, outputs: &[PathBuf], notes: Value) -> std::io::Result<PathBuf> {
        let outputs = outputs.iter().map(|p| FileDigest::of(p)).collect::<std::io::Result<Vec<_>>>()?;
        let manifest = RunManifest {
            command: self.command,
            config,
            inputs: self.inputs,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time: self.start.elapsed().as_secs_f64(),
            outputs,
            notes,
        };
        let target = manifest_path(&manifest.outputs[0].path);
        fs::write(&target, serde_json::to_vec_pretty(&manifest).map_err(std::io::Error::other)?)?;
        Ok(target)
    }
}

pub fn manifest_path(output: &FsPath) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}
