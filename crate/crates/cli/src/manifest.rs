//! Run manifest: inputs, configuration hash, seed and output digests.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::hex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub role: String,
    #[serde(flatten)]
    pub file: FileDigest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub inputs: Vec<InputDigest>,
    pub stages: Vec<StageRecord>,
    pub outputs: Vec<FileDigest>,
}

pub fn digest(path: &Path, display: String) -> Result<FileDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FileDigest {
        path: display,
        sha256: hex(&Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

/// Collects the files written under the output directory, by stage.
#[derive(Debug)]
pub struct Recorder {
    pub out: PathBuf,
    inputs: Vec<(String, PathBuf, String)>,
    stages: Vec<StageRecord>,
}

impl Recorder {
    pub fn new(out: PathBuf) -> Self {
        Recorder {
            out,
            inputs: Vec::new(),
            stages: Vec::new(),
        }
    }

    /// `display` is how the input is named in the manifest; paths inside
    /// the output directory are given relative to it so that manifests
    /// from different output directories compare equal.
    pub fn input(&mut self, role: &str, path: &Path) {
        let display = match path.strip_prefix(&self.out) {
            Ok(rel) => rel.to_string_lossy().replace('\\', "/"),
            Err(_) => path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
        };
        self.inputs.push((role.to_string(), path.to_path_buf(), display));
    }

    pub fn begin(&mut self, stage: &str) {
        self.stages.push(StageRecord {
            stage: stage.to_string(),
            outputs: Vec::new(),
        });
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    /// Writes `bytes` to `rel` under the output directory and records it
    /// against the current stage.
    pub fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.stages
            .last_mut()
            .expect("write outside a stage")
            .outputs
            .push(rel.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text)
    }

    pub fn finish(&self, command: &str, seed: u64, config_hash: String) -> Result<Manifest> {
        let inputs = self
            .inputs
            .iter()
            .map(|(role, path, display)| {
                Ok(InputDigest {
                    role: role.clone(),
                    file: digest(path, display.clone())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let written: BTreeSet<&String> = self.stages.iter().flat_map(|s| &s.outputs).collect();
        let outputs = written
            .into_iter()
            .map(|rel| digest(&self.path(rel), rel.clone()))
            .collect::<Result<Vec<_>>>()?;
        let m = Manifest {
            tool: "blk".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config_hash,
            inputs,
            stages: self.stages.clone(),
            outputs,
        };
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        fs::write(self.path("manifest.json"), text).context("writing manifest.json")?;
        Ok(m)
    }
}
