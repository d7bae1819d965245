//! Artifact directory, per-stage manifest records and content hashes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::DataError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance stamped on every emitted file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub seed: Option<u64>,
    pub config_hash: String,
}

impl Meta {
    pub fn new(stage: &str, seed: Option<u64>, config_hash: &str) -> Self {
        Self {
            tool: "pulmocal".into(),
            version: VERSION.into(),
            stage: stage.into(),
            seed,
            config_hash: config_hash.into(),
        }
    }

    /// `#`-prefixed header line for CSV outputs.
    pub fn comment(&self) -> String {
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        format!(
            "# {} {} stage={} seed={} config_hash={}\n",
            self.tool, self.version, self.stage, seed, self.config_hash
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).map_err(|e| DataError(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Incremental hash over labelled config sections, input files and upstream
/// stage hashes. Paths never enter the hash, only contents.
pub struct StageHasher(Sha256);

impl StageHasher {
    pub fn new(stage: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"pulmocal-stage\0");
        h.update(stage.as_bytes());
        Self(h)
    }

    fn label(&mut self, label: &str) {
        self.0.update(b"\0");
        self.0.update(label.as_bytes());
        self.0.update(b"=");
    }

    pub fn value<T: Serialize>(&mut self, label: &str, v: &T) -> &mut Self {
        self.label(label);
        self.0.update(serde_json::to_vec(v).expect("config values serialize"));
        self
    }

    pub fn text(&mut self, label: &str, s: &str) -> &mut Self {
        self.label(label);
        self.0.update(s.as_bytes());
        self
    }

    pub fn file(&mut self, label: &str, path: &Path) -> anyhow::Result<&mut Self> {
        let digest = file_sha256(path)?;
        self.label(label);
        self.0.update(digest.as_bytes());
        Ok(self)
    }

    pub fn finish(&mut self) -> String {
        hex::encode(self.0.clone().finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    pub seed: Option<u64>,
    pub version: String,
    /// Output path relative to the artifact directory → SHA-256 of contents.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
}

/// Whether a stage has to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Freshness {
    /// Recorded with the same hash and every output intact.
    UpToDate,
    Stale,
}

pub struct ArtifactDir {
    root: PathBuf,
    manifest: Manifest,
}

impl ArtifactDir {
    pub fn open(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating artifact directory {}", root.display()))?;
        let path = root.join(MANIFEST_FILE);
        let manifest = if path.exists() {
            let text = fs::read_to_string(&path)?;
            serde_json::from_str(&text).map_err(|e| DataError(format!("corrupt manifest {}: {e}", path.display())))?
        } else {
            Manifest::default()
        };
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn record(&self, stage: &str) -> Option<&StageRecord> {
        self.manifest.stages.get(stage)
    }

    fn outputs_intact(&self, rec: &StageRecord) -> bool {
        rec.outputs
            .iter()
            .all(|(rel, sha)| file_sha256(&self.path(rel)).is_ok_and(|s| &s == sha))
    }

    /// The record of an upstream stage whose outputs are all present.
    pub fn require(&self, stage: &str, artifact: &str) -> anyhow::Result<&StageRecord> {
        match self.record(stage) {
            Some(rec) if rec.outputs.keys().all(|rel| self.path(rel).exists()) => Ok(rec),
            _ => bail!(DataError(format!("missing artifact: {artifact}"))),
        }
    }

    pub fn freshness(&self, stage: &str, hash: &str, force: bool) -> anyhow::Result<Freshness> {
        match self.record(stage) {
            None => Ok(Freshness::Stale),
            Some(rec) if rec.config_hash == hash => Ok(if self.outputs_intact(rec) {
                Freshness::UpToDate
            } else {
                Freshness::Stale
            }),
            Some(_) if force => Ok(Freshness::Stale),
            Some(rec) => bail!(DataError(format!(
                "config-hash mismatch for stage '{stage}' (recorded {}, current {}); rerun with --force",
                short(&rec.config_hash),
                short(hash)
            ))),
        }
    }

    /// Records a finished stage and its outputs, then saves the manifest.
    pub fn commit(&mut self, stage: &str, meta: &Meta, outputs: &[String]) -> anyhow::Result<()> {
        let mut hashed = BTreeMap::new();
        for rel in outputs {
            hashed.insert(rel.clone(), file_sha256(&self.path(rel))?);
        }
        self.manifest.stages.insert(
            stage.to_string(),
            StageRecord {
                config_hash: meta.config_hash.clone(),
                seed: meta.seed,
                version: meta.version.clone(),
                outputs: hashed,
            },
        );
        let text = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(self.path(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }
}

fn short(h: &str) -> &str {
    &h[..h.len().min(12)]
}

#[derive(Serialize)]
struct Stamped<'a, T> {
    meta: &'a Meta,
    data: &'a T,
}

#[derive(Deserialize)]
struct StampedOwned<T> {
    meta: Meta,
    data: T,
}

pub fn write_json(path: &Path, meta: &Meta, data: &impl Serialize) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(&Stamped { meta, data })?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<(Meta, T)> {
    let text = fs::read_to_string(path).map_err(|e| DataError(format!("cannot read {}: {e}", path.display())))?;
    let s: StampedOwned<T> =
        serde_json::from_str(&text).map_err(|e| DataError(format!("{}: {e}", path.display())))?;
    Ok((s.meta, s.data))
}

/// Writes text with a provenance comment line in front.
pub fn write_text(path: &Path, meta: &Meta, body: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = meta.comment().into_bytes();
    out.extend_from_slice(body);
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
