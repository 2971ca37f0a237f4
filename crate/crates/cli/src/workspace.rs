//! Workspace layout, prerequisite checks and run records.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::config::{sha256_hex, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Artifact {
    Corpus,
    Embeddings,
    Segmented,
    Rounds,
    Journal,
    Training,
    Classifier,
    Evaluation,
    Predictions,
    Profiles,
    Recommendation,
    Ablation,
    Reports,
}

impl Artifact {
    pub fn rel_path(self) -> &'static str {
        match self {
            Artifact::Corpus => "corpus.jsonl",
            Artifact::Embeddings => "embeddings.jsonl",
            Artifact::Segmented => "segmented.jsonl",
            Artifact::Rounds => "rounds",
            Artifact::Journal => "annotations/journal.jsonl",
            Artifact::Training => "training.jsonl",
            Artifact::Classifier => "models/classifier.json",
            Artifact::Evaluation => "models/evaluation.json",
            Artifact::Predictions => "predictions.jsonl",
            Artifact::Profiles => "profiles/profiles.json",
            Artifact::Recommendation => "analysis/recommendation.json",
            Artifact::Ablation => "analysis/ablation.json",
            Artifact::Reports => "reports",
        }
    }

    fn name(self) -> &'static str {
        match self {
            Artifact::Corpus => "corpus",
            Artifact::Embeddings => "embeddings",
            Artifact::Segmented => "segmented corpus",
            Artifact::Rounds => "selection rounds",
            Artifact::Journal => "annotation journal",
            Artifact::Training => "training set",
            Artifact::Classifier => "classifier",
            Artifact::Evaluation => "evaluation",
            Artifact::Predictions => "predictions",
            Artifact::Profiles => "profiles",
            Artifact::Recommendation => "recommendation results",
            Artifact::Ablation => "ablation results",
            Artifact::Reports => "reports",
        }
    }

    fn producer(self) -> &'static str {
        match self {
            Artifact::Corpus => "ingest (or fetch)",
            Artifact::Embeddings => "ingest with `embeddings` set in the config",
            Artifact::Segmented => "segment",
            Artifact::Rounds => "bootstrap",
            Artifact::Journal => "serve",
            Artifact::Training => "serve and annotate, or ingest with `training` set in the config",
            Artifact::Classifier | Artifact::Evaluation => "train",
            Artifact::Predictions => "label-all",
            Artifact::Profiles => "aggregate",
            Artifact::Recommendation | Artifact::Ablation => "analyze",
            Artifact::Reports => "report",
        }
    }
}

pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    /// Creates the directory if needed.
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating workspace {}", root.display()))?;
        Ok(Workspace {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, a: Artifact) -> PathBuf {
        self.root.join(a.rel_path())
    }

    pub fn has(&self, a: Artifact) -> bool {
        self.path(a).exists()
    }

    /// Path of an artifact that must already exist.
    pub fn require(&self, a: Artifact) -> Result<PathBuf> {
        let path = self.path(a);
        if !path.exists() {
            bail!("{} not found; run {} (expected {})", a.name(), a.producer(), path.display());
        }
        Ok(path)
    }

    /// Writes `contents` to a workspace-relative path, creating parents.
    pub fn write(&self, rel: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    config_hash: String,
    threads: usize,
    config: &'a RunConfig,
    /// Workspace-relative path to SHA-256 of each artifact written.
    outputs: BTreeMap<String, String>,
}

/// Writes `run.json` and `runs/<command>.json`.
pub fn record_run(ws: &Workspace, command: &str, config: &RunConfig, threads: usize, outputs: &[PathBuf]) -> Result<()> {
    let mut hashes = BTreeMap::new();
    for path in outputs {
        for file in files_under(path)? {
            let rel = file.strip_prefix(ws.root()).unwrap_or(&file).to_string_lossy().replace('\\', "/");
            hashes.insert(rel, sha256_hex(&std::fs::read(&file)?));
        }
    }
    let record = RunRecord {
        command,
        config_hash: config.hash(),
        threads,
        config,
        outputs: hashes,
    };
    let json = serde_json::to_string_pretty(&record)? + "\n";
    ws.write(&format!("runs/{command}.json"), &json)?;
    ws.write("run.json", &json)?;
    Ok(())
}

fn files_under(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(path)? {
        out.extend(files_under(&entry?.path())?);
    }
    out.sort();
    Ok(out)
}
