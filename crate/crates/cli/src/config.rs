//! Run configuration: a JSON file whose sections override module defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use revmine_core::active_learning::{ColdStartParams, EntropyBatchParams};
use revmine_core::analytics::{DecisionMapping, InterventionRule, Normalizer, RecNetParams};
use revmine_core::annotation::Role;
use revmine_core::corpus::api::ApiConfig;
use revmine_core::models::{ModelConfig, ModelKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorEntry {
    pub id: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub addr: String,
    pub annotators: Vec<AnnotatorEntry>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            addr: "127.0.0.1:8080".into(),
            annotators: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Corpus JSONL read by `ingest`.
    pub corpus: Option<PathBuf>,
    /// Sentence embeddings JSONL copied in by `ingest`.
    pub embeddings: Option<PathBuf>,
    /// Already adjudicated training set copied in by `ingest`.
    pub training: Option<PathBuf>,
    pub api: Option<ApiConfig>,
    pub seed: u64,
    /// Random seed sentences the cold-start round grows from.
    pub seed_sentences: usize,
    pub cold_start: ColdStartParams,
    pub entropy_batch: EntropyBatchParams,
    /// Model that scores candidates in `select-batch` and `serve`.
    pub selection_model: ModelConfig,
    /// Model trained by `train` and used by `label-all`.
    pub model: ModelConfig,
    /// Models cross-validated by `train`.
    pub evaluate: Vec<ModelKind>,
    pub folds: usize,
    pub recommendation: RecNetParams,
    pub ablation: bool,
    /// Review scores above this count as accept.
    pub accept_threshold: u8,
    pub normalizer: Normalizer,
    pub intervention_rule: InterventionRule,
    pub serve: ServeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            embeddings: None,
            training: None,
            api: None,
            seed: 0,
            seed_sentences: 50,
            cold_start: ColdStartParams::default(),
            entropy_batch: EntropyBatchParams::default(),
            selection_model: ModelConfig::new(ModelKind::RandomForest),
            model: ModelConfig::new(ModelKind::Ffnn),
            evaluate: vec![ModelKind::Majority, ModelKind::Mnb, ModelKind::RandomForest, ModelKind::LinearSvm, ModelKind::Ffnn],
            folds: 10,
            recommendation: RecNetParams::default(),
            ablation: true,
            accept_threshold: DecisionMapping::default().threshold,
            normalizer: Normalizer::Exact,
            intervention_rule: InterventionRule::MeanThreshold,
            serve: ServeConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.corpus, &mut config.embeddings, &mut config.training].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(cache) = config.api.as_mut().and_then(|a| a.cache_dir.as_mut()) {
            if cache.is_relative() {
                *cache = base.join(&*cache);
            }
        }
        Ok(config)
    }

    pub fn mapping(&self) -> Result<DecisionMapping> {
        Ok(DecisionMapping::new(self.accept_threshold)?)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_sections_keep_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"corpus": "data/c.jsonl", "seed": 9, "entropy_batch": {"total": 10}, "model": {"kind": "mnb"}}"#,
        )
        .unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.corpus.unwrap(), dir.path().join("data/c.jsonl"));
        assert_eq!(c.seed, 9);
        assert_eq!(c.entropy_batch.total, 10);
        assert_eq!(c.entropy_batch.pool_cap, EntropyBatchParams::default().pool_cap);
        assert_eq!(c.model.kind, ModelKind::Mnb);
        assert_eq!(c.folds, 10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"sed": 1}"#).unwrap();
        assert!(RunConfig::load(&path).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
