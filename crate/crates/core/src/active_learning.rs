//! Sentence selection rounds: cold-start bootstrapping from seed sentences
//! and entropy-zone batch selection driven by a trained classifier.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{cluster_jaccard, nearest_neighbors, sample_equal, ClusterError};
use crate::corpus::Corpus;
use crate::features::{EmbeddingTable, DEFAULT_NGRAM_MAX};
use crate::rng;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("seed sentence `{0}` has no embedding")]
    MissingSeedEmbedding(String),
    #[error("seed sentence `{0}` is not in the corpus")]
    UnknownSentence(String),
    #[error("selection pool has {pool} sentences, fewer than the {total} requested")]
    PoolTooSmall { pool: usize, total: usize },
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("scoring failed: {0}")]
    Model(String),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("writing round file {path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    ColdStart,
    EntropyBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Seed,
    SeedExpansion,
    HighEntropy,
    LowEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRound {
    pub round_id: u32,
    pub method: SelectionMethod,
    pub parameters: serde_json::Value,
    pub seed: u64,
    pub pool_size: usize,
    pub candidate_count: usize,
    pub selected: Vec<String>,
    pub provenance: BTreeMap<String, Provenance>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SelectionRound {
    /// Number of selected ids per provenance category.
    pub fn provenance_counts(&self) -> BTreeMap<Provenance, usize> {
        let mut counts = BTreeMap::new();
        for id in &self.selected {
            *counts.entry(self.provenance[id]).or_insert(0) += 1;
        }
        counts
    }

    pub fn file_name(&self) -> String {
        format!("round_{}.json", self.round_id)
    }

    /// Writes `dir/round_<n>.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf, SelectionError> {
        let path = dir.as_ref().join(self.file_name());
        let io = |e: std::io::Error| SelectionError::Io {
            path: path.clone(),
            message: e.to_string(),
        };
        std::fs::create_dir_all(dir.as_ref()).map_err(io)?;
        let json = serde_json::to_string_pretty(self).expect("round serializes");
        std::fs::write(&path, json + "\n").map_err(io)?;
        Ok(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColdStartParams {
    pub m: usize,
    pub hops: usize,
    pub k: usize,
    pub total: usize,
}

impl Default for ColdStartParams {
    fn default() -> Self {
        ColdStartParams {
            m: 30,
            hops: 2,
            k: 300,
            total: 1500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EntropyBatchParams {
    pub pool_cap: usize,
    pub hi_frac: f64,
    pub threshold: f64,
    pub k: usize,
    pub total: usize,
}

impl Default for EntropyBatchParams {
    fn default() -> Self {
        EntropyBatchParams {
            pool_cap: 15_000,
            hi_frac: 0.7,
            threshold: 0.5,
            k: 300,
            total: 1500,
        }
    }
}

/// Anything that yields a 4-class distribution per aspect head.
pub trait ClassProbabilities: Sync {
    fn class_probabilities(&self, sentence_id: &str, text: &str) -> Result<[[f64; 4]; 8], String>;
}

/// Shannon entropy divided by ln(c), so the result lies in [0, 1].
pub fn normalized_entropy(dist: &[f64]) -> Result<f64, SelectionError> {
    if dist.len() < 2 {
        return Err(SelectionError::InvalidDistribution(format!("{} classes", dist.len())));
    }
    if let Some(p) = dist.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(SelectionError::InvalidDistribution(format!("entry {p}")));
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(SelectionError::InvalidDistribution(format!("sums to {sum}")));
    }
    let h: f64 = dist.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    Ok((h / (dist.len() as f64).ln()).clamp(0.0, 1.0))
}

/// Mean normalized entropy over the 8 aspect heads.
pub fn sentence_entropy(heads: &[[f64; 4]; 8]) -> Result<f64, SelectionError> {
    let mut total = 0.0;
    for head in heads {
        total += normalized_entropy(head)?;
    }
    Ok(total / heads.len() as f64)
}

/// Bootstraps the first round from seed sentences.
///
/// Each hop takes the `m` nearest embedding neighbours of the previous hop's
/// newly found sentences; the pooled sentences are clustered and `total` are
/// drawn equally across clusters.
pub fn cold_start(
    seed_ids: &[String],
    table: &EmbeddingTable,
    corpus: &Corpus,
    params: &ColdStartParams,
    seed: u64,
    round_id: u32,
) -> Result<SelectionRound, SelectionError> {
    for id in seed_ids {
        if corpus.sentence(id).is_none() {
            return Err(SelectionError::UnknownSentence(id.clone()));
        }
        if !table.contains(id) {
            return Err(SelectionError::MissingSeedEmbedding(id.clone()));
        }
    }
    // Neighbours are restricted to sentences of eligible papers.
    let eligible: BTreeSet<&str> = corpus.sentences().map(|s| s.id.as_str()).collect();
    for id in seed_ids {
        if !eligible.contains(id.as_str()) {
            return Err(SelectionError::UnknownSentence(id.clone()));
        }
    }
    let mut search = EmbeddingTable::new(table.dimension);
    for (id, v) in table.iter() {
        if eligible.contains(id) {
            search.insert(id, v.to_vec()).expect("dimension matches");
        }
    }

    let mut provenance: BTreeMap<String, Provenance> = BTreeMap::new();
    let mut pool: Vec<String> = Vec::new();
    for id in seed_ids {
        if provenance.insert(id.clone(), Provenance::Seed).is_none() {
            pool.push(id.clone());
        }
    }
    let mut frontier = pool.clone();
    for _ in 0..params.hops {
        if params.m == 0 || frontier.is_empty() {
            break;
        }
        let found: Vec<Vec<String>> = frontier
            .par_iter()
            .map(|id| nearest_neighbors(id, &search, params.m))
            .collect::<Result<_, _>>()?;
        let mut next = Vec::new();
        for id in found.into_iter().flatten() {
            if !provenance.contains_key(&id) {
                provenance.insert(id.clone(), Provenance::SeedExpansion);
                pool.push(id.clone());
                next.push(id);
            }
        }
        frontier = next;
    }

    if pool.len() < params.total {
        return Err(SelectionError::PoolTooSmall {
            pool: pool.len(),
            total: params.total,
        });
    }
    let mut warnings = Vec::new();
    let k = clamp_k(params.k, pool.len(), &mut warnings);
    let items: Vec<(String, String)> = pool
        .iter()
        .map(|id| (id.clone(), corpus.sentence(id).expect("pool ids come from the corpus").text.clone()))
        .collect();
    let assignment = cluster_jaccard(&items, k, DEFAULT_NGRAM_MAX, seed)?;
    let selected = sample_equal(&assignment, params.total, rng_stream(seed, 1))?;
    let chosen: BTreeSet<&String> = selected.iter().collect();
    provenance.retain(|id, _| chosen.contains(id));

    Ok(SelectionRound {
        round_id,
        method: SelectionMethod::ColdStart,
        parameters: serde_json::json!({
            "seed_ids": seed_ids,
            "m": params.m,
            "hops": params.hops,
            "k": params.k,
            "total": params.total,
        }),
        seed,
        pool_size: pool.len(),
        candidate_count: pool.len(),
        selected,
        provenance,
        warnings,
    })
}

/// Selects the next batch from `unlabeled` (`(sentence_id, text)` pairs).
///
/// Candidates are drawn without replacement: `round(cap · hi_frac)` from
/// sentences whose mean normalized entropy exceeds `threshold`, the rest from
/// the complement. A zone that runs short is topped up from the other one
/// and the round records a warning.
pub fn entropy_batch<M: ClassProbabilities + ?Sized>(
    model: &M,
    unlabeled: &[(String, String)],
    params: &EntropyBatchParams,
    seed: u64,
    round_id: u32,
) -> Result<SelectionRound, SelectionError> {
    let mut seen = BTreeSet::new();
    let pool: Vec<&(String, String)> = unlabeled.iter().filter(|(id, _)| seen.insert(id.as_str())).collect();
    let entropies: Vec<f64> = pool
        .par_iter()
        .map(|(id, text)| {
            let heads = model.class_probabilities(id, text).map_err(SelectionError::Model)?;
            sentence_entropy(&heads)
        })
        .collect::<Result<_, _>>()?;
    let (mut high, mut low): (Vec<usize>, Vec<usize>) = (0..pool.len()).partition(|&i| entropies[i] > params.threshold);

    let mut warnings = Vec::new();
    let cap = params.pool_cap.min(pool.len());
    if cap < params.pool_cap {
        warnings.push(format!("pool has {} sentences; candidate cap {} reduced", pool.len(), params.pool_cap));
    }
    let mut n_hi = ((cap as f64) * params.hi_frac).round() as usize;
    let mut n_lo = cap - n_hi;
    if high.len() < n_hi {
        warnings.push(format!(
            "high-entropy zone has {} sentences, {} requested; filled from the complement",
            high.len(),
            n_hi
        ));
        n_lo += n_hi - high.len();
        n_hi = high.len();
    } else if low.len() < n_lo {
        warnings.push(format!(
            "low-entropy zone has {} sentences, {} requested; filled from the high-entropy zone",
            low.len(),
            n_lo
        ));
        n_hi += n_lo - low.len();
        n_lo = low.len();
    }

    let mut rng = rng::derived(seed, 0);
    high.shuffle(&mut rng);
    low.shuffle(&mut rng);
    let mut provenance = BTreeMap::new();
    let mut items = Vec::with_capacity(cap);
    for (zone, n, tag) in [(&high, n_hi, Provenance::HighEntropy), (&low, n_lo, Provenance::LowEntropy)] {
        for &i in &zone[..n] {
            let (id, text) = pool[i];
            provenance.insert(id.clone(), tag);
            items.push((id.clone(), text.clone()));
        }
    }
    // Cluster input order must not depend on the shuffle beyond the seed.
    items.sort();

    if items.len() < params.total {
        return Err(SelectionError::PoolTooSmall {
            pool: items.len(),
            total: params.total,
        });
    }
    let k = clamp_k(params.k, items.len(), &mut warnings);
    let assignment = cluster_jaccard(&items, k, DEFAULT_NGRAM_MAX, seed)?;
    let selected = sample_equal(&assignment, params.total, rng_stream(seed, 1))?;
    let chosen: BTreeSet<&String> = selected.iter().collect();
    provenance.retain(|id, _| chosen.contains(id));

    Ok(SelectionRound {
        round_id,
        method: SelectionMethod::EntropyBatch,
        parameters: serde_json::json!({
            "pool_cap": params.pool_cap,
            "hi_frac": params.hi_frac,
            "threshold": params.threshold,
            "k": params.k,
            "total": params.total,
            "high_candidates": n_hi,
            "low_candidates": n_lo,
        }),
        seed,
        pool_size: pool.len(),
        candidate_count: items.len(),
        selected,
        provenance,
        warnings,
    })
}

fn clamp_k(k: usize, n: usize, warnings: &mut Vec<String>) -> usize {
    if k > n {
        warnings.push(format!("k = {k} exceeds {n} candidates; using k = {n}"));
        n
    } else {
        k
    }
}

fn rng_stream(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream)
}
