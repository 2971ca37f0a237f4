//! Per-aspect sentiment classifiers.
//!
//! An [`AspectClassifier`] holds eight independent 4-class heads, one per
//! aspect. Text models (naive Bayes, random forest, linear SVM) read hashed
//! n-gram features; the feed-forward network reads sentence embeddings.

pub mod forest;
pub mod metrics;
pub mod naive_bayes;
pub mod nn;
pub mod svm;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::active_learning::ClassProbabilities;
use crate::annotation::{Aspect, LabeledSentence, Sentiment};
use crate::features::{EmbeddingTable, FeatureScheme, Featurizer, SparseVector, DEFAULT_HASH_DIMENSION, DEFAULT_NGRAM_MAX};
use crate::rng;
use forest::{ForestParams, RandomForest};
use metrics::{metrics, Averaging, Scores};
use naive_bayes::MultinomialNb;
use nn::{Adam, Mlp, OutputKind, Target};
use svm::{LinearSvm, SvmParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const CLASSES: usize = Sentiment::COUNT;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("{0} model needs an embedding table")]
    EmbeddingsRequired(ModelKind),
    #[error("embedding missing for sentence `{0}`")]
    MissingEmbedding(String),
    #[error("embedding dimension {found} does not match the model's {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need 2 <= folds <= {n} examples, got {folds} folds")]
    InvalidFolds { folds: usize, n: usize },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mnb,
    RandomForest,
    LinearSvm,
    Ffnn,
    /// Predicts each head's most frequent training class.
    Majority,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Mnb,
        ModelKind::RandomForest,
        ModelKind::LinearSvm,
        ModelKind::Ffnn,
        ModelKind::Majority,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mnb => "mnb",
            ModelKind::RandomForest => "random_forest",
            ModelKind::LinearSvm => "linear_svm",
            ModelKind::Ffnn => "ffnn",
            ModelKind::Majority => "majority",
        }
    }

    pub fn uses_embeddings(self) -> bool {
        self == ModelKind::Ffnn
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown model kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FfnnParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
}

impl Default for FfnnParams {
    fn default() -> Self {
        FfnnParams {
            hidden: 256,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 100,
            patience: 5,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub scheme: FeatureScheme,
    pub hash_dimension: usize,
    pub ngram_max: usize,
    pub nb_alpha: f64,
    pub forest: ForestParams,
    pub svm: SvmParams,
    pub ffnn: FfnnParams,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::RandomForest,
            scheme: FeatureScheme::HashedNgramBinary,
            hash_dimension: DEFAULT_HASH_DIMENSION,
            ngram_max: DEFAULT_NGRAM_MAX,
            nb_alpha: 1.0,
            forest: ForestParams::default(),
            svm: SvmParams::default(),
            ffnn: FfnnParams::default(),
        }
    }
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        ModelConfig {
            kind,
            ..ModelConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Head {
    Mnb(MultinomialNb),
    Forest(RandomForest),
    Svm(LinearSvm),
    Ffnn { net: Mlp, mask: Vec<bool> },
    Majority { distribution: Vec<f64> },
}

enum Input<'a> {
    Sparse(SparseVector),
    Dense(&'a [f64]),
}

impl Head {
    fn predict_proba(&self, input: &Input<'_>) -> Vec<f64> {
        match (self, input) {
            (Head::Mnb(m), Input::Sparse(x)) => m.predict_proba(x),
            (Head::Forest(m), Input::Sparse(x)) => m.predict_proba(x),
            (Head::Svm(m), Input::Sparse(x)) => m.predict_proba(x),
            (Head::Ffnn { net, mask }, Input::Dense(x)) => net.predict(x, Some(mask)),
            (Head::Majority { distribution }, _) => distribution.clone(),
            _ => unreachable!("input kind matches the model kind"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePrediction {
    pub sentence_id: String,
    /// Per aspect, probabilities of Positive, Negative, Neutral, Absent.
    pub distributions: [[f64; 4]; 8],
    pub labels: [Sentiment; 8],
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(dist: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = i;
        }
    }
    best
}

impl SentencePrediction {
    pub fn new(sentence_id: impl Into<String>, distributions: [[f64; 4]; 8]) -> Self {
        let labels = std::array::from_fn(|a| Sentiment::from_index(argmax(&distributions[a])));
        SentencePrediction {
            sentence_id: sentence_id.into(),
            distributions,
            labels,
        }
    }

    pub fn label(&self, aspect: Aspect) -> Sentiment {
        self.labels[aspect.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectClassifier {
    pub format_version: u32,
    pub config: ModelConfig,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub featurizer: Option<Featurizer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dimension: Option<usize>,
    pub heads: Vec<Head>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn head_seed(seed: u64, head: usize) -> u64 {
    seed.wrapping_add((head as u64) << 32)
}

fn embedding_rows<'a>(
    ids: impl Iterator<Item = &'a str>,
    table: &'a EmbeddingTable,
) -> Result<Vec<&'a [f64]>, ModelError> {
    ids.map(|id| table.get(id).map_err(|_| ModelError::MissingEmbedding(id.to_string())))
        .collect()
}

fn train_ffnn(xs: &[&[f64]], ys: &[usize], mask: Vec<bool>, params: &FfnnParams, seed: u64) -> Head {
    let mut rng = rng::seeded(seed);
    let dim = xs[0].len();
    let mut net = Mlp::new(&[dim, params.hidden, CLASSES], OutputKind::Softmax, 0.0, &mut rng);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((xs.len() as f64) * params.validation_fraction).round() as usize;
    let n_val = if xs.len() - n_val < 1 { 0 } else { n_val };
    let (val, train) = order.split_at(n_val);
    let to_xy = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<Target>) {
        idx.iter().map(|&i| (xs[i].to_vec(), Target::Class(ys[i]))).unzip()
    };
    let (tx, ty) = to_xy(train);
    let (vx, vy) = to_xy(val);
    let mut adam = Adam::new(params.learning_rate);
    let mut best = (f64::INFINITY, net.clone());
    let mut stale = 0;
    for _ in 0..params.max_epochs {
        net.train_epoch(&mut adam, &tx, &ty, Some(&mask), params.batch_size, &mut rng);
        if vx.is_empty() {
            best.1 = net.clone();
            continue;
        }
        let loss = net.mean_loss(&vx, &vy, Some(&mask));
        if loss < best.0 {
            best = (loss, net.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= params.patience {
                break;
            }
        }
    }
    Head::Ffnn { net: best.1, mask }
}

impl AspectClassifier {
    /// Trains all eight heads. A class missing from a head's training labels
    /// gets probability 0 and a warning.
    pub fn train(
        examples: &[LabeledSentence],
        config: &ModelConfig,
        embeddings: Option<&EmbeddingTable>,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if examples.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let mut warnings = Vec::new();
        for aspect in Aspect::ALL {
            for s in Sentiment::ALL {
                if !examples.iter().any(|e| e.labels[aspect.index()] == s) {
                    warnings.push(format!("{}: no {} training examples; class gets probability 0", aspect.key(), s.key()));
                }
            }
        }
        let labels_of = |a: usize| -> Vec<usize> { examples.iter().map(|e| e.labels[a].index()).collect() };

        let mut featurizer = None;
        let mut embedding_dimension = None;
        let heads: Vec<Head> = if config.kind.uses_embeddings() {
            let table = embeddings.ok_or(ModelError::EmbeddingsRequired(config.kind))?;
            let xs = embedding_rows(examples.iter().map(|e| e.sentence_id.as_str()), table)?;
            embedding_dimension = Some(table.dimension);
            (0..Aspect::COUNT)
                .into_par_iter()
                .map(|a| {
                    let ys = labels_of(a);
                    let mask: Vec<bool> = (0..CLASSES).map(|c| ys.contains(&c)).collect();
                    train_ffnn(&xs, &ys, mask, &config.ffnn, head_seed(seed, a))
                })
                .collect()
        } else if config.kind == ModelKind::Majority {
            (0..Aspect::COUNT)
                .map(|a| {
                    let mut counts = [0usize; CLASSES];
                    for y in labels_of(a) {
                        counts[y] += 1;
                    }
                    let top = argmax(&counts.map(|c| c as f64));
                    let mut distribution = vec![0.0; CLASSES];
                    distribution[top] = 1.0;
                    Head::Majority { distribution }
                })
                .collect()
        } else {
            let texts: Vec<&str> = examples.iter().map(|e| e.text.as_str()).collect();
            let f = Featurizer::new(config.scheme, config.hash_dimension, config.ngram_max).fit(&texts);
            let xs: Vec<SparseVector> = texts.par_iter().map(|t| f.transform(t)).collect();
            featurizer = Some(f);
            (0..Aspect::COUNT)
                .into_par_iter()
                .map(|a| {
                    let ys = labels_of(a);
                    let s = head_seed(seed, a);
                    match config.kind {
                        ModelKind::Mnb => Head::Mnb(MultinomialNb::fit(&xs, &ys, CLASSES, config.nb_alpha)),
                        ModelKind::RandomForest => Head::Forest(RandomForest::fit(&xs, &ys, CLASSES, &config.forest, s)),
                        ModelKind::LinearSvm => Head::Svm(LinearSvm::fit(&xs, &ys, CLASSES, &config.svm, s)),
                        ModelKind::Ffnn | ModelKind::Majority => unreachable!(),
                    }
                })
                .collect()
        };
        Ok(AspectClassifier {
            format_version: MODEL_FORMAT_VERSION,
            config: *config,
            seed,
            featurizer,
            embedding_dimension,
            heads,
            warnings,
        })
    }

    fn distributions(&self, input: &Input<'_>) -> [[f64; 4]; 8] {
        std::array::from_fn(|a| {
            let p = self.heads[a].predict_proba(input);
            [p[0], p[1], p[2], p[3]]
        })
    }

    fn input_for<'a>(&self, id: &str, text: &str, embeddings: Option<&'a EmbeddingTable>) -> Result<Input<'a>, ModelError> {
        if self.config.kind.uses_embeddings() {
            let table = embeddings.ok_or(ModelError::EmbeddingsRequired(self.config.kind))?;
            let expected = self.embedding_dimension.unwrap_or(table.dimension);
            if table.dimension != expected {
                return Err(ModelError::DimensionMismatch {
                    expected,
                    found: table.dimension,
                });
            }
            let v = table.get(id).map_err(|_| ModelError::MissingEmbedding(id.to_string()))?;
            Ok(Input::Dense(v))
        } else if let Some(f) = &self.featurizer {
            Ok(Input::Sparse(f.transform(text)))
        } else {
            Ok(Input::Sparse(SparseVector::from_map(BTreeMap::new(), 1)))
        }
    }

    pub fn predict_one(
        &self,
        sentence_id: &str,
        text: &str,
        embeddings: Option<&EmbeddingTable>,
    ) -> Result<SentencePrediction, ModelError> {
        let input = self.input_for(sentence_id, text, embeddings)?;
        Ok(SentencePrediction::new(sentence_id, self.distributions(&input)))
    }

    /// One prediction per `(sentence_id, text)` pair, in input order.
    pub fn predict<S: AsRef<str> + Sync>(
        &self,
        sentences: &[(S, S)],
        embeddings: Option<&EmbeddingTable>,
    ) -> Result<Vec<SentencePrediction>, ModelError> {
        sentences
            .par_iter()
            .map(|(id, text)| self.predict_one(id.as_ref(), text.as_ref(), embeddings))
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).map_err(|e| ModelError::Format(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| ModelError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let model: AspectClassifier = serde_json::from_str(&text).map_err(|e| ModelError::Format(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Format(format!("unsupported format version {}", model.format_version)));
        }
        Ok(model)
    }

    /// Adapter for selection rounds.
    pub fn scorer<'a>(&'a self, embeddings: Option<&'a EmbeddingTable>) -> Scorer<'a> {
        Scorer { model: self, embeddings }
    }
}

pub struct Scorer<'a> {
    model: &'a AspectClassifier,
    embeddings: Option<&'a EmbeddingTable>,
}

impl ClassProbabilities for Scorer<'_> {
    fn class_probabilities(&self, sentence_id: &str, text: &str) -> Result<[[f64; 4]; 8], String> {
        self.model
            .predict_one(sentence_id, text, self.embeddings)
            .map(|p| p.distributions)
            .map_err(|e| e.to_string())
    }
}

/// Writes predictions as JSON lines.
pub fn predictions_to_jsonl(predictions: &[SentencePrediction]) -> String {
    predictions
        .iter()
        .map(|p| serde_json::to_string(p).expect("prediction serializes") + "\n")
        .collect()
}

pub fn parse_predictions(text: &str) -> Result<Vec<SentencePrediction>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectEval {
    pub aspect: Aspect,
    /// Macro averages over the sentiment classes occurring in gold labels.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Binary present/absent scores for this aspect.
    pub detection: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: ModelKind,
    pub folds: usize,
    pub seed: u64,
    pub n: usize,
    pub per_aspect: Vec<AspectEval>,
    /// Present/absent F1 pooled over all aspects and sentences.
    pub detection_micro: Scores,
}

fn present(s: Sentiment) -> usize {
    usize::from(s != Sentiment::Absent)
}

impl EvalReport {
    pub fn from_labels(
        gold: &[[Sentiment; 8]],
        pred: &[[Sentiment; 8]],
        kind: ModelKind,
        folds: usize,
        seed: u64,
    ) -> Result<Self, metrics::MetricsError> {
        let mut per_aspect = Vec::with_capacity(Aspect::COUNT);
        let (mut all_gold, mut all_pred) = (Vec::new(), Vec::new());
        for aspect in Aspect::ALL {
            let a = aspect.index();
            let g: Vec<usize> = gold.iter().map(|l| l[a].index()).collect();
            let p: Vec<usize> = pred.iter().map(|l| l[a].index()).collect();
            let m = metrics(&g, &p, Averaging::Macro, None)?;
            let gd: Vec<usize> = gold.iter().map(|l| present(l[a])).collect();
            let pd: Vec<usize> = pred.iter().map(|l| present(l[a])).collect();
            let detection = metrics(&gd, &pd, Averaging::Micro, Some(&[1]))?;
            let correct = g.iter().zip(&p).filter(|(x, y)| x == y).count();
            per_aspect.push(AspectEval {
                aspect,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                accuracy: correct as f64 / g.len() as f64,
                detection,
            });
            all_gold.extend(gd);
            all_pred.extend(pd);
        }
        Ok(EvalReport {
            kind,
            folds,
            seed,
            n: gold.len(),
            per_aspect,
            detection_micro: metrics(&all_gold, &all_pred, Averaging::Micro, Some(&[1]))?,
        })
    }
}

/// Fold index per example, stratified by the 8-bit aspect-presence pattern.
///
/// Examples of each pattern are shuffled and dealt round-robin, continuing
/// the deal across patterns so fold sizes differ by at most one.
pub fn stratified_folds(examples: &[LabeledSentence], folds: usize, seed: u64) -> Vec<usize> {
    let mut by_pattern: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, e) in examples.iter().enumerate() {
        let pattern = e
            .labels
            .iter()
            .enumerate()
            .fold(0u8, |acc, (a, s)| acc | ((present(*s) as u8) << a));
        by_pattern.entry(pattern).or_default().push(i);
    }
    let mut rng = rng::seeded(seed);
    let mut assignment = vec![0; examples.len()];
    let mut next = 0;
    for members in by_pattern.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

/// k-fold cross-validation. Folds train in parallel; results are gathered in
/// example order so the report does not depend on scheduling.
pub fn cross_validate(
    examples: &[LabeledSentence],
    config: &ModelConfig,
    embeddings: Option<&EmbeddingTable>,
    folds: usize,
    seed: u64,
) -> Result<EvalReport, ModelError> {
    if folds < 2 || folds > examples.len() {
        return Err(ModelError::InvalidFolds {
            folds,
            n: examples.len(),
        });
    }
    let assignment = stratified_folds(examples, folds, seed);
    let per_fold: Vec<Vec<(usize, [Sentiment; 8])>> = (0..folds)
        .into_par_iter()
        .map(|k| {
            let train: Vec<LabeledSentence> = examples
                .iter()
                .zip(&assignment)
                .filter(|(_, &f)| f != k)
                .map(|(e, _)| e.clone())
                .collect();
            let model = AspectClassifier::train(&train, config, embeddings, seed.wrapping_add(k as u64))?;
            examples
                .iter()
                .enumerate()
                .filter(|(i, _)| assignment[*i] == k)
                .map(|(i, e)| Ok((i, model.predict_one(&e.sentence_id, &e.text, embeddings)?.labels)))
                .collect()
        })
        .collect::<Result<_, ModelError>>()?;
    let mut pred = vec![[Sentiment::Absent; 8]; examples.len()];
    for (i, labels) in per_fold.into_iter().flatten() {
        pred[i] = labels;
    }
    let gold: Vec<[Sentiment; 8]> = examples.iter().map(|e| e.labels).collect();
    EvalReport::from_labels(&gold, &pred, config.kind, folds, seed).map_err(|e| ModelError::Format(e.to_string()))
}
