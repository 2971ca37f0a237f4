//! Accept/reject prediction from the 24 review aspect features, evaluated by
//! stratified k-fold cross-validation, and per-aspect ablation.
//!
//! Features are z-scored with constants from the training folds only. Every
//! run of the same fold starts from the same 24-input initialization with the
//! ablated rows removed, and uses the same shuffle and dropout stream, so
//! ablation differences come from the features alone.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::aggregation::ZScaler;
use crate::annotation::Aspect;
use crate::models::nn::{Adam, Mlp, OutputKind, Target};
use crate::rng;

pub const FEATURES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecNetParams {
    pub hidden: usize,
    /// Drop probability of the hidden layer while training.
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub folds: usize,
}

impl Default for RecNetParams {
    fn default() -> Self {
        RecNetParams {
            hidden: 64,
            dropout: 0.8,
            learning_rate: 1e-3,
            epochs: 50,
            batch_size: 32,
            folds: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationNet {
    /// Indices into the 24 features that the network reads.
    pub features: Vec<usize>,
    pub scaler: ZScaler,
    pub net: Mlp,
}

impl RecommendationNet {
    /// P(accept) for a raw (unscaled) 24-feature vector.
    pub fn predict(&self, raw: &[f64; FEATURES]) -> f64 {
        let x: Vec<f64> = self.features.iter().map(|&f| raw[f]).collect();
        self.net.predict(&self.scaler.transform(&x), None)[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecNetReport {
    pub n: usize,
    pub folds: usize,
    pub seed: u64,
    pub fold_accuracies: Vec<f64>,
    /// Correct held-out predictions over all samples.
    pub cv_accuracy: f64,
}

fn kept_features(dropped: Option<Aspect>) -> Vec<usize> {
    (0..FEATURES)
        .filter(|f| dropped.is_none_or(|a| f / 3 != a.index()))
        .collect()
}

fn check_inputs(vectors: &[[f64; FEATURES]], labels: &[bool], folds: usize) -> Result<(), AnalyticsError> {
    if vectors.len() != labels.len() {
        return Err(AnalyticsError::LengthMismatch(vectors.len(), labels.len()));
    }
    let needed = folds.max(2);
    if vectors.len() < needed {
        return Err(AnalyticsError::TooFewSamples {
            needed,
            got: vectors.len(),
        });
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(AnalyticsError::SingleClass);
    }
    Ok(())
}

/// Fold per sample: each class shuffled then dealt round-robin.
pub fn binary_stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::seeded(seed);
    let mut out = vec![0; labels.len()];
    let mut next = 0;
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            out[i] = next % folds;
            next += 1;
        }
    }
    out
}

/// Trains one network on `train` rows. Stream `2·run` of the seed draws the
/// initial weights, stream `2·run + 1` the shuffles and dropout masks.
fn fit(
    vectors: &[[f64; FEATURES]],
    labels: &[bool],
    train: &[usize],
    features: &[usize],
    params: &RecNetParams,
    seed: u64,
    run: u64,
) -> RecommendationNet {
    let raw: Vec<Vec<f64>> = train.iter().map(|&i| features.iter().map(|&f| vectors[i][f]).collect()).collect();
    let scaler = ZScaler::fit(&raw);
    let xs: Vec<Vec<f64>> = raw.iter().map(|r| scaler.transform(r)).collect();
    let ys: Vec<Target> = train.iter().map(|&i| Target::Binary(f64::from(u8::from(labels[i])))).collect();

    let mut net = Mlp::new(
        &[FEATURES, params.hidden, 1],
        OutputKind::Sigmoid,
        params.dropout,
        &mut rng::derived(seed, 2 * run),
    );
    let first = &mut net.layers[0];
    first.weights = first
        .weights
        .chunks_exact(FEATURES)
        .flat_map(|row| features.iter().map(move |&f| row[f]))
        .collect();
    first.inputs = features.len();

    let mut adam = Adam::new(params.learning_rate);
    let mut stream = rng::derived(seed, 2 * run + 1);
    for _ in 0..params.epochs {
        net.train_epoch(&mut adam, &xs, &ys, None, params.batch_size, &mut stream);
    }
    RecommendationNet {
        features: features.to_vec(),
        scaler,
        net,
    }
}

fn cross_validate(
    vectors: &[[f64; FEATURES]],
    labels: &[bool],
    features: &[usize],
    params: &RecNetParams,
    seed: u64,
) -> RecNetReport {
    let folds = binary_stratified_folds(labels, params.folds, seed);
    let per_fold: Vec<(usize, usize)> = (0..params.folds)
        .into_par_iter()
        .map(|k| {
            let train: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] != k).collect();
            let model = fit(vectors, labels, &train, features, params, seed, k as u64);
            let test: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] == k).collect();
            let correct = test
                .iter()
                .filter(|&&i| (model.predict(&vectors[i]) > 0.5) == labels[i])
                .count();
            (correct, test.len())
        })
        .collect();
    let correct: usize = per_fold.iter().map(|p| p.0).sum();
    RecNetReport {
        n: labels.len(),
        folds: params.folds,
        seed,
        fold_accuracies: per_fold.iter().map(|&(c, n)| c as f64 / n.max(1) as f64).collect(),
        cv_accuracy: correct as f64 / labels.len() as f64,
    }
}

/// Cross-validated accuracy plus a final network trained on all samples.
pub fn train_recommendation_net(
    vectors: &[[f64; FEATURES]],
    labels: &[bool],
    params: &RecNetParams,
    seed: u64,
) -> Result<(RecNetReport, RecommendationNet), AnalyticsError> {
    check_inputs(vectors, labels, params.folds)?;
    let features = kept_features(None);
    let report = cross_validate(vectors, labels, &features, params, seed);
    let all: Vec<usize> = (0..labels.len()).collect();
    let model = fit(vectors, labels, &all, &features, params, seed, params.folds as u64);
    Ok((report, model))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectDrop {
    pub aspect: Aspect,
    pub accuracy: f64,
    /// Baseline minus ablated accuracy, in percentage points.
    pub drop_points: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub baseline: RecNetReport,
    pub drops: Vec<AspectDrop>,
}

impl AblationReport {
    /// Aspects ordered by decreasing drop.
    pub fn ranking(&self) -> Vec<Aspect> {
        let mut d = self.drops.clone();
        d.sort_by(|a, b| b.drop_points.total_cmp(&a.drop_points).then(a.aspect.cmp(&b.aspect)));
        d.into_iter().map(|d| d.aspect).collect()
    }
}

/// Retrains without each aspect's three features in turn.
pub fn ablation(
    vectors: &[[f64; FEATURES]],
    labels: &[bool],
    params: &RecNetParams,
    seed: u64,
) -> Result<AblationReport, AnalyticsError> {
    check_inputs(vectors, labels, params.folds)?;
    let mut runs: Vec<RecNetReport> = std::iter::once(None)
        .chain(Aspect::ALL.into_iter().map(Some))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|dropped| cross_validate(vectors, labels, &kept_features(dropped), params, seed))
        .collect();
    let baseline = runs.remove(0);
    let drops = Aspect::ALL
        .iter()
        .zip(runs)
        .map(|(&aspect, r)| AspectDrop {
            aspect,
            accuracy: r.cv_accuracy,
            drop_points: 100.0 * (baseline.cv_accuracy - r.cv_accuracy),
        })
        .collect();
    Ok(AblationReport { baseline, drops })
}
