//! Review- and paper-level aspect sentiment profiles built from sentence
//! predictions, plus the z-scored 24-dimensional review feature vector.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{Aspect, Sentiment};
use crate::corpus::Corpus;
use crate::models::SentencePrediction;

#[derive(Debug, Error, PartialEq)]
pub enum AggregationError {
    #[error("review `{0}` has no sentences")]
    NoSentences(String),
    #[error("paper `{0}` has no reviews")]
    NoReviews(String),
    #[error("no prediction for sentence `{0}`")]
    MissingPrediction(String),
    #[error("facet means must be non-negative, got ({0}, {1})")]
    NegativeMean(f64, f64),
}

/// Per-aspect sentence counts of Positive, Negative and Neutral labels.
pub type AspectCounts = [[usize; 3]; 8];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AspectScores {
    pub pos: f64,
    pub neg: f64,
    pub neu: f64,
}

fn tally<'a>(labels: impl Iterator<Item = &'a [Sentiment; 8]>) -> (AspectCounts, usize) {
    let mut counts = [[0usize; 3]; 8];
    let mut n = 0;
    for l in labels {
        n += 1;
        for (a, s) in l.iter().enumerate() {
            if *s != Sentiment::Absent {
                counts[a][s.index()] += 1;
            }
        }
    }
    (counts, n)
}

fn scores_of(counts: &AspectCounts, n: usize) -> [AspectScores; 8] {
    let n = n as f64;
    std::array::from_fn(|a| AspectScores {
        pos: counts[a][0] as f64 / n,
        neg: counts[a][1] as f64 / n,
        neu: counts[a][2] as f64 / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewAspectProfile {
    pub review_id: String,
    pub sentence_count: usize,
    pub counts: AspectCounts,
    pub scores: [AspectScores; 8],
}

impl ReviewAspectProfile {
    pub fn score(&self, aspect: Aspect) -> AspectScores {
        self.scores[aspect.index()]
    }

    /// Aspect-major `(pos, neg, neu)` triples.
    pub fn feature_vector(&self) -> [f64; 24] {
        let mut v = [0.0; 24];
        for (a, s) in self.scores.iter().enumerate() {
            v[3 * a] = s.pos;
            v[3 * a + 1] = s.neg;
            v[3 * a + 2] = s.neu;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperAspectProfile {
    pub paper_id: String,
    pub sentence_count: usize,
    pub counts: AspectCounts,
    pub scores: [AspectScores; 8],
}

impl PaperAspectProfile {
    pub fn score(&self, aspect: Aspect) -> AspectScores {
        self.scores[aspect.index()]
    }
}

/// Profile of one review from the argmax labels of its sentences. A sentence
/// counts towards every aspect it is labelled with.
pub fn review_profile(review_id: &str, labels: &[[Sentiment; 8]]) -> Result<ReviewAspectProfile, AggregationError> {
    if labels.is_empty() {
        return Err(AggregationError::NoSentences(review_id.to_string()));
    }
    let (counts, n) = tally(labels.iter());
    Ok(ReviewAspectProfile {
        review_id: review_id.to_string(),
        sentence_count: n,
        counts,
        scores: scores_of(&counts, n),
    })
}

/// Pools sentence counts over all reviews of a paper.
pub fn paper_profile(paper_id: &str, reviews: &[&ReviewAspectProfile]) -> Result<PaperAspectProfile, AggregationError> {
    if reviews.is_empty() {
        return Err(AggregationError::NoReviews(paper_id.to_string()));
    }
    let mut counts = [[0usize; 3]; 8];
    let mut n = 0;
    for r in reviews {
        n += r.sentence_count;
        for (a, c) in r.counts.iter().enumerate() {
            for s in 0..3 {
                counts[a][s] += c[s];
            }
        }
    }
    Ok(PaperAspectProfile {
        paper_id: paper_id.to_string(),
        sentence_count: n,
        counts,
        scores: scores_of(&counts, n),
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Profiles {
    pub reviews: Vec<ReviewAspectProfile>,
    pub papers: Vec<PaperAspectProfile>,
    /// Reviews left out because they have no sentences.
    pub skipped_reviews: Vec<String>,
}

impl Profiles {
    pub fn review(&self, id: &str) -> Option<&ReviewAspectProfile> {
        self.reviews.iter().find(|r| r.review_id == id)
    }

    pub fn paper(&self, id: &str) -> Option<&PaperAspectProfile> {
        self.papers.iter().find(|p| p.paper_id == id)
    }
}

/// Review and paper profiles for every eligible paper, in corpus order.
pub fn profile_corpus(corpus: &Corpus, predictions: &[SentencePrediction]) -> Result<Profiles, AggregationError> {
    let by_id: HashMap<&str, &SentencePrediction> = predictions.iter().map(|p| (p.sentence_id.as_str(), p)).collect();
    let mut out = Profiles::default();
    for paper in corpus.eligible_papers() {
        let mut mine = Vec::new();
        for review in &paper.reviews {
            if review.sentences.is_empty() {
                out.skipped_reviews.push(review.id.clone());
                continue;
            }
            let labels = review
                .sentences
                .iter()
                .map(|s| {
                    by_id
                        .get(s.id.as_str())
                        .map(|p| p.labels)
                        .ok_or_else(|| AggregationError::MissingPrediction(s.id.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            mine.push(review_profile(&review.id, &labels)?);
        }
        if !mine.is_empty() {
            out.papers.push(paper_profile(&paper.id, &mine.iter().collect::<Vec<_>>())?);
        }
        out.reviews.extend(mine);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FacetShare {
    pub accepted: f64,
    pub rejected: f64,
    /// Set when both means were zero and the split defaulted to halves.
    pub degenerate: bool,
}

/// Rescales an (accepted, rejected) pair of group means to sum to 1.
pub fn facet_normalize(accepted: f64, rejected: f64) -> Result<FacetShare, AggregationError> {
    if accepted < 0.0 || rejected < 0.0 || accepted.is_nan() || rejected.is_nan() {
        return Err(AggregationError::NegativeMean(accepted, rejected));
    }
    let total = accepted + rejected;
    if total == 0.0 {
        return Ok(FacetShare {
            accepted: 0.5,
            rejected: 0.5,
            degenerate: true,
        });
    }
    Ok(FacetShare {
        accepted: accepted / total,
        rejected: rejected / total,
        degenerate: false,
    })
}

/// Per-feature z-scoring with population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ZScaler {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.as_ref()) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        std.iter_mut().for_each(|s| *s = s.sqrt());
        ZScaler { mean, std }
    }

    /// Zero-variance features map to 0.
    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }

    pub fn inverse_transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| if *s > 0.0 { z * s + m } else { *m })
            .collect()
    }
}

/// Feature vectors of `profiles`, z-scored with constants fitted on them.
pub fn vectorize(profiles: &[ReviewAspectProfile]) -> (Vec<Vec<f64>>, ZScaler) {
    let raw: Vec<[f64; 24]> = profiles.iter().map(|p| p.feature_vector()).collect();
    let scaler = ZScaler::fit(&raw);
    (raw.iter().map(|r| scaler.transform(r)).collect(), scaler)
}

/// `paper_id,aspect,pos,neg,neu` rows.
pub fn paper_profiles_csv(papers: &[PaperAspectProfile]) -> String {
    let mut out = String::from("paper_id,aspect,pos,neg,neu\n");
    for p in papers {
        for aspect in Aspect::ALL {
            let s = p.score(aspect);
            let _ = writeln!(out, "{},{},{},{},{}", p.paper_id, aspect.key(), s.pos, s.neg, s.neu);
        }
    }
    out
}

/// `review_id,aspect,pos,neg,neu` rows.
pub fn review_profiles_csv(reviews: &[ReviewAspectProfile]) -> String {
    let mut out = String::from("review_id,aspect,pos,neg,neu\n");
    for r in reviews {
        for aspect in Aspect::ALL {
            let s = r.score(aspect);
            let _ = writeln!(out, "{},{},{},{},{}", r.review_id, aspect.key(), s.pos, s.neg, s.neu);
        }
    }
    out
}

/// Mean of per-paper scores within each group, keyed by group name.
pub fn group_mean_scores<'a>(
    groups: impl Iterator<Item = (&'a str, &'a PaperAspectProfile)>,
) -> BTreeMap<String, [AspectScores; 8]> {
    let mut sums: BTreeMap<String, ([AspectScores; 8], usize)> = BTreeMap::new();
    for (group, p) in groups {
        let entry = sums.entry(group.to_string()).or_insert(([AspectScores::default(); 8], 0));
        for (acc, s) in entry.0.iter_mut().zip(&p.scores) {
            acc.pos += s.pos;
            acc.neg += s.neg;
            acc.neu += s.neu;
        }
        entry.1 += 1;
    }
    sums.into_iter()
        .map(|(g, (mut s, n))| {
            for a in &mut s {
                a.pos /= n as f64;
                a.neg /= n as f64;
                a.neu /= n as f64;
            }
            (g, s)
        })
        .collect()
}
