//! Descriptive corpus statistics (sentence counts, lengths, vocabulary, scores).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Corpus, Decision, Review};
use crate::features::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    AcceptReject,
    Score,
    Year,
}

/// Mean and population standard deviation of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanStd {
                n,
                mean: 0.0,
                std: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        MeanStd {
            n,
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub key: String,
    pub papers: usize,
    pub reviews: usize,
    pub sentences: usize,
    pub sentences_per_review: MeanStd,
    pub sentence_length_words: MeanStd,
    pub unique_words_per_review: MeanStd,
    /// Review counts for scores 1..=10 (index 0 is score 1).
    pub score_histogram: [usize; 10],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub group_by: GroupBy,
    /// Paper counts per decision over the whole corpus, withdrawn included.
    pub decision_counts: BTreeMap<Decision, usize>,
    pub groups: Vec<GroupStats>,
}

fn group_stats(key: String, papers: usize, reviews: &[&Review]) -> GroupStats {
    let mut per_review = Vec::with_capacity(reviews.len());
    let mut lengths = Vec::new();
    let mut unique = Vec::with_capacity(reviews.len());
    let mut histogram = [0usize; 10];
    for review in reviews {
        per_review.push(review.sentences.len() as f64);
        let mut vocab = BTreeSet::new();
        for sentence in &review.sentences {
            let tokens = tokenize(&sentence.text);
            lengths.push(tokens.len() as f64);
            vocab.extend(tokens);
        }
        unique.push(vocab.len() as f64);
        histogram[usize::from(review.score.clamp(1, 10)) - 1] += 1;
    }
    GroupStats {
        key,
        papers,
        reviews: reviews.len(),
        sentences: lengths.len(),
        sentences_per_review: MeanStd::of(&per_review),
        sentence_length_words: MeanStd::of(&lengths),
        unique_words_per_review: MeanStd::of(&unique),
        score_histogram: histogram,
    }
}

/// Statistics over eligible papers, grouped by outcome, review score or year.
///
/// `AcceptReject` yields the groups `accepted` (oral + poster), `rejected`
/// and `workshop`, in that order.
pub fn corpus_stats(corpus: &Corpus, group_by: GroupBy) -> CorpusStats {
    let mut decision_counts = BTreeMap::new();
    for paper in corpus.papers() {
        *decision_counts.entry(paper.decision).or_insert(0) += 1;
    }
    let groups = match group_by {
        GroupBy::AcceptReject => {
            let buckets: [(&str, fn(Decision) -> bool); 3] = [
                ("accepted", Decision::is_accepted),
                ("rejected", Decision::is_rejected),
                ("workshop", |d| d == Decision::Workshop),
            ];
            buckets
                .iter()
                .map(|(key, pred)| {
                    let papers: Vec<_> = corpus.eligible_papers().filter(|p| pred(p.decision)).collect();
                    let reviews: Vec<&Review> = papers.iter().flat_map(|p| p.reviews.iter()).collect();
                    group_stats(key.to_string(), papers.len(), &reviews)
                })
                .collect()
        }
        GroupBy::Score => (1..=10u8)
            .filter_map(|score| {
                let reviews: Vec<&Review> = corpus
                    .eligible_papers()
                    .flat_map(|p| p.reviews.iter())
                    .filter(|r| r.score == score)
                    .collect();
                if reviews.is_empty() {
                    return None;
                }
                let papers: BTreeSet<&str> = reviews.iter().map(|r| r.paper_id.as_str()).collect();
                Some(group_stats(score.to_string(), papers.len(), &reviews))
            })
            .collect(),
        GroupBy::Year => {
            let years: BTreeSet<u32> = corpus.eligible_papers().map(|p| p.year).collect();
            years
                .into_iter()
                .map(|year| {
                    let papers: Vec<_> = corpus.eligible_papers().filter(|p| p.year == year).collect();
                    let reviews: Vec<&Review> = papers.iter().flat_map(|p| p.reviews.iter()).collect();
                    group_stats(year.to_string(), papers.len(), &reviews)
                })
                .collect()
        }
    };
    CorpusStats {
        group_by,
        decision_counts,
        groups,
    }
}

/// Paper counts per year and decision (withdrawn included).
pub fn paper_counts(corpus: &Corpus) -> BTreeMap<u32, BTreeMap<Decision, usize>> {
    let mut out: BTreeMap<u32, BTreeMap<Decision, usize>> = BTreeMap::new();
    for paper in corpus.papers() {
        *out.entry(paper.year).or_default().entry(paper.decision).or_insert(0) += 1;
    }
    out
}

/// Per year, the number of reviews with score > `threshold` and <= `threshold`.
pub fn review_decision_counts(corpus: &Corpus, threshold: u8) -> BTreeMap<u32, (usize, usize)> {
    let mut out: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for paper in corpus.eligible_papers() {
        let entry = out.entry(paper.year).or_default();
        for review in &paper.reviews {
            if review.score > threshold {
                entry.0 += 1;
            } else {
                entry.1 += 1;
            }
        }
    }
    out
}
