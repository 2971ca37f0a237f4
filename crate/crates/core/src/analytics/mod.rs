//! Paper-level analyses over review scores, chair decisions and aspect
//! sentiment profiles.

pub mod recommendation;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{facet_normalize, FacetShare, Profiles, ReviewAspectProfile};
use crate::annotation::Aspect;
use crate::corpus::{Corpus, Paper, Review};
use crate::stats::{self, kendall_tau_b, pearson, percentile, spearman, CorrelationResult, WelchResult};

pub use recommendation::{ablation, train_recommendation_net, AblationReport, RecNetParams, RecNetReport, RecommendationNet};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("decision threshold must lie in 1..=9, got {0}")]
    InvalidThreshold(u8),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("labels contain a single class")]
    SingleClass,
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("score {0} outside 1..=10")]
    ScoreOutOfRange(u8),
}

/// Maps a score to accept (`> threshold`) or reject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionMapping {
    pub threshold: u8,
}

impl Default for DecisionMapping {
    fn default() -> Self {
        DecisionMapping { threshold: 5 }
    }
}

impl DecisionMapping {
    pub fn new(threshold: u8) -> Result<Self, AnalyticsError> {
        if !(1..=9).contains(&threshold) {
            return Err(AnalyticsError::InvalidThreshold(threshold));
        }
        Ok(DecisionMapping { threshold })
    }

    pub fn accepts(&self, score: u8) -> bool {
        score > self.threshold
    }

    /// Same rule applied to a real-valued (e.g. mean) score.
    pub fn accepts_mean(&self, mean: f64) -> bool {
        mean > f64::from(self.threshold)
    }
}

/// Papers that have a binary chair outcome and at least one review.
fn decided_papers(corpus: &Corpus) -> impl Iterator<Item = (&Paper, bool)> {
    corpus
        .eligible_papers()
        .filter(|p| !p.reviews.is_empty())
        .filter_map(|p| p.decision.binary_outcome().map(|accepted| (p, accepted)))
}

fn scores_f64(paper: &Paper) -> Vec<f64> {
    paper.reviews.iter().map(|r| f64::from(r.score)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChairAgreement {
    pub reviews: usize,
    pub reviews_disagreeing: usize,
    pub individual_disagree_rate: f64,
    pub papers: usize,
    pub papers_disagreeing: usize,
    /// Papers whose review vote was tied; these count as disagreements.
    pub majority_ties: usize,
    pub majority_disagree_rate: f64,
}

/// How often individual reviewers, and the majority of a paper's reviewers,
/// disagree with the chair. Workshop and withdrawn papers are left out.
pub fn chair_agreement(corpus: &Corpus, mapping: DecisionMapping) -> ChairAgreement {
    let (mut reviews, mut reviews_dis, mut papers, mut papers_dis, mut ties) = (0, 0, 0, 0, 0);
    for (paper, accepted) in decided_papers(corpus) {
        papers += 1;
        let votes = paper.reviews.iter().filter(|r| mapping.accepts(r.score)).count();
        let against = paper.reviews.len() - votes;
        reviews += paper.reviews.len();
        reviews_dis += if accepted { against } else { votes };
        if votes == against {
            ties += 1;
            papers_dis += 1;
        } else if (votes > against) != accepted {
            papers_dis += 1;
        }
    }
    let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    ChairAgreement {
        reviews,
        reviews_disagreeing: reviews_dis,
        individual_disagree_rate: rate(reviews_dis, reviews),
        papers,
        papers_disagreeing: papers_dis,
        majority_ties: ties,
        majority_disagree_rate: rate(papers_dis, papers),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreAggregate {
    Mean,
    Median,
    Majority,
    WeightedMean,
}

impl ScoreAggregate {
    pub const ALL: [ScoreAggregate; 4] = [
        ScoreAggregate::Mean,
        ScoreAggregate::Median,
        ScoreAggregate::Majority,
        ScoreAggregate::WeightedMean,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ScoreAggregate::Mean => "mean",
            ScoreAggregate::Median => "median",
            ScoreAggregate::Majority => "majority",
            ScoreAggregate::WeightedMean => "weighted_mean",
        }
    }

    /// Aggregate of one paper's review scores. Majority is 1 or 0 by the
    /// vote, 0.5 on a tie; the weighted mean uses reviewer confidence
    /// (weight 1 when missing).
    pub fn apply(self, reviews: &[Review], mapping: DecisionMapping) -> f64 {
        let scores: Vec<f64> = reviews.iter().map(|r| f64::from(r.score)).collect();
        match self {
            ScoreAggregate::Mean => stats::mean(&scores),
            ScoreAggregate::Median => stats::median(&scores).expect("non-empty"),
            ScoreAggregate::Majority => {
                let votes = reviews.iter().filter(|r| mapping.accepts(r.score)).count() * 2;
                match votes.cmp(&reviews.len()) {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Less => 0.0,
                    std::cmp::Ordering::Equal => 0.5,
                }
            }
            ScoreAggregate::WeightedMean => {
                let (mut num, mut den) = (0.0, 0.0);
                for r in reviews {
                    let w = f64::from(r.confidence.unwrap_or(1));
                    num += w * f64::from(r.score);
                    den += w;
                }
                num / den
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCorrelationRow {
    pub aggregate: ScoreAggregate,
    /// `None` where the coefficient is undefined (zero variance).
    pub pearson: Option<CorrelationResult>,
    pub spearman: Option<CorrelationResult>,
    pub kendall: Option<CorrelationResult>,
}

/// Correlation of each score aggregate with the chair decision (accept 1,
/// reject 0).
pub fn score_correlations(corpus: &Corpus, mapping: DecisionMapping) -> Result<Vec<ScoreCorrelationRow>, AnalyticsError> {
    let papers: Vec<(&Paper, bool)> = decided_papers(corpus).collect();
    if papers.len() < 2 {
        return Err(AnalyticsError::TooFewSamples {
            needed: 2,
            got: papers.len(),
        });
    }
    let outcome: Vec<f64> = papers.iter().map(|&(_, a)| f64::from(u8::from(a))).collect();
    Ok(ScoreAggregate::ALL
        .iter()
        .map(|&agg| {
            let x: Vec<f64> = papers.iter().map(|(p, _)| agg.apply(&p.reviews, mapping)).collect();
            ScoreCorrelationRow {
                aggregate: agg,
                pearson: pearson(&x, &outcome).ok(),
                spearman: spearman(&x, &outcome).ok(),
                kendall: kendall_tau_b(&x, &outcome).ok(),
            }
        })
        .collect())
}

/// Fixed divisor of the population std used for parity with reference figures
/// for three reviewers.
pub const PAPER_PARITY_MAX_STD: f64 = 4.26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    /// Exact maximum population std for n scores in 1..=10.
    #[default]
    Exact,
    /// Fixed 4.26 regardless of n; values may slightly exceed [0, 1].
    PaperParity,
}

/// Largest population std of n scores drawn from 1..=10, attained by k ones
/// and n − k tens.
pub fn max_population_std(n: usize) -> f64 {
    (max_spread_moment(n) as f64).sqrt() / n as f64
}

/// n·Σx² − (Σx)², which is n² times the population variance, in exact
/// integer arithmetic so the result does not depend on score order.
fn spread_moment(scores: &[u8]) -> u64 {
    let n = scores.len() as u64;
    let sum: u64 = scores.iter().map(|&s| u64::from(s)).sum();
    let squares: u64 = scores.iter().map(|&s| u64::from(s).pow(2)).sum();
    n * squares - sum * sum
}

/// The largest spread moment for n scores in 1..=10: k ones and n−k tens.
fn max_spread_moment(n: usize) -> u64 {
    let n = n as u64;
    (1..n).map(|k| 81 * k * (n - k)).max().unwrap_or(0)
}

/// Population std of the scores divided by the maximum possible for their
/// count. `None` for fewer than two scores.
pub fn aggregate_disagreement(scores: &[u8], normalizer: Normalizer) -> Result<Option<f64>, AnalyticsError> {
    if let Some(&s) = scores.iter().find(|s| !(1..=10).contains(*s)) {
        return Err(AnalyticsError::ScoreOutOfRange(s));
    }
    if scores.len() < 2 {
        return Ok(None);
    }
    let moment = spread_moment(scores) as f64;
    Ok(Some(match normalizer {
        Normalizer::Exact => (moment / max_spread_moment(scores.len()) as f64).sqrt(),
        Normalizer::PaperParity => moment.sqrt() / scores.len() as f64 / PAPER_PARITY_MAX_STD,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementRecord {
    pub paper_id: String,
    pub n_reviews: usize,
    pub mean_score: f64,
    pub accepted: Option<bool>,
    /// `None` for single-review papers.
    pub aggregate: Option<f64>,
    /// Population std over reviews of (pos − neg) per aspect, where profiles
    /// for at least two reviews exist.
    pub per_aspect: Option<[f64; 8]>,
}

/// Aspect-level disagreement: population std over reviews of pos − neg.
pub fn aspect_disagreement(reviews: &[&ReviewAspectProfile]) -> Option<[f64; 8]> {
    if reviews.len() < 2 {
        return None;
    }
    Some(std::array::from_fn(|a| {
        let diffs: Vec<f64> = reviews.iter().map(|r| r.scores[a].pos - r.scores[a].neg).collect();
        stats::population_std(&diffs)
    }))
}

/// One record per eligible paper with at least one review.
pub fn disagreement_records(corpus: &Corpus, profiles: Option<&Profiles>, normalizer: Normalizer) -> Vec<DisagreementRecord> {
    let by_review: HashMap<&str, &ReviewAspectProfile> = profiles
        .map(|p| p.reviews.iter().map(|r| (r.review_id.as_str(), r)).collect())
        .unwrap_or_default();
    corpus
        .eligible_papers()
        .filter(|p| !p.reviews.is_empty())
        .map(|p| {
            let scores = p.scores();
            let profs: Vec<&ReviewAspectProfile> =
                p.reviews.iter().filter_map(|r| by_review.get(r.id.as_str()).copied()).collect();
            DisagreementRecord {
                paper_id: p.id.clone(),
                n_reviews: scores.len(),
                mean_score: stats::mean(&scores_f64(p)),
                accepted: p.decision.binary_outcome(),
                aggregate: aggregate_disagreement(&scores, normalizer).expect("corpus scores are validated"),
                per_aspect: aspect_disagreement(&profs),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBin {
    /// Bin `b` covers mean scores in [b − 1, b); bin 10 also holds 10.
    pub label: u8,
    pub papers: usize,
    /// `None` for an empty bin.
    pub mean_disagreement: Option<f64>,
}

pub fn score_bin_label(mean: f64) -> u8 {
    (mean.floor() as i64 + 1).clamp(2, 10) as u8
}

/// Mean aggregate disagreement per mean-score bin.
pub fn disagreement_by_score_bin(records: &[DisagreementRecord]) -> Vec<ScoreBin> {
    (2..=10u8)
        .map(|label| {
            let vals: Vec<f64> = records
                .iter()
                .filter(|r| score_bin_label(r.mean_score) == label)
                .filter_map(|r| r.aggregate)
                .collect();
            ScoreBin {
                label,
                papers: vals.len(),
                mean_disagreement: (!vals.is_empty()).then(|| stats::mean(&vals)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TertileBin {
    pub papers: usize,
    pub mean_aggregate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectTertiles {
    pub aspect: Aspect,
    pub p33: f64,
    pub p66: f64,
    /// Low (≤ p33), mid (≤ p66), high.
    pub bins: [TertileBin; 3],
}

/// Papers binned by aspect-level disagreement into tertiles, with the mean
/// aggregate disagreement of each bin.
pub fn aspect_vs_aggregate(records: &[DisagreementRecord]) -> Vec<AspectTertiles> {
    let usable: Vec<(&[f64; 8], f64)> = records
        .iter()
        .filter_map(|r| Some((r.per_aspect.as_ref()?, r.aggregate?)))
        .collect();
    Aspect::ALL
        .iter()
        .filter_map(|&aspect| {
            let a = aspect.index();
            let values: Vec<f64> = usable.iter().map(|(v, _)| v[a]).collect();
            let p33 = percentile(&values, 33.0).ok()?;
            let p66 = percentile(&values, 66.0).ok()?;
            let mut groups: [Vec<f64>; 3] = Default::default();
            for (v, agg) in &usable {
                let bin = if v[a] <= p33 {
                    0
                } else if v[a] <= p66 {
                    1
                } else {
                    2
                };
                groups[bin].push(*agg);
            }
            Some(AspectTertiles {
                aspect,
                p33,
                p66,
                bins: groups.map(|g| TertileBin {
                    papers: g.len(),
                    mean_aggregate: (!g.is_empty()).then(|| stats::mean(&g)),
                }),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionRule {
    /// The mean score is thresholded with the decision mapping.
    #[default]
    MeanThreshold,
    /// Each review is mapped to a vote and the majority is taken; ties never
    /// match the chair.
    ReviewMajority,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChairIntervention {
    pub rule: InterventionRule,
    pub matching_papers: usize,
    pub mismatching_papers: usize,
    pub mean_disagreement_match: Option<f64>,
    pub mean_disagreement_mismatch: Option<f64>,
}

/// Mean aggregate disagreement of papers where the score-implied decision
/// matches the chair versus papers where the chair overrode it.
pub fn chair_intervention(
    corpus: &Corpus,
    mapping: DecisionMapping,
    normalizer: Normalizer,
    rule: InterventionRule,
) -> ChairIntervention {
    let (mut matched, mut mismatched) = (Vec::new(), Vec::new());
    for (paper, accepted) in decided_papers(corpus) {
        let Some(d) = aggregate_disagreement(&paper.scores(), normalizer).expect("validated scores") else {
            continue;
        };
        let implied = match rule {
            InterventionRule::MeanThreshold => Some(mapping.accepts_mean(stats::mean(&scores_f64(paper)))),
            InterventionRule::ReviewMajority => {
                let m = ScoreAggregate::Majority.apply(&paper.reviews, mapping);
                (m != 0.5).then_some(m == 1.0)
            }
        };
        if implied == Some(accepted) {
            matched.push(d);
        } else {
            mismatched.push(d);
        }
    }
    let mean_of = |v: &[f64]| (!v.is_empty()).then(|| stats::mean(v));
    ChairIntervention {
        rule,
        matching_papers: matched.len(),
        mismatching_papers: mismatched.len(),
        mean_disagreement_match: mean_of(&matched),
        mean_disagreement_mismatch: mean_of(&mismatched),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceGap {
    pub agree_reviews: usize,
    pub disagree_reviews: usize,
    pub mean_agree: Option<f64>,
    pub mean_disagree: Option<f64>,
    pub welch: Option<WelchResult>,
}

/// Reviewer confidence of reviews agreeing versus disagreeing with the chair.
pub fn confidence_gap(corpus: &Corpus, mapping: DecisionMapping) -> ConfidenceGap {
    let (mut agree, mut disagree) = (Vec::new(), Vec::new());
    for (paper, accepted) in decided_papers(corpus) {
        for r in &paper.reviews {
            if let Some(c) = r.confidence {
                if mapping.accepts(r.score) == accepted {
                    agree.push(f64::from(c));
                } else {
                    disagree.push(f64::from(c));
                }
            }
        }
    }
    let mean_of = |v: &[f64]| (!v.is_empty()).then(|| stats::mean(v));
    ConfidenceGap {
        agree_reviews: agree.len(),
        disagree_reviews: disagree.len(),
        mean_agree: mean_of(&agree),
        mean_disagree: mean_of(&disagree),
        welch: stats::welch_t(&agree, &disagree).ok(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementAspectRow {
    pub aspect: Aspect,
    pub agree_pearson: Option<CorrelationResult>,
    pub disagree_pearson: Option<CorrelationResult>,
    pub agree_spearman: Option<CorrelationResult>,
    pub disagree_spearman: Option<CorrelationResult>,
    /// Coefficients (negatives clamped to 0) rescaled to sum to 1.
    pub pearson_share: Option<FacetShare>,
    pub spearman_share: Option<FacetShare>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementProfiles {
    pub agree_reviews: usize,
    pub disagree_reviews: usize,
    pub rows: Vec<AgreementAspectRow>,
    pub warnings: Vec<String>,
}

/// Correlation of each aspect's (pos − neg) with the reviewer's own decision,
/// separately for reviews that agree and disagree with the chair.
pub fn agreement_correlation_profiles(corpus: &Corpus, profiles: &Profiles, mapping: DecisionMapping) -> AgreementProfiles {
    let by_review: HashMap<&str, &ReviewAspectProfile> =
        profiles.reviews.iter().map(|r| (r.review_id.as_str(), r)).collect();
    let (mut agree, mut disagree): (Vec<(&ReviewAspectProfile, f64)>, Vec<_>) = (Vec::new(), Vec::new());
    for (paper, accepted) in decided_papers(corpus) {
        for r in &paper.reviews {
            let Some(p) = by_review.get(r.id.as_str()) else { continue };
            let vote = mapping.accepts(r.score);
            let entry = (*p, f64::from(u8::from(vote)));
            if vote == accepted {
                agree.push(entry);
            } else {
                disagree.push(entry);
            }
        }
    }
    let mut warnings = Vec::new();
    for (name, group) in [("agree", &agree), ("disagree", &disagree)] {
        if group.len() < 3 {
            warnings.push(format!("{name} group has {} reviews; its correlations are undefined", group.len()));
        }
    }
    let corr = |group: &[(&ReviewAspectProfile, f64)], a: usize, f: fn(&[f64], &[f64]) -> Result<CorrelationResult, stats::StatsError>| {
        if group.len() < 3 {
            return None;
        }
        let x: Vec<f64> = group.iter().map(|(p, _)| p.scores[a].pos - p.scores[a].neg).collect();
        let y: Vec<f64> = group.iter().map(|(_, v)| *v).collect();
        f(&x, &y).ok()
    };
    let share = |a: Option<CorrelationResult>, d: Option<CorrelationResult>| {
        let clamp = |c: Option<CorrelationResult>| c.map_or(0.0, |c| c.coefficient.max(0.0));
        (a.is_some() || d.is_some())
            .then(|| facet_normalize(clamp(a), clamp(d)).expect("clamped values are non-negative"))
    };
    let rows = Aspect::ALL
        .iter()
        .map(|&aspect| {
            let a = aspect.index();
            let (ap, dp) = (corr(&agree, a, pearson), corr(&disagree, a, pearson));
            let (as_, ds) = (corr(&agree, a, spearman), corr(&disagree, a, spearman));
            if ap.is_none() && agree.len() >= 3 {
                warnings.push(format!("{}: agree-group correlation undefined (zero variance)", aspect.key()));
            }
            AgreementAspectRow {
                aspect,
                agree_pearson: ap,
                disagree_pearson: dp,
                agree_spearman: as_,
                disagree_spearman: ds,
                pearson_share: share(ap, dp),
                spearman_share: share(as_, ds),
            }
        })
        .collect();
    AgreementProfiles {
        agree_reviews: agree.len(),
        disagree_reviews: disagree.len(),
        rows,
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectImportance {
    pub aspect: Aspect,
    pub correlation: Option<CorrelationResult>,
}

/// Pearson correlation of each aspect's (pos − neg) with the review score.
pub fn aspect_importance_correlation(
    profiles: &[&ReviewAspectProfile],
    scores: &[f64],
) -> Result<Vec<AspectImportance>, AnalyticsError> {
    if profiles.len() != scores.len() {
        return Err(AnalyticsError::LengthMismatch(profiles.len(), scores.len()));
    }
    if profiles.len() < 3 {
        return Err(AnalyticsError::TooFewSamples {
            needed: 3,
            got: profiles.len(),
        });
    }
    Ok(Aspect::ALL
        .iter()
        .map(|&aspect| {
            let a = aspect.index();
            let x: Vec<f64> = profiles.iter().map(|p| p.scores[a].pos - p.scores[a].neg).collect();
            AspectImportance {
                aspect,
                correlation: pearson(&x, scores).ok(),
            }
        })
        .collect())
}

/// Review profiles paired with their review's score and mapped decision,
/// in corpus order, for reviews of eligible papers.
pub fn review_samples<'a>(
    corpus: &'a Corpus,
    profiles: &'a Profiles,
    mapping: DecisionMapping,
) -> Vec<(&'a ReviewAspectProfile, u8, bool)> {
    let by_review: HashMap<&str, &ReviewAspectProfile> =
        profiles.reviews.iter().map(|r| (r.review_id.as_str(), r)).collect();
    corpus
        .eligible_papers()
        .flat_map(|p| p.reviews.iter())
        .filter_map(|r| by_review.get(r.id.as_str()).map(|p| (*p, r.score, mapping.accepts(r.score))))
        .collect()
}
