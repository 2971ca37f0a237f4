//! Synthetic review corpora with planted aspect signal.
//!
//! Every paper gets a latent quality; each reviewer sees it through noise,
//! which sets both their score and the polarity of their sentences about the
//! planted aspects. Sentences about the other aspects have random polarity.
//! Gold sentence labels and label-derived embeddings come with the corpus so
//! classifiers can be trained on it.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::annotation::{Aspect, Sentiment};
use crate::corpus::{Corpus, Decision, Paper, Review};
use crate::features::EmbeddingTable;
use crate::rng::{self, Rng};

/// Box–Muller draw.
fn standard_normal(rng: &mut Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub papers: usize,
    pub reviews_per_paper: usize,
    /// Chance of one extra review on a paper.
    pub extra_review_rate: f64,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub planted: Vec<Aspect>,
    /// Slope of P(positive) against the reviewer's opinion.
    pub signal: f64,
    pub reviewer_noise: f64,
    pub acceptance_rate: f64,
    pub workshop_rate: f64,
    pub withdrawn_rate: f64,
    /// Reviews that disagree with the chair get random-polarity text.
    pub disagreeing_text_random: bool,
    /// Reviewer noise grows for papers of middling quality.
    pub center_spread: bool,
    pub embedding_dim: usize,
    pub first_year: u32,
    pub years: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            papers: 200,
            reviews_per_paper: 3,
            extra_review_rate: 0.1,
            min_sentences: 8,
            max_sentences: 16,
            planted: vec![Aspect::EmpiricalTheoreticalSoundness, Aspect::ImpactOfIdeas, Aspect::Clarity],
            signal: 3.0,
            reviewer_noise: 0.8,
            acceptance_rate: 0.4,
            workshop_rate: 0.03,
            withdrawn_rate: 0.02,
            disagreeing_text_random: false,
            center_spread: false,
            embedding_dim: 32,
            first_year: 2017,
            years: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    /// Already segmented; sentence ids match the gold labels.
    pub corpus: Corpus,
    pub gold: BTreeMap<String, [Sentiment; 8]>,
    pub embeddings: EmbeddingTable,
    pub quality: BTreeMap<String, f64>,
}

fn subjects(aspect: Aspect) -> &'static [&'static str] {
    match aspect {
        Aspect::Appropriateness => &["The fit to this venue", "The relevance to the conference", "The scope of the submission"],
        Aspect::Clarity => &["The writing", "The presentation", "The exposition"],
        Aspect::Originality => &["The novelty", "The originality", "The freshness of the idea"],
        Aspect::EmpiricalTheoreticalSoundness => &["The experimental evaluation", "The theoretical analysis", "The proof"],
        Aspect::MeaningfulComparison => &["The comparison with baselines", "The related work discussion", "The benchmark comparison"],
        Aspect::Substance => &["The amount of work", "The depth of the study", "The volume of results"],
        Aspect::ImpactOfIdeas => &["The potential impact", "The significance of the results", "The importance of the problem"],
        Aspect::Recommendation => &["My overall recommendation", "Overall this submission", "My final assessment"],
    }
}

const POSITIVE: &[&str] = &["excellent", "convincing", "strong", "solid", "impressive", "very good"];
const NEGATIVE: &[&str] = &["weak", "poor", "unconvincing", "lacking", "problematic", "disappointing"];
const NEUTRAL: &[&str] = &[
    "is described in the appendix",
    "is covered in the second part",
    "appears in the supplementary material",
    "is summarized in one table",
];
const FILLER: &[&str] = &[
    "We thank the authors for their response.",
    "The paper studies representation learning for graphs.",
    "The method uses a recurrent encoder.",
    "The authors released their code.",
    "Figure three shows the training curves.",
    "The dataset contains many images.",
    "This submission considers reinforcement learning agents.",
    "The model is trained with stochastic gradient descent.",
];

fn pick<'a>(rng: &mut Rng, options: &[&'a str]) -> &'a str {
    options.choose(rng).copied().expect("non-empty option list")
}

fn clause(rng: &mut Rng, aspect: Aspect, sentiment: Sentiment) -> String {
    let subject = pick(rng, subjects(aspect));
    match sentiment {
        Sentiment::Positive => format!("{subject} is {}", pick(rng, POSITIVE)),
        Sentiment::Negative => format!("{subject} is {}", pick(rng, NEGATIVE)),
        Sentiment::Neutral => format!("{subject} {}", pick(rng, NEUTRAL)),
        Sentiment::Absent => unreachable!("absent aspects have no clause"),
    }
}

fn lowercase_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

struct Generator<'a> {
    config: &'a SynthConfig,
    rng: Rng,
}

impl Generator<'_> {
    fn polarity(&mut self, aspect: Aspect, opinion: Option<f64>) -> Sentiment {
        if self.rng.gen_bool(0.15) {
            return Sentiment::Neutral;
        }
        let p = match opinion {
            Some(o) if self.config.planted.contains(&aspect) => 1.0 / (1.0 + (-self.config.signal * o).exp()),
            _ => 0.5,
        };
        if self.rng.gen_bool(p) {
            Sentiment::Positive
        } else {
            Sentiment::Negative
        }
    }

    fn aspect(&mut self) -> Option<Aspect> {
        // Planted aspects are mentioned twice as often; filler as often as two aspects.
        let weights: Vec<(Option<Aspect>, u32)> = Aspect::ALL
            .iter()
            .map(|&a| (Some(a), if self.config.planted.contains(&a) { 2 } else { 1 }))
            .chain(std::iter::once((None, 2)))
            .collect();
        let total: u32 = weights.iter().map(|w| w.1).sum();
        let mut r = self.rng.gen_range(0..total);
        for (a, w) in weights {
            if r < w {
                return a;
            }
            r -= w;
        }
        unreachable!()
    }

    /// One sentence and its labels. `opinion` is `None` for random text.
    fn sentence(&mut self, opinion: Option<f64>) -> (String, [Sentiment; 8]) {
        let mut labels = [Sentiment::Absent; 8];
        let Some(first) = self.aspect() else {
            return (pick(&mut self.rng, FILLER).to_string(), labels);
        };
        let s1 = self.polarity(first, opinion);
        labels[first.index()] = s1;
        let mut text = clause(&mut self.rng, first, s1);
        if self.rng.gen_bool(0.1) {
            if let Some(second) = self.aspect().filter(|&a| a != first) {
                let s2 = self.polarity(second, opinion);
                labels[second.index()] = s2;
                text = format!("{text} and {}", lowercase_first(&clause(&mut self.rng, second, s2)));
            }
        }
        (text + ".", labels)
    }
}

/// Sentence embedding from its labels: per-aspect and per-polarity
/// directions plus noise.
fn embed(labels: &[Sentiment; 8], dirs: &[Vec<f64>], dim: usize, rng: &mut Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| 0.3 * standard_normal(rng)).collect();
    for (a, s) in labels.iter().enumerate() {
        if *s == Sentiment::Absent {
            continue;
        }
        let polarity = &dirs[8 + s.index()];
        for i in 0..dim {
            v[i] += dirs[a][i] + 0.7 * polarity[i] + 0.5 * dirs[a][(i + 1) % dim] * polarity[i];
        }
    }
    v
}

pub fn generate(config: &SynthConfig) -> SynthData {
    let mut g = Generator {
        config,
        rng: rng::seeded(config.seed),
    };
    let qualities: Vec<f64> = (0..config.papers).map(|_| standard_normal(&mut g.rng)).collect();
    let mut sorted = qualities.clone();
    sorted.sort_by(f64::total_cmp);
    let cut = sorted[((1.0 - config.acceptance_rate) * config.papers as f64) as usize % config.papers.max(1)];
    let oral_cut = sorted[((1.0 - config.acceptance_rate / 4.0) * config.papers as f64) as usize % config.papers.max(1)];

    let mut papers = Vec::with_capacity(config.papers);
    let mut gold_by_review: Vec<Vec<[Sentiment; 8]>> = Vec::new();
    let mut quality = BTreeMap::new();
    for (p, &q) in qualities.iter().enumerate() {
        let id = format!("paper{p:05}");
        quality.insert(id.clone(), q);
        let roll: f64 = g.rng.gen();
        let decision = if roll < config.withdrawn_rate {
            Decision::Withdrawn
        } else if roll < config.withdrawn_rate + config.workshop_rate {
            Decision::Workshop
        } else if q >= oral_cut {
            Decision::Oral
        } else if q >= cut {
            Decision::Poster
        } else {
            Decision::Reject
        };
        let accepted = decision.binary_outcome();
        let n_reviews = config.reviews_per_paper + usize::from(g.rng.gen_bool(config.extra_review_rate));
        let noise = if config.center_spread {
            config.reviewer_noise * (0.3 + 2.0 * (-q * q).exp())
        } else {
            config.reviewer_noise
        };
        let mut reviews = Vec::with_capacity(n_reviews);
        for r in 0..n_reviews {
            let opinion = q + noise * standard_normal(&mut g.rng);
            let score = (5.5 + 1.6 * opinion).round().clamp(1.0, 10.0) as u8;
            let agrees = accepted.is_none_or(|a| (score > 5) == a);
            let text_opinion = if config.disagreeing_text_random && !agrees { None } else { Some(opinion) };
            let confidence = if g.rng.gen_bool(0.1) {
                None
            } else {
                let base = if agrees { 3.9 } else { 3.6 };
                Some((base + 0.8 * standard_normal(&mut g.rng)).round().clamp(1.0, 5.0) as u8)
            };
            let n_sent = g.rng.gen_range(config.min_sentences..=config.max_sentences);
            let mut texts = Vec::with_capacity(n_sent);
            let mut labels = Vec::with_capacity(n_sent);
            for _ in 0..n_sent {
                let (t, l) = g.sentence(text_opinion);
                texts.push(t);
                labels.push(l);
            }
            reviews.push(Review {
                id: format!("{id}-r{r}"),
                paper_id: String::new(),
                reviewer_alias: format!("AnonReviewer{}", r + 1),
                score,
                confidence,
                text: texts.join(" "),
                sentences: Vec::new(),
            });
            gold_by_review.push(labels);
        }
        papers.push(Paper {
            id,
            year: config.first_year + (p as u32 % config.years.max(1)),
            title: format!("Synthetic submission {p}"),
            decision,
            reviews,
        });
    }
    let corpus = Corpus::new(papers).expect("generated corpus is valid").segmented();

    let dim = config.embedding_dim.max(2);
    let mut erng = rng::derived(config.seed, 1);
    let dirs: Vec<Vec<f64>> = (0..12).map(|_| (0..dim).map(|_| standard_normal(&mut erng)).collect()).collect();
    let mut gold = BTreeMap::new();
    let mut embeddings = EmbeddingTable::new(dim);
    let all_reviews = corpus.papers().iter().flat_map(|p| p.reviews.iter());
    for (review, labels) in all_reviews.zip(&gold_by_review) {
        assert_eq!(review.sentences.len(), labels.len(), "segmentation recovers generated sentences");
        for (s, l) in review.sentences.iter().zip(labels) {
            gold.insert(s.id.clone(), *l);
            embeddings
                .insert(s.id.clone(), embed(l, &dirs, dim, &mut erng))
                .expect("dimension matches");
        }
    }
    SynthData {
        corpus,
        gold,
        embeddings,
        quality,
    }
}

/// 24-feature review vectors whose accept label depends on the planted
/// aspects' (pos − neg) only. With `separable` the label is a deterministic
/// function of the features; otherwise logistic noise is added.
pub fn planted_vectors(n: usize, planted: &[Aspect], separable: bool, seed: u64) -> (Vec<[f64; 24]>, Vec<bool>) {
    let mut rng = rng::seeded(seed);
    let mut vectors = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v = [0.0; 24];
        for a in 0..8 {
            let pos: f64 = rng.gen_range(0.0..0.3);
            let neg: f64 = rng.gen_range(0.0..0.3);
            v[3 * a] = pos;
            v[3 * a + 1] = neg;
            v[3 * a + 2] = rng.gen_range(0.0..0.1);
        }
        let signal: f64 = planted.iter().map(|a| v[3 * a.index()] - v[3 * a.index() + 1]).sum();
        let noise = if separable { 0.0 } else { 0.1 * standard_normal(&mut rng) };
        labels.push(signal + noise > 0.0);
        vectors.push(v);
    }
    (vectors, labels)
}

/// Returns `labels` in a seeded random order.
pub fn shuffled<T: Clone>(labels: &[T], seed: u64) -> Vec<T> {
    let mut out = labels.to_vec();
    out.shuffle(&mut rng::seeded(seed));
    out
}
