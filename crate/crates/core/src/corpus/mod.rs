//! Normalized paper / review / sentence data model.
//!
//! A corpus is read from JSONL (one paper per line) or fetched from an
//! OpenReview-style API (see [`api`]). Withdrawn papers stay in storage but
//! are skipped by every analysis through [`Corpus::eligible_papers`].

pub mod api;
mod segment;
mod stats;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use segment::segment_sentences;
pub use stats::{corpus_stats, paper_counts, review_decision_counts, CorpusStats, GroupBy, GroupStats, MeanStd};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: invalid field `{field}`: {message}")]
    Validation {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: duplicate {kind} id `{id}`")]
    DuplicateId {
        line: usize,
        kind: &'static str,
        id: String,
    },
}

/// Chair decision as published by the venue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Oral,
    Poster,
    Workshop,
    Reject,
    Withdrawn,
}

impl Decision {
    pub const ALL: [Decision; 5] = [
        Decision::Oral,
        Decision::Poster,
        Decision::Workshop,
        Decision::Reject,
        Decision::Withdrawn,
    ];

    /// Oral and poster papers form the accepted group.
    pub fn is_accepted(self) -> bool {
        matches!(self, Decision::Oral | Decision::Poster)
    }

    pub fn is_rejected(self) -> bool {
        self == Decision::Reject
    }

    /// Accepted or rejected; workshop and withdrawn papers have no binary outcome.
    pub fn binary_outcome(self) -> Option<bool> {
        match self {
            Decision::Oral | Decision::Poster => Some(true),
            Decision::Reject => Some(false),
            Decision::Workshop | Decision::Withdrawn => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Oral => "oral",
            Decision::Poster => "poster",
            Decision::Workshop => "workshop",
            Decision::Reject => "reject",
            Decision::Withdrawn => "withdrawn",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub review_id: String,
    pub index: usize,
    pub text: String,
}

impl Sentence {
    pub fn make_id(review_id: &str, index: usize) -> String {
        format!("{review_id}#s{index}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub id: String,
    /// Filled from the enclosing paper on load; not part of the file format.
    #[serde(default, skip_serializing)]
    pub paper_id: String,
    pub reviewer_alias: String,
    pub score: u8,
    #[serde(default)]
    pub confidence: Option<u8>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paper {
    pub id: String,
    pub year: u32,
    pub title: String,
    pub decision: Decision,
    pub reviews: Vec<Review>,
}

impl Paper {
    pub fn is_excluded(&self) -> bool {
        self.decision == Decision::Withdrawn
    }

    pub fn scores(&self) -> Vec<u8> {
        self.reviews.iter().map(|r| r.score).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct SentenceLoc {
    paper: usize,
    review: usize,
    sentence: usize,
}

/// Validated, immutable collection of papers.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    papers: Vec<Paper>,
    reviews: HashMap<String, (usize, usize)>,
    sentences: HashMap<String, SentenceLoc>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.papers == other.papers
    }
}

impl Corpus {
    /// Validates papers and builds the id indices. Line numbers in errors are
    /// 1-based positions in `papers`.
    pub fn new(mut papers: Vec<Paper>) -> Result<Self, CorpusError> {
        let mut paper_ids = HashSet::new();
        for (i, paper) in papers.iter_mut().enumerate() {
            let line = i + 1;
            validate_paper(paper, line)?;
            if !paper_ids.insert(paper.id.clone()) {
                return Err(CorpusError::DuplicateId {
                    line,
                    kind: "paper",
                    id: paper.id.clone(),
                });
            }
            for review in &mut paper.reviews {
                review.paper_id = paper.id.clone();
            }
        }
        let mut corpus = Corpus {
            papers,
            ..Default::default()
        };
        corpus.reindex()?;
        Ok(corpus)
    }

    fn reindex(&mut self) -> Result<(), CorpusError> {
        self.reviews.clear();
        self.sentences.clear();
        for (p, paper) in self.papers.iter().enumerate() {
            for (r, review) in paper.reviews.iter().enumerate() {
                if self.reviews.insert(review.id.clone(), (p, r)).is_some() {
                    return Err(CorpusError::DuplicateId {
                        line: p + 1,
                        kind: "review",
                        id: review.id.clone(),
                    });
                }
                for (s, sentence) in review.sentences.iter().enumerate() {
                    let loc = SentenceLoc {
                        paper: p,
                        review: r,
                        sentence: s,
                    };
                    if self.sentences.insert(sentence.id.clone(), loc).is_some() {
                        return Err(CorpusError::DuplicateId {
                            line: p + 1,
                            kind: "sentence",
                            id: sentence.id.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn papers(&self) -> &[Paper] {
        &self.papers
    }

    pub fn into_papers(self) -> Vec<Paper> {
        self.papers
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    /// Papers that take part in analyses (everything except withdrawn).
    pub fn eligible_papers(&self) -> impl Iterator<Item = &Paper> {
        self.papers.iter().filter(|p| !p.is_excluded())
    }

    pub fn paper(&self, id: &str) -> Option<&Paper> {
        self.papers.iter().find(|p| p.id == id)
    }

    pub fn review(&self, id: &str) -> Option<&Review> {
        self.reviews
            .get(id)
            .map(|&(p, r)| &self.papers[p].reviews[r])
    }

    pub fn sentence(&self, id: &str) -> Option<&Sentence> {
        self.sentences
            .get(id)
            .map(|loc| &self.papers[loc.paper].reviews[loc.review].sentences[loc.sentence])
    }

    /// Sentences of eligible papers in corpus order.
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.eligible_papers()
            .flat_map(|p| p.reviews.iter())
            .flat_map(|r| r.sentences.iter())
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences().count()
    }

    /// True when at least one review carries sentences or every review text is blank.
    pub fn is_segmented(&self) -> bool {
        self.papers
            .iter()
            .flat_map(|p| p.reviews.iter())
            .all(|r| !r.sentences.is_empty() || r.text.trim().is_empty())
    }

    /// Splits every review into sentences, replacing existing segmentation.
    pub fn segment(&mut self) {
        for paper in &mut self.papers {
            for review in &mut paper.reviews {
                review.sentences = segment_sentences(&review.text)
                    .into_iter()
                    .enumerate()
                    .map(|(index, text)| Sentence {
                        id: Sentence::make_id(&review.id, index),
                        review_id: review.id.clone(),
                        index,
                        text,
                    })
                    .collect();
            }
        }
        self.reindex()
            .expect("sentence ids derive from unique review ids");
    }

    pub fn segmented(mut self) -> Self {
        self.segment();
        self
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for paper in &self.papers {
            out.push_str(&serde_json::to_string(paper).expect("paper serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        let io_err = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut file = File::create(path).map_err(io_err)?;
        file.write_all(self.to_jsonl().as_bytes()).map_err(io_err)
    }

    /// Per-review sentence lists keyed by review id, for eligible papers.
    pub fn sentences_by_review(&self) -> BTreeMap<&str, &[Sentence]> {
        self.eligible_papers()
            .flat_map(|p| p.reviews.iter())
            .map(|r| (r.id.as_str(), r.sentences.as_slice()))
            .collect()
    }
}

fn validation(line: usize, field: &str, message: impl Into<String>) -> CorpusError {
    CorpusError::Validation {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn validate_paper(paper: &Paper, line: usize) -> Result<(), CorpusError> {
    if paper.id.trim().is_empty() {
        return Err(validation(line, "id", "empty paper id"));
    }
    if paper.year == 0 {
        return Err(validation(line, "year", "year must be positive"));
    }
    for (r, review) in paper.reviews.iter().enumerate() {
        let field = |name: &str| format!("reviews[{r}].{name}");
        if review.id.trim().is_empty() {
            return Err(validation(line, &field("id"), "empty review id"));
        }
        if !(1..=10).contains(&review.score) {
            return Err(validation(
                line,
                &field("score"),
                format!("score {} outside [1, 10]", review.score),
            ));
        }
        if let Some(c) = review.confidence {
            if !(1..=5).contains(&c) {
                return Err(validation(
                    line,
                    &field("confidence"),
                    format!("confidence {c} outside [1, 5]"),
                ));
            }
        }
        for (s, sentence) in review.sentences.iter().enumerate() {
            let sfield = format!("reviews[{r}].sentences[{s}]");
            if sentence.index != s {
                return Err(validation(line, &sfield, "sentence indices must be contiguous from 0"));
            }
            if sentence.review_id != review.id {
                return Err(validation(line, &sfield, "review_id does not match enclosing review"));
            }
            if sentence.text.is_empty() || sentence.text.trim() != sentence.text {
                return Err(validation(line, &sfield, "sentence text must be non-empty and trimmed"));
            }
        }
    }
    Ok(())
}

/// Parses JSONL paper records. Blank lines are skipped.
pub fn parse_jsonl(reader: impl BufRead) -> Result<Corpus, CorpusError> {
    let mut papers = Vec::new();
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let paper: Paper = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        papers.push(paper);
        lines.push(line_no);
    }
    // Re-map positional line numbers reported by `Corpus::new` to file lines.
    Corpus::new(papers).map_err(|err| remap_line(err, &lines))
}

fn remap_line(err: CorpusError, lines: &[usize]) -> CorpusError {
    let fix = |l: usize| lines.get(l.wrapping_sub(1)).copied().unwrap_or(l);
    match err {
        CorpusError::Validation {
            line,
            field,
            message,
        } => CorpusError::Validation {
            line: fix(line),
            field,
            message,
        },
        CorpusError::DuplicateId { line, kind, id } => CorpusError::DuplicateId {
            line: fix(line),
            kind,
            id,
        },
        other => other,
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_jsonl(BufReader::new(file))
}
