//! Aspect/sentiment labels, the append-only annotation journal, adjudication
//! of disagreeing annotators, and export of the adjudicated training set.
//!
//! Two primary annotators label each sentence. Identical label maps are
//! accepted as is; otherwise a third annotator picks one of the two maps or
//! marks the sentence ambiguous, which drops it from the training set.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::active_learning::SelectionRound;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aspect {
    Appropriateness,
    Clarity,
    Originality,
    EmpiricalTheoreticalSoundness,
    MeaningfulComparison,
    Substance,
    ImpactOfIdeas,
    Recommendation,
}

impl Aspect {
    pub const COUNT: usize = 8;
    pub const ALL: [Aspect; 8] = [
        Aspect::Appropriateness,
        Aspect::Clarity,
        Aspect::Originality,
        Aspect::EmpiricalTheoreticalSoundness,
        Aspect::MeaningfulComparison,
        Aspect::Substance,
        Aspect::ImpactOfIdeas,
        Aspect::Recommendation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn key(self) -> &'static str {
        match self {
            Aspect::Appropriateness => "appropriateness",
            Aspect::Clarity => "clarity",
            Aspect::Originality => "originality",
            Aspect::EmpiricalTheoreticalSoundness => "empirical_theoretical_soundness",
            Aspect::MeaningfulComparison => "meaningful_comparison",
            Aspect::Substance => "substance",
            Aspect::ImpactOfIdeas => "impact_of_ideas",
            Aspect::Recommendation => "recommendation",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Aspect::Appropriateness => "Appropriateness",
            Aspect::Clarity => "Clarity",
            Aspect::Originality => "Originality",
            Aspect::EmpiricalTheoreticalSoundness => "Empirical/Theoretical Soundness",
            Aspect::MeaningfulComparison => "Meaningful Comparison",
            Aspect::Substance => "Substance",
            Aspect::ImpactOfIdeas => "Impact of Ideas",
            Aspect::Recommendation => "Recommendation",
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Sentiment classes in argmax tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sentiment {
    Positive,
    Negative,
    Neutral,
    #[default]
    Absent,
}

impl Sentiment {
    pub const COUNT: usize = 4;
    pub const ALL: [Sentiment; 4] = [
        Sentiment::Positive,
        Sentiment::Negative,
        Sentiment::Neutral,
        Sentiment::Absent,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Sentiment {
        Self::ALL[i]
    }

    pub fn key(self) -> &'static str {
        match self {
            Sentiment::Positive => "positive",
            Sentiment::Negative => "negative",
            Sentiment::Neutral => "neutral",
            Sentiment::Absent => "absent",
        }
    }
}

/// Aspect → sentiment map. Aspects not present are `Absent`; explicit
/// `Absent` entries are dropped so equal labelings compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct LabelMap(BTreeMap<Aspect, Sentiment>);

impl LabelMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, aspect: Aspect, sentiment: Sentiment) -> Self {
        self.set(aspect, sentiment);
        self
    }

    pub fn set(&mut self, aspect: Aspect, sentiment: Sentiment) {
        if sentiment == Sentiment::Absent {
            self.0.remove(&aspect);
        } else {
            self.0.insert(aspect, sentiment);
        }
    }

    pub fn get(&self, aspect: Aspect) -> Sentiment {
        self.0.get(&aspect).copied().unwrap_or(Sentiment::Absent)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Aspect, Sentiment)> + '_ {
        self.0.iter().map(|(a, s)| (*a, *s))
    }

    pub fn to_array(&self) -> [Sentiment; 8] {
        let mut out = [Sentiment::Absent; 8];
        for (a, s) in self.iter() {
            out[a.index()] = s;
        }
        out
    }

    pub fn from_array(labels: &[Sentiment; 8]) -> Self {
        let mut map = LabelMap::new();
        for a in Aspect::ALL {
            map.set(a, labels[a.index()]);
        }
        map
    }
}

impl Serialize for LabelMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LabelMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct LabelVisitor;
        impl<'de> Visitor<'de> for LabelVisitor {
            type Value = LabelMap;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from aspect to sentiment")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<LabelMap, A::Error> {
                let mut seen = BTreeMap::new();
                while let Some((aspect, sentiment)) = access.next_entry::<Aspect, Sentiment>()? {
                    if seen.insert(aspect, sentiment).is_some() {
                        return Err(serde::de::Error::custom(format!(
                            "aspect `{aspect}` labelled more than once"
                        )));
                    }
                }
                let mut map = LabelMap::new();
                for (a, s) in seen {
                    map.set(a, s);
                }
                Ok(map)
            }
        }
        deserializer.deserialize_map(LabelVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub sentence_id: String,
    pub annotator_id: String,
    #[serde(default)]
    pub labels: LabelMap,
    /// Unix seconds; filled by the store when zero.
    #[serde(default)]
    pub timestamp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThirdChoice {
    First,
    Second,
    Ambiguous,
}

/// Third-annotator decision for a disagreeing sentence. Either `choice` or a
/// `labels` map equal to one of the two primaries must be given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub sentence_id: String,
    pub annotator_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<ThirdChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<LabelMap>,
    #[serde(default)]
    pub timestamp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Annotator,
    Adjudicator,
    Admin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjudicationStatus {
    AgreedPrimary,
    ResolvedByThird,
    DiscardedAmbiguous,
    Pending,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicatedSentence {
    pub sentence_id: String,
    pub status: AdjudicationStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_labels: Option<LabelMap>,
}

#[derive(Debug, Error, PartialEq)]
pub enum AnnotationError {
    #[error("unknown sentence `{0}`")]
    UnknownSentence(String),
    #[error("unknown annotator `{0}`")]
    UnknownAnnotator(String),
    #[error("annotator `{annotator}` lacks the {needed:?} role")]
    Forbidden { annotator: String, needed: Role },
    #[error("sentence `{0}` has fewer than two primary annotations")]
    NotEnoughAnnotations(String),
    #[error("sentence `{0}` needs no adjudication: primaries agree")]
    AlreadyAgreed(String),
    #[error("third annotation for `{0}` matches neither primary label map")]
    RejectedResolution(String),
    #[error("resolution for `{0}` gives neither a choice nor labels")]
    EmptyResolution(String),
    #[error("primary annotator `{annotator}` cannot adjudicate `{sentence}`")]
    SelfAdjudication { annotator: String, sentence: String },
    #[error("journal error: {0}")]
    Journal(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum JournalEntry {
    Annotator { annotator_id: String, role: Role },
    Annotation(Annotation),
    Resolution(Resolution),
    Round(SelectionRound),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    pub sentence_id: String,
    pub text: String,
    pub first: Annotation,
    pub second: Annotation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundProgress {
    pub round_id: u32,
    pub selected: usize,
    /// Sentences carrying two primary annotations.
    pub labeled: usize,
    pub adjudicated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub current_round: Option<u32>,
    pub annotated: usize,
    pub agreed: usize,
    pub resolved: usize,
    pub discarded: usize,
    pub pending: usize,
    pub retained: usize,
    /// Agreed share among sentences with two primary annotations.
    pub agreement_rate: f64,
    pub rounds: Vec<RoundProgress>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub sentence_id: String,
    pub text: String,
    pub labels: [Sentiment; 8],
}

/// Non-absent label counts: rows per aspect, columns positive/negative/neutral.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelDistribution(pub [[usize; 3]; 8]);

impl LabelDistribution {
    pub fn from_examples(examples: &[LabeledSentence]) -> Self {
        let mut counts = [[0usize; 3]; 8];
        for ex in examples {
            for (a, s) in ex.labels.iter().enumerate() {
                if *s != Sentiment::Absent {
                    counts[a][s.index()] += 1;
                }
            }
        }
        LabelDistribution(counts)
    }

    pub fn get(&self, aspect: Aspect, sentiment: Sentiment) -> usize {
        if sentiment == Sentiment::Absent {
            return 0;
        }
        self.0[aspect.index()][sentiment.index()]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("aspect,positive,negative,neutral\n");
        for a in Aspect::ALL {
            let row = self.0[a.index()];
            out.push_str(&format!("{},{},{},{}\n", a.key(), row[0], row[1], row[2]));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrainingSet {
    pub examples: Vec<LabeledSentence>,
    pub distribution: LabelDistribution,
}

impl TrainingSet {
    pub fn new(mut examples: Vec<LabeledSentence>) -> Self {
        examples.sort_by(|a, b| a.sentence_id.cmp(&b.sentence_id));
        let distribution = LabelDistribution::from_examples(&examples);
        TrainingSet {
            examples,
            distribution,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for ex in &self.examples {
            out.push_str(&serde_json::to_string(ex).expect("example serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let examples = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<LabeledSentence>, _>>()?;
        Ok(TrainingSet::new(examples))
    }
}

fn now_secs() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Journal-backed annotation state. All derived state is rebuilt by replaying
/// the journal on open.
#[derive(Debug, Default)]
pub struct AnnotationStore {
    journal_path: Option<PathBuf>,
    sentences: BTreeMap<String, String>,
    annotators: BTreeMap<String, Role>,
    annotations: BTreeMap<String, Vec<Annotation>>,
    resolutions: BTreeMap<String, Resolution>,
    rounds: Vec<SelectionRound>,
}

impl AnnotationStore {
    /// Store without persistence over the given `(sentence_id, text)` pairs.
    pub fn in_memory<I, K, V>(sentences: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        AnnotationStore {
            sentences: sentences.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
            ..Default::default()
        }
    }

    /// Opens (or creates) a journal and replays it.
    pub fn open<I, K, V>(path: impl AsRef<Path>, sentences: I) -> Result<Self, AnnotationError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let path = path.as_ref().to_path_buf();
        let mut store = Self::in_memory(sentences);
        if path.exists() {
            let file = File::open(&path).map_err(|e| AnnotationError::Journal(e.to_string()))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| AnnotationError::Journal(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: JournalEntry = serde_json::from_str(&line)
                    .map_err(|e| AnnotationError::Journal(format!("line {}: {e}", i + 1)))?;
                store.apply(entry)?;
            }
        }
        store.journal_path = Some(path);
        Ok(store)
    }

    fn append(&mut self, entry: &JournalEntry) -> Result<(), AnnotationError> {
        if let Some(path) = &self.journal_path {
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| AnnotationError::Journal(e.to_string()))?;
            let line = serde_json::to_string(entry).expect("journal entry serializes");
            writeln!(file, "{line}").map_err(|e| AnnotationError::Journal(e.to_string()))?;
        }
        Ok(())
    }

    fn apply(&mut self, entry: JournalEntry) -> Result<(), AnnotationError> {
        match entry {
            JournalEntry::Annotator { annotator_id, role } => {
                self.annotators.insert(annotator_id, role);
            }
            JournalEntry::Annotation(a) => {
                self.check_annotation(&a)?;
                let list = self.annotations.entry(a.sentence_id.clone()).or_default();
                match list.iter_mut().find(|x| x.annotator_id == a.annotator_id) {
                    Some(existing) => *existing = a,
                    None => list.push(a),
                }
            }
            JournalEntry::Resolution(r) => {
                self.resolutions.insert(r.sentence_id.clone(), r);
            }
            JournalEntry::Round(round) => {
                self.rounds.retain(|x| x.round_id != round.round_id);
                self.rounds.push(round);
                self.rounds.sort_by_key(|r| r.round_id);
            }
        }
        Ok(())
    }

    fn check_annotation(&self, a: &Annotation) -> Result<(), AnnotationError> {
        if !self.sentences.contains_key(&a.sentence_id) {
            return Err(AnnotationError::UnknownSentence(a.sentence_id.clone()));
        }
        if !self.annotators.contains_key(&a.annotator_id) {
            return Err(AnnotationError::UnknownAnnotator(a.annotator_id.clone()));
        }
        Ok(())
    }

    pub fn register_annotator(&mut self, annotator_id: &str, role: Role) -> Result<(), AnnotationError> {
        if self.annotators.get(annotator_id) == Some(&role) {
            return Ok(());
        }
        let entry = JournalEntry::Annotator {
            annotator_id: annotator_id.to_string(),
            role,
        };
        self.append(&entry)?;
        self.apply(entry)
    }

    pub fn role(&self, annotator_id: &str) -> Option<Role> {
        self.annotators.get(annotator_id).copied()
    }

    pub fn sentence_text(&self, id: &str) -> Option<&str> {
        self.sentences.get(id).map(String::as_str)
    }

    /// Stores an annotation. A re-submission by the same annotator replaces
    /// the earlier labels; an identical re-submission is a no-op.
    pub fn record_annotation(&mut self, mut a: Annotation) -> Result<Annotation, AnnotationError> {
        self.check_annotation(&a)?;
        if let Some(existing) = self
            .annotations
            .get(&a.sentence_id)
            .and_then(|list| list.iter().find(|x| x.annotator_id == a.annotator_id))
        {
            if existing.labels == a.labels {
                return Ok(existing.clone());
            }
        }
        if a.timestamp == 0 {
            a.timestamp = now_secs();
        }
        let entry = JournalEntry::Annotation(a.clone());
        self.append(&entry)?;
        self.apply(entry)?;
        Ok(a)
    }

    pub fn annotations(&self, sentence_id: &str) -> &[Annotation] {
        self.annotations.get(sentence_id).map(Vec::as_slice).unwrap_or(&[])
    }

    fn primaries(&self, sentence_id: &str) -> Option<(&Annotation, &Annotation)> {
        match self.annotations(sentence_id) {
            [a, b, ..] => Some((a, b)),
            _ => None,
        }
    }

    /// Records a third-annotator decision and returns the new status.
    pub fn record_resolution(&mut self, mut r: Resolution) -> Result<AdjudicatedSentence, AnnotationError> {
        let sid = r.sentence_id.clone();
        if !self.sentences.contains_key(&sid) {
            return Err(AnnotationError::UnknownSentence(sid));
        }
        let role = self
            .role(&r.annotator_id)
            .ok_or_else(|| AnnotationError::UnknownAnnotator(r.annotator_id.clone()))?;
        if role < Role::Adjudicator {
            return Err(AnnotationError::Forbidden {
                annotator: r.annotator_id.clone(),
                needed: Role::Adjudicator,
            });
        }
        let (first, second) = self
            .primaries(&sid)
            .ok_or_else(|| AnnotationError::NotEnoughAnnotations(sid.clone()))?;
        if first.labels == second.labels {
            return Err(AnnotationError::AlreadyAgreed(sid));
        }
        if r.annotator_id == first.annotator_id || r.annotator_id == second.annotator_id {
            return Err(AnnotationError::SelfAdjudication {
                annotator: r.annotator_id.clone(),
                sentence: sid,
            });
        }
        let choice = match (&r.choice, &r.labels) {
            (Some(ThirdChoice::Ambiguous), _) => ThirdChoice::Ambiguous,
            (Some(c), None) => *c,
            (Some(c), Some(labels)) => {
                let matches = match c {
                    ThirdChoice::First => *labels == first.labels,
                    _ => *labels == second.labels,
                };
                if !matches {
                    return Err(AnnotationError::RejectedResolution(sid));
                }
                *c
            }
            (None, Some(labels)) if *labels == first.labels => ThirdChoice::First,
            (None, Some(labels)) if *labels == second.labels => ThirdChoice::Second,
            (None, Some(_)) => return Err(AnnotationError::RejectedResolution(sid)),
            (None, None) => return Err(AnnotationError::EmptyResolution(sid)),
        };
        r.choice = Some(choice);
        r.labels = None;
        if r.timestamp == 0 {
            r.timestamp = now_secs();
        }
        let entry = JournalEntry::Resolution(r);
        self.append(&entry)?;
        self.apply(entry)?;
        self.adjudicate(&sid)
    }

    /// Current adjudication state of a sentence, computed on read.
    pub fn adjudicate(&self, sentence_id: &str) -> Result<AdjudicatedSentence, AnnotationError> {
        if !self.sentences.contains_key(sentence_id) {
            return Err(AnnotationError::UnknownSentence(sentence_id.to_string()));
        }
        let make = |status, final_labels| AdjudicatedSentence {
            sentence_id: sentence_id.to_string(),
            status,
            final_labels,
        };
        let Some((first, second)) = self.primaries(sentence_id) else {
            return Ok(make(AdjudicationStatus::Pending, None));
        };
        if first.labels == second.labels {
            return Ok(make(AdjudicationStatus::AgreedPrimary, Some(first.labels.clone())));
        }
        Ok(match self.resolutions.get(sentence_id).and_then(|r| r.choice) {
            None => make(AdjudicationStatus::Pending, None),
            Some(ThirdChoice::Ambiguous) => make(AdjudicationStatus::DiscardedAmbiguous, None),
            Some(ThirdChoice::First) => make(AdjudicationStatus::ResolvedByThird, Some(first.labels.clone())),
            Some(ThirdChoice::Second) => make(AdjudicationStatus::ResolvedByThird, Some(second.labels.clone())),
        })
    }

    /// Disagreeing sentences still waiting for a third annotator.
    pub fn adjudication_queue(&self) -> Vec<QueueItem> {
        self.annotations
            .keys()
            .filter_map(|sid| {
                let (first, second) = self.primaries(sid)?;
                if first.labels == second.labels || self.resolutions.contains_key(sid) {
                    return None;
                }
                Some(QueueItem {
                    sentence_id: sid.clone(),
                    text: self.sentences[sid].clone(),
                    first: first.clone(),
                    second: second.clone(),
                })
            })
            .collect()
    }

    pub fn open_round(&mut self, round: SelectionRound) -> Result<(), AnnotationError> {
        if let Some(missing) = round.selected.iter().find(|id| !self.sentences.contains_key(*id)) {
            return Err(AnnotationError::UnknownSentence(missing.clone()));
        }
        let entry = JournalEntry::Round(round);
        self.append(&entry)?;
        self.apply(entry)
    }

    pub fn rounds(&self) -> &[SelectionRound] {
        &self.rounds
    }

    pub fn current_round(&self) -> Option<&SelectionRound> {
        self.rounds.last()
    }

    /// Next sentence of the current round this annotator should label: one
    /// they have not labelled that still lacks two primary annotations.
    pub fn next_for(&self, annotator_id: &str) -> Option<(&str, &str)> {
        let round = self.current_round()?;
        round.selected.iter().find_map(|sid| {
            let list = self.annotations(sid);
            let mine = list.iter().any(|a| a.annotator_id == annotator_id);
            (!mine && list.len() < 2).then(|| (sid.as_str(), self.sentences[sid].as_str()))
        })
    }

    /// Ids of every sentence that has been labelled or selected in a round.
    pub fn touched_sentences(&self) -> std::collections::BTreeSet<&str> {
        self.annotations
            .keys()
            .map(String::as_str)
            .chain(self.rounds.iter().flat_map(|r| r.selected.iter().map(String::as_str)))
            .collect()
    }

    pub fn progress(&self) -> Progress {
        let (mut agreed, mut resolved, mut discarded, mut pending, mut double) = (0, 0, 0, 0, 0);
        for sid in self.annotations.keys() {
            if self.primaries(sid).is_some() {
                double += 1;
            }
            match self.adjudicate(sid).map(|a| a.status) {
                Ok(AdjudicationStatus::AgreedPrimary) => agreed += 1,
                Ok(AdjudicationStatus::ResolvedByThird) => resolved += 1,
                Ok(AdjudicationStatus::DiscardedAmbiguous) => discarded += 1,
                _ => pending += 1,
            }
        }
        let rounds = self
            .rounds
            .iter()
            .map(|round| RoundProgress {
                round_id: round.round_id,
                selected: round.selected.len(),
                labeled: round
                    .selected
                    .iter()
                    .filter(|s| self.primaries(s).is_some())
                    .count(),
                adjudicated: round
                    .selected
                    .iter()
                    .filter(|s| {
                        self.adjudicate(s)
                            .map(|a| a.status != AdjudicationStatus::Pending)
                            .unwrap_or(false)
                    })
                    .count(),
            })
            .collect();
        Progress {
            current_round: self.current_round().map(|r| r.round_id),
            annotated: self.annotations.len(),
            agreed,
            resolved,
            discarded,
            pending,
            retained: agreed + resolved,
            agreement_rate: if double == 0 { 0.0 } else { agreed as f64 / double as f64 },
            rounds,
        }
    }

    /// Adjudicated sentences with final labels, sorted by id.
    pub fn export_training_set(&self) -> TrainingSet {
        let examples = self
            .annotations
            .keys()
            .filter_map(|sid| {
                let adj = self.adjudicate(sid).ok()?;
                let labels = adj.final_labels?;
                Some(LabeledSentence {
                    sentence_id: sid.clone(),
                    text: self.sentences[sid].clone(),
                    labels: labels.to_array(),
                })
            })
            .collect();
        TrainingSet::new(examples)
    }
}
