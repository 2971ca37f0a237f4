//! Text featurization: tokens, word n-gram sets, Jaccard and cosine
//! similarity, hashed sparse vectors and precomputed sentence embeddings.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_NGRAM_MAX: usize = 3;
pub const DEFAULT_HASH_DIMENSION: usize = 1 << 18;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("undefined cosine: zero vector")]
    UndefinedCosine,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding missing for sentence `{0}`")]
    MissingEmbedding(String),
    #[error("embedding file line {line}: {message}")]
    EmbeddingFile { line: usize, message: String },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

/// Lowercased maximal runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn ngrams_of(tokens: &[String], n_max: usize, mut emit: impl FnMut(String)) {
    for n in 1..=n_max.max(1) {
        if n > tokens.len() {
            break;
        }
        for window in tokens.windows(n) {
            emit(window.join(" "));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NgramSet {
    pub sentence_id: String,
    pub grams: BTreeSet<String>,
}

/// All word k-grams for k in 1..=n_max, case-folded.
pub fn ngram_set(text: &str, n_max: usize) -> NgramSet {
    let tokens = tokenize(text);
    let mut grams = BTreeSet::new();
    ngrams_of(&tokens, n_max, |g| {
        grams.insert(g);
    });
    NgramSet {
        sentence_id: String::new(),
        grams,
    }
}

/// |a ∩ b| / |a ∪ b|, with two empty sets counting as identical.
pub fn jaccard(a: &NgramSet, b: &NgramSet) -> f64 {
    if a.grams.is_empty() && b.grams.is_empty() {
        return 1.0;
    }
    let inter = a.grams.intersection(&b.grams).count();
    let union = a.grams.len() + b.grams.len() - inter;
    inter as f64 / union as f64
}

/// Jaccard similarity over sorted, deduplicated id slices.
pub fn jaccard_sorted(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, FeatureError> {
    if u.len() != v.len() {
        return Err(FeatureError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(FeatureError::UndefinedCosine);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub dimension: usize,
}

impl SparseVector {
    pub fn from_map(map: BTreeMap<u32, f64>, dimension: usize) -> Self {
        let (indices, values) = map.into_iter().filter(|&(_, v)| v != 0.0).unzip();
        SparseVector {
            indices,
            values,
            dimension,
        }
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let map = dense
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as u32, v))
            .collect();
        Self::from_map(map, dense.len())
    }

    pub fn get(&self, index: u32) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureScheme {
    HashedNgramBinary,
    Tfidf,
}

/// Hashed n-gram vectorizer. For tf-idf it keeps per-bucket document
/// frequencies from the fitting texts so unseen sentences can be transformed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub scheme: FeatureScheme,
    pub dimension: usize,
    pub n_max: usize,
    pub documents: usize,
    /// Sorted (bucket, document frequency) pairs; empty for the binary scheme.
    pub doc_freq: Vec<(u32, u32)>,
}

impl Featurizer {
    pub fn new(scheme: FeatureScheme, dimension: usize, n_max: usize) -> Self {
        assert!(dimension >= 2, "hash dimension must be at least 2");
        Featurizer {
            scheme,
            dimension,
            n_max,
            documents: 0,
            doc_freq: Vec::new(),
        }
    }

    fn bucket_counts(&self, text: &str) -> BTreeMap<u32, u32> {
        let mut counts = BTreeMap::new();
        ngrams_of(&tokenize(text), self.n_max, |g| {
            let bucket = (fnv1a64(g.as_bytes()) % self.dimension as u64) as u32;
            *counts.entry(bucket).or_insert(0) += 1;
        });
        counts
    }

    pub fn fit<S: AsRef<str>>(mut self, texts: &[S]) -> Self {
        self.documents = texts.len();
        if self.scheme == FeatureScheme::Tfidf {
            let mut df: BTreeMap<u32, u32> = BTreeMap::new();
            for text in texts {
                for bucket in self.bucket_counts(text.as_ref()).into_keys() {
                    *df.entry(bucket).or_insert(0) += 1;
                }
            }
            self.doc_freq = df.into_iter().collect();
        }
        self
    }

    fn idf(&self, bucket: u32) -> f64 {
        match self.doc_freq.binary_search_by_key(&bucket, |&(b, _)| b) {
            Ok(pos) => (self.documents as f64 / f64::from(self.doc_freq[pos].1)).ln(),
            // Unseen buckets carry no weight.
            Err(_) => 0.0,
        }
    }

    pub fn transform(&self, text: &str) -> SparseVector {
        let counts = self.bucket_counts(text);
        let map = counts
            .into_iter()
            .map(|(bucket, tf)| {
                let value = match self.scheme {
                    FeatureScheme::HashedNgramBinary => 1.0,
                    FeatureScheme::Tfidf => (1.0 + f64::from(tf)).ln() * self.idf(bucket),
                };
                (bucket, value)
            })
            .collect();
        SparseVector::from_map(map, self.dimension)
    }
}

/// Fits a featurizer on `texts` and transforms each of them.
pub fn featurize<S: AsRef<str>>(
    texts: &[S],
    scheme: FeatureScheme,
    dimension: usize,
    n_max: usize,
) -> Vec<SparseVector> {
    let featurizer = Featurizer::new(scheme, dimension, n_max).fit(texts);
    texts.iter().map(|t| featurizer.transform(t.as_ref())).collect()
}

/// Dense sentence embeddings keyed by sentence id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    pub dimension: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

#[derive(Deserialize)]
struct Header {
    dimension: usize,
}

#[derive(Serialize, Deserialize)]
struct Row {
    id: String,
    v: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        EmbeddingTable {
            dimension,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<(), FeatureError> {
        if vector.len() != self.dimension {
            return Err(FeatureError::DimensionMismatch {
                left: self.dimension,
                right: vector.len(),
            });
        }
        self.vectors.insert(id.into(), vector);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&[f64], FeatureError> {
        self.vectors
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| FeatureError::MissingEmbedding(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.vectors.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Entries in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn parse(reader: impl BufRead) -> Result<Self, FeatureError> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| FeatureError::EmbeddingFile {
                line: line_no,
                message,
            };
            let line = line.map_err(|e| err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            match table.as_mut() {
                None => {
                    let header: Header = serde_json::from_str(&line).map_err(|e| err(format!("bad header: {e}")))?;
                    if header.dimension == 0 {
                        return Err(err("dimension must be positive".into()));
                    }
                    table = Some(EmbeddingTable::new(header.dimension));
                }
                Some(t) => {
                    let row: Row = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
                    if row.v.len() != t.dimension {
                        return Err(err(format!(
                            "expected {} values, found {}",
                            t.dimension,
                            row.v.len()
                        )));
                    }
                    if row.v.iter().any(|x| !x.is_finite()) {
                        return Err(err("non-finite value".into()));
                    }
                    t.vectors.insert(row.id, row.v);
                }
            }
        }
        table.ok_or(FeatureError::EmbeddingFile {
            line: 1,
            message: "missing dimension header".into(),
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = format!("{{\"dimension\":{}}}\n", self.dimension);
        for (id, v) in &self.vectors {
            out.push_str(
                &serde_json::to_string(&Row {
                    id: id.clone(),
                    v: v.clone(),
                })
                .expect("row serializes"),
            );
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        let path = path.as_ref();
        let io = |e: std::io::Error| FeatureError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        File::create(path).map_err(io)?.write_all(self.to_jsonl().as_bytes()).map_err(io)
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable, FeatureError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| FeatureError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    EmbeddingTable::parse(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(items: &[&str]) -> NgramSet {
        NgramSet {
            sentence_id: String::new(),
            grams: items.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn ngram_examples() {
        assert_eq!(ngram_set("a b", 2).grams, set(&["a", "b", "a b"]).grams);
        assert!(ngram_set("", 3).grams.is_empty());
        assert_eq!(ngram_set("A a", 1).grams, set(&["a"]).grams);
        assert_eq!(ngram_set("x y z", 3).grams.len(), 6);
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&set(&["a", "b", "c"]), &set(&["b", "c", "d"])), 0.5);
        assert_eq!(jaccard(&set(&["a", "b"]), &set(&["a", "b"])), 1.0);
        assert_eq!(jaccard(&set(&["a"]), &set(&["b"])), 0.0);
        assert_eq!(jaccard(&set(&[]), &set(&[])), 1.0);
        assert_eq!(jaccard_sorted(&[1, 2, 3], &[2, 3, 4]), 0.5);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 1.0], &[2.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((cosine(&[1.0, 2.0], &[2.0, 1.0]).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(FeatureError::UndefinedCosine));
    }

    #[test]
    fn identical_sentences_identical_vectors() {
        for scheme in [FeatureScheme::HashedNgramBinary, FeatureScheme::Tfidf] {
            let v = featurize(&["same text here", "same text here", "other"], scheme, 1 << 10, 3);
            assert_eq!(v[0], v[1]);
        }
    }

    #[test]
    fn tfidf_of_ubiquitous_term_is_zero() {
        let v = featurize(&["common", "common", "common"], FeatureScheme::Tfidf, 64, 1);
        assert!(v.iter().all(|x| x.nnz() == 0));
    }

    #[test]
    fn tfidf_matches_hand_table() {
        // "alpha" appears in 2 of 3 one-word documents, "beta" in 1.
        let dim = 1 << 16;
        let v = featurize(&["alpha", "beta", "Alpha"], FeatureScheme::Tfidf, dim, 1);
        let alpha = (fnv1a64(b"alpha") % dim as u64) as u32;
        let beta = (fnv1a64(b"beta") % dim as u64) as u32;
        let w_alpha = 2f64.ln() * 1.5f64.ln();
        let w_beta = 2f64.ln() * 3f64.ln();
        assert_eq!(v[0].indices, vec![alpha]);
        assert!((v[0].values[0] - w_alpha).abs() < 1e-12);
        assert!((v[1].get(beta) - w_beta).abs() < 1e-12);
        assert_eq!(v[0], v[2]);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn embedding_file_parsing() {
        let ok = "{\"dimension\": 4}\n{\"id\":\"s1\",\"v\":[1,2,3,4]}\n{\"id\":\"s2\",\"v\":[0.5,0,0,1e-3]}\n";
        let table = EmbeddingTable::parse(ok.as_bytes()).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.get("s2").unwrap()[3], 1e-3);
        assert_eq!(
            table.get("nope"),
            Err(FeatureError::MissingEmbedding("nope".into()))
        );
        assert!(table.get("nope").unwrap_err().to_string().contains("embedding missing for sentence"));
        let bad = "{\"dimension\": 4}\n{\"id\":\"s1\",\"v\":[1,2,3]}\n";
        assert!(matches!(
            EmbeddingTable::parse(bad.as_bytes()),
            Err(FeatureError::EmbeddingFile { line: 2, .. })
        ));
        let again = EmbeddingTable::parse(table.to_jsonl().as_bytes()).unwrap();
        assert_eq!(again, table);
    }

    fn small_set() -> impl Strategy<Value = NgramSet> {
        proptest::collection::btree_set("[a-e]", 0..5).prop_map(|grams| NgramSet {
            sentence_id: String::new(),
            grams,
        })
    }

    proptest! {
        #[test]
        fn jaccard_is_symmetric_and_reflexive(a in small_set(), b in small_set()) {
            prop_assert_eq!(jaccard(&a, &b), jaccard(&b, &a));
            prop_assert_eq!(jaccard(&a, &a), 1.0);
            let j = jaccard(&a, &b);
            prop_assert!((0.0..=1.0).contains(&j));
        }

        #[test]
        fn jaccard_distance_triangle(a in small_set(), b in small_set(), c in small_set()) {
            let d = |x: &NgramSet, y: &NgramSet| 1.0 - jaccard(x, y);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        }

        #[test]
        fn cosine_symmetric_and_scale_invariant(
            u in proptest::collection::vec(-5.0f64..5.0, 3),
            v in proptest::collection::vec(-5.0f64..5.0, 3),
            s in 0.1f64..10.0,
        ) {
            prop_assume!(norm(&u) > 1e-6 && norm(&v) > 1e-6);
            let c = cosine(&u, &v).unwrap();
            prop_assert!((c - cosine(&v, &u).unwrap()).abs() < 1e-12);
            let scaled: Vec<f64> = u.iter().map(|x| x * s).collect();
            prop_assert!((c - cosine(&scaled, &v).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn featurize_is_order_independent(
            texts in proptest::collection::vec("[a-d ]{0,12}", 1..6),
            rotate in 0usize..6,
        ) {
            for scheme in [FeatureScheme::HashedNgramBinary, FeatureScheme::Tfidf] {
                let base = featurize(&texts, scheme, 257, 2);
                let mut shuffled = texts.clone();
                let r = rotate % shuffled.len();
                shuffled.rotate_left(r);
                let other = featurize(&shuffled, scheme, 257, 2);
                for (i, v) in base.iter().enumerate() {
                    let j = (i + shuffled.len() - r) % shuffled.len();
                    prop_assert_eq!(v, &other[j]);
                }
            }
        }
    }
}
