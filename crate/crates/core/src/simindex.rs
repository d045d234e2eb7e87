//! Similarity scoring between sparse vectors and exact retrieval over a corpus.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::featurize::{vectorize, FeatureBag, SparseVector, VectorMode, Vocabulary};

pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Dot,
    Cosine,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Dot => "dot",
            Metric::Cosine => "cosine",
        })
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dot" => Ok(Metric::Dot),
            "cosine" | "cos" => Ok(Metric::Cosine),
            other => Err(format!("unknown metric {other:?} (expected dot or cosine)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("duplicate program id {0:?}")]
    DuplicateId(String),
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("k = {k} out of range 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("index file: {0}")]
    Format(String),
}

/// Σ aᵢbᵢ by sorted merge, accumulated in index order.
pub fn dot(a: &SparseVector, b: &SparseVector) -> Result<f64, SimError> {
    if a.dimension != b.dimension {
        return Err(SimError::DimensionMismatch(a.dimension, b.dimension));
    }
    Ok(merge_dot(&a.entries, &b.entries))
}

fn merge_dot(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

fn cosine_from(dot: f64, na: f64, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        log::warn!("cosine similarity with a zero vector; scoring it 0");
        return 0.0;
    }
    dot / (na * nb)
}

/// Cosine similarity; a zero vector scores 0 against everything.
pub fn cosine(a: &SparseVector, b: &SparseVector) -> Result<f64, SimError> {
    let d = dot(a, b)?;
    Ok(cosine_from(d, a.norm(), b.norm()))
}

/// Ranked neighbours of one query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedResult {
    pub query_id: String,
    pub hits: Vec<(String, f64)>,
    pub metric: Metric,
}

/// Immutable exhaustive-search index, ordered by program id.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusIndex {
    vocab: Vocabulary,
    mode: VectorMode,
    ids: Vec<String>,
    labels: Vec<Option<String>>,
    vectors: Vec<SparseVector>,
    norms: Vec<f64>,
}

pub fn build_index(bags: &[FeatureBag], vocab: &Vocabulary, mode: VectorMode) -> Result<CorpusIndex, SimError> {
    if bags.is_empty() {
        return Err(SimError::EmptyCorpus);
    }
    let mut order: Vec<&FeatureBag> = bags.iter().collect();
    order.sort_by(|a, b| a.program_id.cmp(&b.program_id));
    let mut seen = HashSet::new();
    for b in &order {
        if !seen.insert(b.program_id.as_str()) {
            return Err(SimError::DuplicateId(b.program_id.clone()));
        }
    }
    let vectors: Vec<SparseVector> = order.iter().map(|b| vectorize(b, vocab, mode)).collect();
    Ok(CorpusIndex::assemble(
        vocab.clone(),
        mode,
        order.iter().map(|b| b.program_id.clone()).collect(),
        order.iter().map(|b| b.class_label.clone()).collect(),
        vectors,
    ))
}

#[derive(Serialize, Deserialize)]
struct IndexEntry {
    id: String,
    label: Option<String>,
    entries: Vec<(u32, f64)>,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    version: u32,
    #[serde(default)]
    config: Option<String>,
    vocab_hash: String,
    vocabulary: serde_json::Value,
    mode: VectorMode,
    programs: Vec<IndexEntry>,
}

impl CorpusIndex {
    fn assemble(
        vocab: Vocabulary,
        mode: VectorMode,
        ids: Vec<String>,
        labels: Vec<Option<String>>,
        vectors: Vec<SparseVector>,
    ) -> Self {
        let norms = vectors.iter().map(SparseVector::norm).collect();
        CorpusIndex { vocab, mode, ids, labels, vectors, norms }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[Option<String>] {
        &self.labels
    }

    pub fn vectors(&self) -> &[SparseVector] {
        &self.vectors
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn mode(&self) -> VectorMode {
        self.mode
    }

    /// Score between indexed programs `i` and `j`.
    pub fn score(&self, i: usize, j: usize, metric: Metric) -> f64 {
        let d = merge_dot(&self.vectors[i].entries, &self.vectors[j].entries);
        match metric {
            Metric::Dot => d,
            Metric::Cosine => cosine_from(d, self.norms[i], self.norms[j]),
        }
    }

    fn score_vector(&self, q: &SparseVector, q_norm: f64, i: usize, metric: Metric) -> f64 {
        let d = merge_dot(&q.entries, &self.vectors[i].entries);
        match metric {
            Metric::Dot => d,
            Metric::Cosine => cosine_from(d, q_norm, self.norms[i]),
        }
    }

    /// Top-`k` programs for `q`; ties go to the smaller program id.
    pub fn query(&self, query_id: &str, q: &SparseVector, k: usize, metric: Metric) -> Result<RankedResult, SimError> {
        if k == 0 || k > self.len() {
            return Err(SimError::KOutOfRange { k, n: self.len() });
        }
        if q.dimension != self.vocab.len() {
            return Err(SimError::DimensionMismatch(q.dimension, self.vocab.len()));
        }
        let qn = q.norm();
        let mut scored: Vec<(usize, f64)> = (0..self.len()).map(|i| (i, self.score_vector(q, qn, i, metric))).collect();
        // ids are sorted, so index order is id order
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(RankedResult {
            query_id: query_id.to_string(),
            hits: scored.into_iter().map(|(i, s)| (self.ids[i].clone(), s)).collect(),
            metric,
        })
    }

    /// All `(i, j, score)` with `i < j`, plus `i == j` when `self_pairs`,
    /// in row-major order.
    pub fn pairwise_scores(&self, metric: Metric, self_pairs: bool) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| {
            let from = if self_pairs { i } else { i + 1 };
            (from..n).map(move |j| (i, j, self.score(i, j, metric)))
        })
    }

    /// Same as [`pairwise_scores`](Self::pairwise_scores), rows sharded across threads.
    pub fn pairwise_scores_par(&self, metric: Metric, self_pairs: bool) -> Vec<(usize, usize, f64)> {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let from = if self_pairs { i } else { i + 1 };
                (from..n).map(|j| (i, j, self.score(i, j, metric))).collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
            .concat()
    }

    /// Versioned JSON container; embeds the vocabulary and its hash.
    pub fn to_json(&self, config: Option<&str>) -> String {
        let file = IndexFile {
            version: INDEX_FORMAT_VERSION,
            config: config.map(str::to_string),
            vocab_hash: self.vocab.hash(),
            vocabulary: serde_json::from_str(&self.vocab.to_json()).expect("vocabulary json"),
            mode: self.mode,
            programs: (0..self.len())
                .map(|i| IndexEntry {
                    id: self.ids[i].clone(),
                    label: self.labels[i].clone(),
                    entries: self.vectors[i].entries.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("index serializes")
    }

    /// Reads an index file, returning it with its recorded configuration id.
    pub fn from_json(text: &str) -> Result<(CorpusIndex, Option<String>), SimError> {
        let fmt_err = |m: String| SimError::Format(m);
        let file: IndexFile = serde_json::from_str(text).map_err(|e| fmt_err(e.to_string()))?;
        if file.version != INDEX_FORMAT_VERSION {
            return Err(fmt_err(format!("unsupported version {}", file.version)));
        }
        let vocab = Vocabulary::from_json(&file.vocabulary.to_string()).map_err(|e| fmt_err(e.to_string()))?;
        if vocab.hash() != file.vocab_hash {
            return Err(fmt_err("vocabulary hash mismatch".into()));
        }
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut vectors = Vec::new();
        for p in file.programs {
            let v = SparseVector::new(vocab.len(), p.entries, file.mode).map_err(|e| fmt_err(format!("{}: {e}", p.id)))?;
            ids.push(p.id);
            labels.push(p.label);
            vectors.push(v);
        }
        if ids.is_empty() {
            return Err(SimError::EmptyCorpus);
        }
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(fmt_err("program ids must be sorted and unique".into()));
        }
        Ok((CorpusIndex::assemble(vocab, file.mode, ids, labels, vectors), file.config))
    }
}
