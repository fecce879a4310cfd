//! Order-1 transition model over corpus tokens, used to pick replacement
//! tokens from context.
//!
//! Training counts bigrams of consecutive counted tokens (words, hashtags,
//! numbers) within each body, case-folded. With add-k smoothing the
//! transition probability is
//!
//! ```text
//! P(next | prev) = (count(prev, next) + k) / (total(prev) + k·|vocab|)
//! ```
//!
//! and replacement selection is a deterministic argmax over the candidate
//! list, ties broken by lexicographic token order. The `seed` parameter is
//! accepted for interface stability but unused: reproducibility matters
//! more here than variety.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, TweetDocument};
use crate::perturb::{is_counted, ReplacementSource};

#[derive(Debug, Error)]
pub enum MarkovError {
    #[error("training corpus contains no countable tokens")]
    EmptyVocabulary,
    #[error("smoothing must be ≥ 0, got {0}")]
    NegativeSmoothing(f64),
    #[error("candidate list must not be empty")]
    NoCandidates,
    #[error("model file is not valid JSON: {0}")]
    Parse(String),
    #[error("model order must be 1, got {0}")]
    UnsupportedOrder(u32),
}

/// Bigram counts over a case-folded vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    smoothing: f64,
    vocab: BTreeSet<String>,
    counts: BTreeMap<String, BTreeMap<String, u64>>,
}

/// Count bigrams over every document body in the corpus. Deterministic,
/// and indifferent to document order.
pub fn train(corpus: &[TweetDocument], smoothing: f64) -> Result<MarkovModel, MarkovError> {
    if smoothing < 0.0 || !smoothing.is_finite() {
        return Err(MarkovError::NegativeSmoothing(smoothing));
    }
    let mut vocab = BTreeSet::new();
    let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for doc in corpus {
        let tokens: Vec<String> = tokenize(&doc.body)
            .iter()
            .filter(|t| is_counted(t.kind))
            .map(|t| t.text.to_lowercase())
            .collect();
        for t in &tokens {
            vocab.insert(t.clone());
        }
        for pair in tokens.windows(2) {
            *counts
                .entry(pair[0].clone())
                .or_default()
                .entry(pair[1].clone())
                .or_insert(0) += 1;
        }
    }
    if vocab.is_empty() {
        return Err(MarkovError::EmptyVocabulary);
    }
    Ok(MarkovModel { smoothing, vocab, counts })
}

impl MarkovModel {
    pub fn order(&self) -> u32 {
        1
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    pub fn counts(&self) -> &BTreeMap<String, BTreeMap<String, u64>> {
        &self.counts
    }

    fn count(&self, prev: &str, next: &str) -> u64 {
        self.counts.get(prev).and_then(|m| m.get(next)).copied().unwrap_or(0)
    }

    fn total(&self, prev: &str) -> u64 {
        self.counts.get(prev).map(|m| m.values().sum()).unwrap_or(0)
    }

    /// `(count(prev,next) + k) / (total(prev) + k·|vocab|)`, or 0 when the
    /// denominator vanishes (unseen `prev` with k = 0).
    pub fn transition_prob(&self, prev: &str, next: &str) -> f64 {
        let k = self.smoothing;
        let denom = self.total(prev) as f64 + k * self.vocab.len() as f64;
        if denom == 0.0 {
            return 0.0;
        }
        (self.count(prev, next) as f64 + k) / denom
    }

    /// Argmax of `transition_prob(prev, ·)` over the candidates; ties go to
    /// the lexicographically smallest token. Fully deterministic.
    pub fn choose_replacement(
        &self,
        prev: &str,
        candidates: &[String],
        _seed: u64,
    ) -> Result<String, MarkovError> {
        let mut best: Option<(f64, &str)> = None;
        for cand in candidates {
            let p = self.transition_prob(prev, cand);
            let better = match best {
                None => true,
                Some((bp, bt)) => p > bp || (p == bp && cand.as_str() < bt),
            };
            if better {
                best = Some((p, cand));
            }
        }
        best.map(|(_, t)| t.to_string()).ok_or(MarkovError::NoCandidates)
    }

    pub fn to_json(&self) -> String {
        // isolated vocabulary entries persist as empty transition maps so
        // a round trip keeps |vocab| (and with it smoothed probabilities)
        let mut counts: BTreeMap<&str, &BTreeMap<String, u64>> =
            self.counts.iter().map(|(k, v)| (k.as_str(), v)).collect();
        let empty = BTreeMap::new();
        for token in &self.vocab {
            counts.entry(token.as_str()).or_insert(&empty);
        }
        let stored = StoredModel {
            order: 1,
            smoothing: self.smoothing,
            counts: counts
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        };
        serde_json::to_string_pretty(&stored).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, MarkovError> {
        let stored: StoredModel =
            serde_json::from_str(text).map_err(|e| MarkovError::Parse(e.to_string()))?;
        if stored.order != 1 {
            return Err(MarkovError::UnsupportedOrder(stored.order));
        }
        if stored.smoothing < 0.0 || !stored.smoothing.is_finite() {
            return Err(MarkovError::NegativeSmoothing(stored.smoothing));
        }
        let mut vocab = BTreeSet::new();
        let mut counts = BTreeMap::new();
        for (prev, nexts) in stored.counts {
            vocab.insert(prev.clone());
            for next in nexts.keys() {
                vocab.insert(next.clone());
            }
            if !nexts.is_empty() {
                counts.insert(prev, nexts);
            }
        }
        if vocab.is_empty() {
            return Err(MarkovError::EmptyVocabulary);
        }
        Ok(MarkovModel { smoothing: stored.smoothing, vocab, counts })
    }
}

#[derive(Serialize, Deserialize)]
struct StoredModel {
    order: u32,
    smoothing: f64,
    counts: BTreeMap<String, BTreeMap<String, u64>>,
}

/// Adapter that lets the perturbation engine pull replacements from a
/// trained model. The candidate pool is fixed at construction.
pub struct MarkovReplacer {
    model: MarkovModel,
    candidates: Vec<String>,
}

impl MarkovReplacer {
    pub fn new(model: MarkovModel, candidates: Vec<String>) -> Result<Self, MarkovError> {
        if candidates.is_empty() {
            return Err(MarkovError::NoCandidates);
        }
        Ok(Self { model, candidates })
    }
}

impl ReplacementSource for MarkovReplacer {
    fn choose(&self, prev: Option<&str>, _target: &str) -> String {
        self.model
            .choose_replacement(prev.unwrap_or(""), &self.candidates, 0)
            .expect("candidates verified non-empty at construction")
    }
}
