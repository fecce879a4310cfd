//! Ready-made response suggestion: binary keyword-existence features and
//! jittered Euclidean nearest-neighbor selection.
//!
//! A text maps to a 0/1 vector with one dimension per lexicon keyword
//! (pro keywords first, then anti, each in file order). A keyword matches
//! when its tokens occur as a contiguous, case-folded token subsequence of
//! the text. The candidate whose vector is nearest the input wins; a small
//! seeded jitter `u ~ U[0, ε)` added per candidate keeps near-ties from
//! always resolving the same way while staying reproducible for a fixed
//! seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::tokenize;

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("candidates file is not valid JSON Lines: line {line}: {message}")]
    ParseCandidates { line: usize, message: String },
    #[error("lexicons file is not valid JSON: {0}")]
    ParseLexicons(String),
    #[error("candidate {index} has empty text")]
    EmptyCandidate { index: usize },
    #[error("keyword lexicons must not be empty")]
    EmptyLexicons,
    #[error("candidate list must not be empty")]
    NoCandidates,
    #[error("feature vectors have different lengths ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("jitter amplitude must be a finite value ≥ 0, got {0}")]
    InvalidEpsilon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stance {
    Pro,
    Anti,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rhetoric {
    Authority,
    SocialProof,
    Labeling,
}

/// One ready-made reply with its stance and persuasion trope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseCandidate {
    pub text: String,
    pub stance: Stance,
    pub rhetoric: Rhetoric,
}

/// Keyword lists for each sentiment; dimension order is pro then anti.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeywordLexicons {
    pub pro: Vec<String>,
    pub anti: Vec<String>,
}

impl KeywordLexicons {
    pub fn from_json(text: &str) -> Result<Self, RecommendError> {
        let lex: KeywordLexicons =
            serde_json::from_str(text).map_err(|e| RecommendError::ParseLexicons(e.to_string()))?;
        if lex.pro.is_empty() || lex.anti.is_empty() {
            return Err(RecommendError::EmptyLexicons);
        }
        Ok(lex)
    }

    pub fn dimension(&self) -> usize {
        self.pro.len() + self.anti.len()
    }

    fn keywords(&self) -> impl Iterator<Item = &String> {
        self.pro.iter().chain(self.anti.iter())
    }
}

/// Parse a JSON Lines candidates file.
pub fn parse_candidates(text: &str) -> Result<Vec<ResponseCandidate>, RecommendError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cand: ResponseCandidate = serde_json::from_str(line).map_err(|e| {
            RecommendError::ParseCandidates { line: i + 1, message: e.to_string() }
        })?;
        if cand.text.trim().is_empty() {
            return Err(RecommendError::EmptyCandidate { index: out.len() });
        }
        out.push(cand);
    }
    Ok(out)
}

/// Binary keyword-existence features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector(pub Vec<u8>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn folded_tokens(text: &str) -> Vec<String> {
    tokenize(text).iter().map(|t| t.text.to_lowercase()).collect()
}

fn contains_subsequence(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

/// Dimension i is 1 iff keyword i occurs in the case-folded text as a
/// contiguous token subsequence.
pub fn extract_features(
    text: &str,
    lexicons: &KeywordLexicons,
) -> Result<FeatureVector, RecommendError> {
    if lexicons.pro.is_empty() || lexicons.anti.is_empty() {
        return Err(RecommendError::EmptyLexicons);
    }
    let tokens = folded_tokens(text);
    let dims = lexicons
        .keywords()
        .map(|kw| u8::from(contains_subsequence(&tokens, &folded_tokens(kw))))
        .collect();
    Ok(FeatureVector(dims))
}

/// Euclidean distance between two equal-length vectors.
pub fn distance(a: &FeatureVector, b: &FeatureVector) -> Result<f64, RecommendError> {
    if a.len() != b.len() {
        return Err(RecommendError::LengthMismatch { a: a.len(), b: b.len() });
    }
    let sum: f64 = a
        .0
        .iter()
        .zip(&b.0)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    Ok(sum.sqrt())
}

/// Per-candidate audit row: raw distance, jitter drawn, and final score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub index: usize,
    pub distance: f64,
    pub jitter: f64,
    pub score: f64,
}

/// The selected candidate plus the full score table.
#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub chosen: usize,
    pub scores: Vec<CandidateScore>,
}

/// Score every candidate against the input and return the argmin.
///
/// `score_i = distance(features(input), features(candidate_i)) + u_i` with
/// `u_i` drawn uniformly from `[0, ε)` by a seeded generator in candidate
/// order. With ε = 0 ties fall to the earliest candidate.
pub fn recommend(
    input: &str,
    candidates: &[ResponseCandidate],
    lexicons: &KeywordLexicons,
    epsilon: f64,
    seed: u64,
) -> Result<Recommendation, RecommendError> {
    if candidates.is_empty() {
        return Err(RecommendError::NoCandidates);
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(RecommendError::InvalidEpsilon(epsilon));
    }
    let input_features = extract_features(input, lexicons)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = Vec::with_capacity(candidates.len());
    for (index, cand) in candidates.iter().enumerate() {
        let d = distance(&input_features, &extract_features(&cand.text, lexicons)?)?;
        let jitter = if epsilon > 0.0 { rng.random_range(0.0..epsilon) } else { 0.0 };
        scores.push(CandidateScore { index, distance: d, jitter, score: d + jitter });
    }
    let chosen = scores
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.score.total_cmp(&b.score))
        .map(|(i, _)| i)
        .expect("candidates verified non-empty");
    Ok(Recommendation { chosen, scores })
}
