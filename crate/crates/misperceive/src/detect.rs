//! The defense side: compare an authentic document against a delivered
//! rendering, recover the edit script, and score misperception signatures.
//!
//! [`align`] recovers a minimal token-level edit script by dynamic
//! programming over suffix edit distances. Among minimal scripts it
//! prefers substitutions over delete+insert pairs and places edits as far
//! left as possible, so recovery is deterministic. Metric inflation is
//! recovered by searching for a single rational factor that explains all
//! three counters, and hashtag swaps by comparing the hashtag lists
//! positionally.
//!
//! The recovered script reuses the [`Edit`] shape the engine logs, so the
//! same replay routine that verifies an attack log also verifies a
//! detection: replaying `report.edits` onto the authentic document must
//! reproduce the delivered rendering byte for byte.

use std::collections::{BTreeMap, BTreeSet};

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, Metrics, Token, TweetDocument};
use crate::edit::{Edit, EditOp, EditValue, Location, ReplayError};
use crate::rules::ScaleFactor;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("lexicon file is not valid JSON: {0}")]
    Parse(String),
    #[error("valence pair {a} ↔ {b} conflicts with {a} ↔ {c}")]
    ConflictingPair { a: String, b: String, c: String },
}

/// Token pairs with opposite valence plus negator tokens. Pairs are stored
/// symmetrically: if `wrong → right` is listed, `right → wrong` holds too.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValenceLexicon {
    pairs: BTreeMap<String, String>,
    negators: BTreeSet<String>,
}

#[derive(Serialize, Deserialize)]
struct StoredLexicon {
    pairs: BTreeMap<String, String>,
    negators: Vec<String>,
}

impl ValenceLexicon {
    pub fn new(
        pairs: impl IntoIterator<Item = (String, String)>,
        negators: impl IntoIterator<Item = String>,
    ) -> Result<Self, DetectError> {
        let mut table: BTreeMap<String, String> = BTreeMap::new();
        for (a, b) in pairs {
            let a = a.to_lowercase();
            let b = b.to_lowercase();
            for (x, y) in [(a.clone(), b.clone()), (b, a)] {
                match table.get(&x) {
                    Some(existing) if *existing != y => {
                        return Err(DetectError::ConflictingPair {
                            a: x,
                            b: y,
                            c: existing.clone(),
                        });
                    }
                    _ => {
                        table.insert(x, y);
                    }
                }
            }
        }
        Ok(Self {
            pairs: table,
            negators: negators.into_iter().map(|n| n.to_lowercase()).collect(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, DetectError> {
        let stored: StoredLexicon =
            serde_json::from_str(text).map_err(|e| DetectError::Parse(e.to_string()))?;
        Self::new(stored.pairs, stored.negators)
    }

    pub fn opposite(&self, token: &str) -> Option<&str> {
        self.pairs.get(&token.to_lowercase()).map(String::as_str)
    }

    pub fn is_opposite_pair(&self, a: &str, b: &str) -> bool {
        self.opposite(a).is_some_and(|opp| opp == b.to_lowercase())
    }

    pub fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(&token.to_lowercase())
    }
}

/// One hashtag that differs between the authentic and delivered lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashtagFlip {
    pub original: String,
    pub delivered: String,
}

/// What the detector recovered, plus a severity in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub edits: Vec<Edit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_factor: Option<ScaleFactor>,
    pub hashtag_flips: Vec<HashtagFlip>,
    pub valence_inversion: bool,
    pub severity: f64,
}

// ---------------------------------------------------------------------------
// Alignment
// ---------------------------------------------------------------------------

/// Minimal-cost token edit script (unit costs for substitute, delete,
/// insert) transforming `original` into `delivered`.
///
/// Token indices address the sequence as it evolves during sequential
/// replay, matching the engine's edit-log convention.
pub fn align(original: &[Token], delivered: &[Token]) -> Vec<Edit> {
    let m = original.len();
    let n = delivered.len();

    // cost[i][j] = edit distance between original[i..] and delivered[j..]
    let mut cost = vec![vec![0usize; n + 1]; m + 1];
    for (i, row) in cost.iter_mut().enumerate() {
        row[n] = m - i;
    }
    for (j, cell) in cost[m].iter_mut().enumerate() {
        *cell = n - j;
    }
    for i in (0..m).rev() {
        for j in (0..n).rev() {
            cost[i][j] = if original[i].text == delivered[j].text {
                cost[i + 1][j + 1]
            } else {
                1 + cost[i + 1][j + 1].min(cost[i + 1][j]).min(cost[i][j + 1])
            };
        }
    }

    // walk forward, taking the leftmost minimal edit at every step and
    // preferring substitutions over delete+insert pairs
    let mut script = Vec::new();
    let (mut i, mut j, mut pos) = (0usize, 0usize, 0usize);
    while i < m || j < n {
        let c = cost[i][j];
        if i < m && j < n && original[i].text != delivered[j].text && cost[i + 1][j + 1] + 1 == c {
            script.push(Edit {
                op: EditOp::Substitute,
                location: Location::Root,
                token_index: Some(pos),
                original: Some(EditValue::Text(original[i].text.clone())),
                replacement: Some(EditValue::Text(delivered[j].text.clone())),
            });
            i += 1;
            j += 1;
            pos += 1;
        } else if i < m && cost[i + 1][j] + 1 == c {
            script.push(Edit {
                op: EditOp::Delete,
                location: Location::Root,
                token_index: Some(pos),
                original: Some(EditValue::Text(original[i].text.clone())),
                replacement: None,
            });
            i += 1;
        } else if j < n && cost[i][j + 1] + 1 == c {
            script.push(Edit {
                op: EditOp::Insert,
                location: Location::Root,
                token_index: Some(pos),
                original: None,
                replacement: Some(EditValue::Text(delivered[j].text.clone())),
            });
            j += 1;
            pos += 1;
        } else {
            debug_assert!(i < m && j < n && original[i].text == delivered[j].text);
            i += 1;
            j += 1;
            pos += 1;
        }
    }
    script
}

// ---------------------------------------------------------------------------
// Metric factor recovery
// ---------------------------------------------------------------------------

/// Search for a single rational factor `p/q` (p, q ≤ 64) such that every
/// delivered counter equals the rounded scaled original. Smaller
/// denominators win, and within a denominator inflating factors (p > q)
/// are preferred. `None` when the counters are unchanged or inconsistent.
pub fn estimate_metric_factor(original: &Metrics, delivered: &Metrics) -> Option<ScaleFactor> {
    if original == delivered {
        return None;
    }
    const BOUND: u64 = 64;
    for q in 1..=BOUND {
        let candidates = (q + 1..=BOUND).chain(1..=q);
        for p in candidates {
            if p.gcd(&q) != 1 {
                continue;
            }
            let factor = ScaleFactor::new(p, q).expect("p, q ≥ 1");
            let fits = |orig: u64, got: u64| factor.scale_count(orig) == Some(got);
            if fits(original.replies, delivered.replies)
                && fits(original.retweets, delivered.retweets)
                && fits(original.likes, delivered.likes)
            {
                return Some(factor);
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// Assemble the full report from the recovered pieces.
///
/// `metric_change` carries the (original, delivered) counters when they
/// differ, so the report's edit list stays replayable even if no uniform
/// factor explains the change. Severity is a fixed weighting: a quarter
/// each for valence inversion, a recovered metric factor, any hashtag
/// flip, and edit volume (`|edits|/4`, capped).
pub fn classify(
    script: Vec<Edit>,
    hashtag_flips: Vec<HashtagFlip>,
    metric_change: Option<(Metrics, Metrics)>,
    metric_factor: Option<ScaleFactor>,
    lexicon: &ValenceLexicon,
) -> DetectionReport {
    let mut edits = script;
    for flip in &hashtag_flips {
        edits.push(Edit {
            op: EditOp::HashtagSwap,
            location: Location::Root,
            token_index: None,
            original: Some(EditValue::Text(flip.original.clone())),
            replacement: Some(EditValue::Text(flip.delivered.clone())),
        });
    }
    if let Some((orig, got)) = metric_change {
        edits.push(Edit {
            op: EditOp::MetricScale,
            location: Location::Root,
            token_index: None,
            original: Some(EditValue::Metrics(orig)),
            replacement: Some(EditValue::Metrics(got)),
        });
    }

    let valence_inversion = edits.iter().any(|e| match e.op {
        EditOp::Substitute | EditOp::HashtagSwap => {
            match (
                e.original.as_ref().and_then(EditValue::as_text),
                e.replacement.as_ref().and_then(EditValue::as_text),
            ) {
                (Some(a), Some(b)) => lexicon.is_opposite_pair(a, b),
                _ => false,
            }
        }
        EditOp::Insert => e
            .replacement
            .as_ref()
            .and_then(EditValue::as_text)
            .is_some_and(|t| lexicon.is_negator(t)),
        EditOp::Delete => e
            .original
            .as_ref()
            .and_then(EditValue::as_text)
            .is_some_and(|t| lexicon.is_negator(t)),
        EditOp::MetricScale => false,
    });

    let volume = (edits.len() as f64 / 4.0).min(1.0);
    let severity = (0.25 * f64::from(valence_inversion as u8)
        + 0.25 * f64::from(metric_factor.is_some() as u8)
        + 0.25 * f64::from(!hashtag_flips.is_empty() as u8)
        + 0.25 * volume)
        .min(1.0);

    DetectionReport { edits, metric_factor, hashtag_flips, valence_inversion, severity }
}

/// Full comparison of one authentic document against its delivered
/// rendering.
pub fn detect(
    original: &TweetDocument,
    delivered: &TweetDocument,
    lexicon: &ValenceLexicon,
) -> DetectionReport {
    let script = align(&tokenize(&original.body), &tokenize(&delivered.body));
    let hashtag_flips: Vec<HashtagFlip> = original
        .hashtags
        .iter()
        .zip(&delivered.hashtags)
        .filter(|(a, b)| a != b)
        .map(|(a, b)| HashtagFlip { original: a.clone(), delivered: b.clone() })
        .collect();
    let metric_change = (original.metrics != delivered.metrics)
        .then_some((original.metrics, delivered.metrics));
    let metric_factor = estimate_metric_factor(&original.metrics, &delivered.metrics);
    classify(script, hashtag_flips, metric_change, metric_factor, lexicon)
}

/// Replay a recovered report onto the authentic document. If detection was
/// faithful this reproduces the delivered rendering exactly.
pub fn replay_report(
    original: &TweetDocument,
    report: &DetectionReport,
) -> Result<TweetDocument, ReplayError> {
    let thread = crate::corpus::Thread::lone(original.clone());
    crate::edit::replay_edits(&thread, &report.edits).map(|t| t.root)
}
