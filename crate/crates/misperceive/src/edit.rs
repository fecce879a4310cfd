//! Edit records and the canonical body-rewriting primitives.
//!
//! Every change the engine makes is recorded as an [`Edit`]; replaying a log
//! against the original thread reproduces the perturbed thread byte for
//! byte. The detector emits edits of the same shape, so one replay routine
//! verifies both the attacker's ground truth and the defender's recovery.
//!
//! The primitives here ([`substitute_token`], [`delete_token`],
//! [`insert_token_at`]) are the only code paths that touch body bytes.
//! Replay must render identically to the original application, so both go
//! through these functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, Metrics, Thread, Token, TokenKind};

/// Where an edit landed: the root document or one of its replies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Root,
    Comment(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditOp {
    Substitute,
    Delete,
    Insert,
    HashtagSwap,
    MetricScale,
}

/// Payload of an edit: token text for body edits, counters for metric edits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EditValue {
    Text(String),
    Metrics(Metrics),
}

impl EditValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            EditValue::Text(t) => Some(t),
            EditValue::Metrics(_) => None,
        }
    }
}

/// One recorded change. `token_index` addresses the tokenization of the
/// document *at the moment the edit applies*, so a log replays strictly in
/// order. A `HashtagSwap` without a token index rewrites the hashtags list
/// rather than a body token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edit {
    pub op: EditOp,
    pub location: Location,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original: Option<EditValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement: Option<EditValue>,
}

/// Ordered list of edits; applying them in order transforms the original
/// document into the perturbed one.
pub type EditLog = Vec<Edit>;

// ---------------------------------------------------------------------------
// Canonical body rewriting
// ---------------------------------------------------------------------------

/// Canonical rendering of a body: tokens joined by single spaces with
/// punctuation attached to whatever precedes it.
///
/// Every edit primitive canonicalizes its result, which makes the rendered
/// body a pure function of its token sequence. That property is what lets
/// a *recovered* edit script replay byte-for-byte: whitespace placement
/// cannot depend on which of several token-equivalent edit histories
/// produced the document. Bodies no rule touches are never re-rendered.
pub fn canonical_body(body: &str) -> String {
    let mut out = String::new();
    for t in tokenize(body) {
        if t.kind != TokenKind::Punctuation && !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

/// Replace token `idx` with `replacement` and re-render canonically.
pub fn substitute_token(body: &str, tokens: &[Token], idx: usize, replacement: &str) -> String {
    let t = &tokens[idx];
    canonical_body(&format!(
        "{}{}{}",
        &body[..t.byte_start],
        replacement,
        &body[t.byte_end..]
    ))
}

/// Remove token `idx` and re-render canonically, so the surrounding
/// whitespace joins to a single space.
pub fn delete_token(body: &str, tokens: &[Token], idx: usize) -> String {
    let t = &tokens[idx];
    canonical_body(&format!("{} {}", &body[..t.byte_start], &body[t.byte_end..]))
}

/// Insert `text` so it becomes token number `idx` of the result, then
/// re-render canonically. `idx` may equal `tokens.len()` to append after
/// the last token.
pub fn insert_token_at(body: &str, tokens: &[Token], idx: usize, text: &str) -> String {
    if tokens.is_empty() {
        return canonical_body(&format!("{body} {text}"));
    }
    let spliced = if idx == 0 {
        let pos = tokens[0].byte_start;
        format!("{}{} {}", &body[..pos], text, &body[pos..])
    } else {
        let pos = tokens[idx.min(tokens.len()) - 1].byte_end;
        format!("{} {}{}", &body[..pos], text, &body[pos..])
    };
    canonical_body(&spliced)
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("edit {index}: no document at {location:?}")]
    MissingDocument { index: usize, location: Location },
    #[error("edit {index}: token index {token_index} out of range (document has {len} tokens)")]
    TokenOutOfRange { index: usize, token_index: usize, len: usize },
    #[error("edit {index}: expected token \"{expected}\" but found \"{found}\"")]
    TokenMismatch { index: usize, expected: String, found: String },
    #[error("edit {index}: hashtag \"{tag}\" not present in hashtags list")]
    HashtagMissing { index: usize, tag: String },
    #[error("edit {index}: recorded original metrics do not match the document")]
    MetricsMismatch { index: usize },
    #[error("edit {index}: malformed edit record: {reason}")]
    Malformed { index: usize, reason: String },
}

fn doc_mut<'a>(
    thread: &'a mut Thread,
    location: &Location,
    index: usize,
) -> Result<&'a mut crate::corpus::TweetDocument, ReplayError> {
    match location {
        Location::Root => Ok(&mut thread.root),
        Location::Comment(id) => thread
            .comments
            .iter_mut()
            .find(|c| c.id == *id)
            .ok_or(ReplayError::MissingDocument { index, location: location.clone() }),
    }
}

fn expect_text<'a>(
    value: &'a Option<EditValue>,
    index: usize,
    field: &str,
) -> Result<&'a str, ReplayError> {
    value
        .as_ref()
        .and_then(EditValue::as_text)
        .ok_or_else(|| ReplayError::Malformed { index, reason: format!("{field} must be text") })
}

/// Apply a recorded edit log to a thread, verifying at every step that the
/// document still looks the way the log remembers it. Returns the edited
/// thread; any disagreement between log and document is an error.
pub fn replay_edits(thread: &Thread, edits: &[Edit]) -> Result<Thread, ReplayError> {
    let mut current = thread.clone();
    for (index, edit) in edits.iter().enumerate() {
        let doc = doc_mut(&mut current, &edit.location, index)?;
        match edit.op {
            EditOp::Substitute => {
                let idx = edit.token_index.ok_or(ReplayError::Malformed {
                    index,
                    reason: "substitute requires token_index".into(),
                })?;
                let tokens = tokenize(&doc.body);
                if idx >= tokens.len() {
                    return Err(ReplayError::TokenOutOfRange {
                        index,
                        token_index: idx,
                        len: tokens.len(),
                    });
                }
                let expected = expect_text(&edit.original, index, "original")?;
                if tokens[idx].text != expected {
                    return Err(ReplayError::TokenMismatch {
                        index,
                        expected: expected.to_string(),
                        found: tokens[idx].text.clone(),
                    });
                }
                let replacement = expect_text(&edit.replacement, index, "replacement")?;
                doc.body = substitute_token(&doc.body, &tokens, idx, replacement);
            }
            EditOp::Delete => {
                let idx = edit.token_index.ok_or(ReplayError::Malformed {
                    index,
                    reason: "delete requires token_index".into(),
                })?;
                let tokens = tokenize(&doc.body);
                if idx >= tokens.len() {
                    return Err(ReplayError::TokenOutOfRange {
                        index,
                        token_index: idx,
                        len: tokens.len(),
                    });
                }
                let expected = expect_text(&edit.original, index, "original")?;
                if tokens[idx].text != expected {
                    return Err(ReplayError::TokenMismatch {
                        index,
                        expected: expected.to_string(),
                        found: tokens[idx].text.clone(),
                    });
                }
                doc.body = delete_token(&doc.body, &tokens, idx);
            }
            EditOp::Insert => {
                let idx = edit.token_index.ok_or(ReplayError::Malformed {
                    index,
                    reason: "insert requires token_index".into(),
                })?;
                let tokens = tokenize(&doc.body);
                if idx > tokens.len() {
                    return Err(ReplayError::TokenOutOfRange {
                        index,
                        token_index: idx,
                        len: tokens.len(),
                    });
                }
                let text = expect_text(&edit.replacement, index, "replacement")?;
                doc.body = insert_token_at(&doc.body, &tokens, idx, text);
            }
            EditOp::HashtagSwap => {
                let original = expect_text(&edit.original, index, "original")?;
                let replacement = expect_text(&edit.replacement, index, "replacement")?;
                match edit.token_index {
                    Some(idx) => {
                        let tokens = tokenize(&doc.body);
                        if idx >= tokens.len() {
                            return Err(ReplayError::TokenOutOfRange {
                                index,
                                token_index: idx,
                                len: tokens.len(),
                            });
                        }
                        if tokens[idx].text != original {
                            return Err(ReplayError::TokenMismatch {
                                index,
                                expected: original.to_string(),
                                found: tokens[idx].text.clone(),
                            });
                        }
                        doc.body = substitute_token(&doc.body, &tokens, idx, replacement);
                    }
                    None => {
                        let slot = doc
                            .hashtags
                            .iter_mut()
                            .find(|t| t.as_str() == original)
                            .ok_or_else(|| ReplayError::HashtagMissing {
                                index,
                                tag: original.to_string(),
                            })?;
                        *slot = replacement.to_string();
                    }
                }
            }
            EditOp::MetricScale => {
                let (orig, repl) = match (&edit.original, &edit.replacement) {
                    (Some(EditValue::Metrics(o)), Some(EditValue::Metrics(r))) => (*o, *r),
                    _ => {
                        return Err(ReplayError::Malformed {
                            index,
                            reason: "metric_scale requires metrics on both sides".into(),
                        })
                    }
                };
                if doc.metrics != orig {
                    return Err(ReplayError::MetricsMismatch { index });
                }
                doc.metrics = repl;
            }
        }
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn substitute_preserves_surroundings() {
        let body = "Many studies agree.";
        let tokens = tokenize(body);
        assert_eq!(substitute_token(body, &tokens, 0, "No"), "No studies agree.");
    }

    #[test]
    fn delete_joins_interior_whitespace() {
        let body = "do not cause";
        let tokens = tokenize(body);
        assert_eq!(delete_token(body, &tokens, 1), "do cause");
    }

    #[test]
    fn delete_at_boundaries_leaves_no_padding() {
        let body = "not good";
        let tokens = tokenize(body);
        assert_eq!(delete_token(body, &tokens, 0), "good");
        let body = "good not";
        let tokens = tokenize(body);
        assert_eq!(delete_token(body, &tokens, 1), "good");
    }

    #[test]
    fn delete_flush_against_punctuation() {
        let body = "(not)";
        let tokens = tokenize(body);
        assert_eq!(delete_token(body, &tokens, 1), "()");
    }

    #[test]
    fn insert_anchors_to_the_previous_token() {
        let body = "they work";
        let tokens = tokenize(body);
        assert_eq!(insert_token_at(body, &tokens, 1, "don't"), "they don't work");

        let body = "a, b";
        let tokens = tokenize(body);
        // the insert lands right after "a"; the comma keeps its glue
        assert_eq!(insert_token_at(body, &tokens, 1, "x"), "a x, b");
    }

    #[test]
    fn equivalent_insert_positions_render_identically() {
        // inserting "not" before or after an identical token is the same
        // token sequence; the bytes must agree so replay cannot diverge
        let body = "not! no";
        let tokens = tokenize(body);
        assert_eq!(
            insert_token_at(body, &tokens, 0, "not"),
            insert_token_at(body, &tokens, 1, "not"),
        );
    }

    #[test]
    fn insert_after_last_token() {
        let body = "they work";
        let tokens = tokenize(body);
        assert_eq!(insert_token_at(body, &tokens, 2, "hard"), "they work hard");
    }

    #[test]
    fn canonical_body_is_tokenize_stable() {
        for body in ["a, b!", "don' t", "x #antivax. @who 12 34", "  spaced   out  "] {
            let once = canonical_body(body);
            let twice = canonical_body(&once);
            assert_eq!(once, twice, "canonicalization must be idempotent for {body:?}");
            let original: Vec<_> = tokenize(body).iter().map(|t| t.text.clone()).collect();
            let rendered: Vec<_> = tokenize(&once).iter().map(|t| t.text.clone()).collect();
            assert_eq!(original, rendered, "token stream must survive rendering of {body:?}");
        }
    }

    #[test]
    fn insert_into_empty_body() {
        assert_eq!(insert_token_at("", &[], 0, "hi"), "hi");
    }

    #[test]
    fn replay_detects_token_mismatch() {
        let docs = crate::assets::bundled_corpus();
        let thread = crate::corpus::thread_for(&docs, "study-root").unwrap();
        let bad = Edit {
            op: EditOp::Substitute,
            location: Location::Root,
            token_index: Some(0),
            original: Some(EditValue::Text("Nope".into())),
            replacement: Some(EditValue::Text("No".into())),
        };
        assert!(matches!(
            replay_edits(&thread, &[bad]),
            Err(ReplayError::TokenMismatch { .. })
        ));
    }

    proptest::proptest! {
        /// Rendering is a pure function of the token sequence: the token
        /// stream survives canonicalization and rendering twice changes
        /// nothing.
        #[test]
        fn canonical_rendering_preserves_tokens(body in "\\PC{0,50}") {
            let once = canonical_body(&body);
            proptest::prop_assert_eq!(&canonical_body(&once), &once);
            let original: Vec<(String, TokenKind)> =
                tokenize(&body).iter().map(|t| (t.text.clone(), t.kind)).collect();
            let rendered: Vec<(String, TokenKind)> =
                tokenize(&once).iter().map(|t| (t.text.clone(), t.kind)).collect();
            proptest::prop_assert_eq!(original, rendered);
        }
    }

    #[test]
    fn replay_detects_missing_comment() {
        let docs = crate::assets::bundled_corpus();
        let thread = crate::corpus::thread_for(&docs, "feed-voice-1").unwrap();
        let bad = Edit {
            op: EditOp::Delete,
            location: Location::Comment("ghost".into()),
            token_index: Some(0),
            original: Some(EditValue::Text("They".into())),
            replacement: None,
        };
        assert!(matches!(
            replay_edits(&thread, &[bad]),
            Err(ReplayError::MissingDocument { .. })
        ));
    }
}
