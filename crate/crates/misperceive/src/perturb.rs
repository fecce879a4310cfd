//! The misperception engine: applies rule sets to a thread and records a
//! ground-truth edit log.
//!
//! Matching and rewriting are split: [`find_matches`] locates candidate
//! tokens under a rule's scope and predicate, [`apply_rule`] rewrites them
//! through the canonical primitives in [`crate::edit`] and records one
//! [`Edit`] per change. Rules in a set apply in list order, each against
//! the output of the previous one.
//!
//! Scope semantics differ by rule family:
//! - word rules (`word_swap`, `word_remove`, `word_insert`) scope over
//!   token occurrences: `all`, `first` (at most one, root before
//!   comments), or `comments_only`;
//! - `hashtag_swap` and `metric_scale` scope over documents: `all` is the
//!   root plus every comment, `first` the root alone, `comments_only` the
//!   comments.

use std::collections::HashMap;

use thiserror::Error;

use crate::corpus::{tokenize, Metrics, Thread, Token, TokenKind, TweetDocument};
use crate::edit::{
    delete_token, insert_token_at, substitute_token, Edit, EditLog, EditOp, EditValue, Location,
};
use crate::rules::{
    InsertSide, PerturbationRule, RuleAction, RuleSet, Scope, ScaleFactor, MARKOV_SENTINEL,
};

/// A token occurrence a rule may rewrite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Match {
    pub token_index: usize,
    pub token_text: String,
    pub location: Location,
}

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("rule uses \"{MARKOV_SENTINEL}\" but no replacement model is configured")]
    MarkovNotConfigured,
    #[error("metric scaling overflowed: {count} × {factor}")]
    MetricOverflow { count: u64, factor: ScaleFactor },
}

/// Source of data-driven replacement tokens (see [`crate::markov`]).
/// `prev` is the counted token immediately before the match, case-folded.
pub trait ReplacementSource {
    fn choose(&self, prev: Option<&str>, target: &str) -> String;
}

fn eq_under(case_sensitive: bool, a: &str, b: &str) -> bool {
    if case_sensitive {
        a == b
    } else {
        a.to_lowercase() == b.to_lowercase()
    }
}

/// Token kinds the engine matches against and the markov chain counts.
pub(crate) fn is_counted(kind: TokenKind) -> bool {
    matches!(kind, TokenKind::Word | TokenKind::Hashtag | TokenKind::Number)
}

fn predicate_holds(thread: &Thread, rule: &PerturbationRule) -> bool {
    let Some(p) = &rule.predicate else { return true };
    if let Some(tags) = &p.hashtag_any {
        if !tags.iter().any(|t| thread.root.hashtags.iter().any(|h| h == t)) {
            return false;
        }
    }
    if let Some(author) = &p.author_is {
        if thread.root.author != *author {
            return false;
        }
    }
    true
}

fn rule_target(rule: &PerturbationRule) -> Option<(&str, bool)> {
    match &rule.action {
        RuleAction::WordSwap { target, .. } | RuleAction::WordRemove { target } => {
            Some((target, false))
        }
        RuleAction::WordInsert { anchor, .. } => Some((anchor, false)),
        RuleAction::HashtagSwap { target, .. } => Some((target, true)),
        RuleAction::MetricScale { .. } => None,
    }
}

/// Find the occurrences of a rule's target token in a thread, in document
/// order (root first, then comments in corpus order), filtered by the
/// rule's scope and predicate. A failing predicate yields no matches; for
/// `word_insert` the target is the anchor token.
pub fn find_matches(thread: &Thread, rule: &PerturbationRule) -> Vec<Match> {
    if !predicate_holds(thread, rule) {
        return Vec::new();
    }
    let Some((target, hashtags_only)) = rule_target(rule) else {
        return Vec::new();
    };

    let mut matches = Vec::new();
    let mut scan = |body: &str, location: Location| {
        for (i, tok) in tokenize(body).iter().enumerate() {
            let kind_ok = if hashtags_only {
                tok.kind == TokenKind::Hashtag
            } else {
                is_counted(tok.kind)
            };
            if kind_ok && eq_under(rule.case_sensitive, &tok.text, target) {
                matches.push(Match {
                    token_index: i,
                    token_text: tok.text.clone(),
                    location: location.clone(),
                });
            }
        }
    };

    scan(&thread.root.body, Location::Root);
    for comment in &thread.comments {
        scan(&comment.body, Location::Comment(comment.id.clone()));
    }

    match rule.scope {
        Scope::All => matches,
        Scope::First => matches.into_iter().take(1).collect(),
        Scope::CommentsOnly => matches
            .into_iter()
            .filter(|m| matches!(m.location, Location::Comment(_)))
            .collect(),
    }
}

/// Documents a document-scoped rule (hashtag swap, metric scale) touches.
fn docs_in_scope(scope: Scope, comment_count: usize) -> Vec<Option<usize>> {
    // None addresses the root, Some(i) the i-th comment
    match scope {
        Scope::All => {
            let mut v = vec![None];
            v.extend((0..comment_count).map(Some));
            v
        }
        Scope::First => vec![None],
        Scope::CommentsOnly => (0..comment_count).map(Some).collect(),
    }
}

fn location_key(location: &Location) -> &str {
    match location {
        Location::Root => "",
        Location::Comment(id) => id,
    }
}

fn adapt_case(matched: &str, replacement: &str) -> String {
    let alpha: Vec<char> = matched.chars().filter(|c| c.is_alphabetic()).collect();
    if alpha.len() > 1 && alpha.iter().all(|c| c.is_uppercase()) {
        return replacement.to_uppercase();
    }
    if matched.chars().next().is_some_and(char::is_uppercase) {
        let mut chars = replacement.chars();
        return match chars.next() {
            Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
            None => String::new(),
        };
    }
    replacement.to_string()
}

/// Multiply each counter by the factor, rounding halves away from zero.
/// Factors are positive by construction; overflow is the only error.
pub fn scale_metrics(m: &Metrics, factor: ScaleFactor) -> Result<Metrics, PerturbError> {
    let scale = |count: u64| {
        factor
            .scale_count(count)
            .ok_or(PerturbError::MetricOverflow { count, factor })
    };
    Ok(Metrics {
        replies: scale(m.replies)?,
        retweets: scale(m.retweets)?,
        likes: scale(m.likes)?,
    })
}

struct DocAccess<'a> {
    thread: &'a mut Thread,
}

impl<'a> DocAccess<'a> {
    fn get(&mut self, location: &Location) -> &mut TweetDocument {
        match location {
            Location::Root => &mut self.thread.root,
            Location::Comment(id) => self
                .thread
                .comments
                .iter_mut()
                .find(|c| c.id == *id)
                .expect("match locations always name thread documents"),
        }
    }
}

/// The counted token preceding `idx`, case-folded, skipping over
/// punctuation and mentions. This is the conditioning context handed to a
/// replacement model.
fn preceding_counted(tokens: &[Token], idx: usize) -> Option<String> {
    tokens[..idx]
        .iter()
        .rev()
        .find(|t| is_counted(t.kind))
        .map(|t| t.text.to_lowercase())
}

/// Apply one rule to a thread. Returns the rewritten thread plus the edits
/// made, in application order; a rule that matches nothing returns the
/// thread unchanged with an empty log.
pub fn apply_rule(
    thread: &Thread,
    rule: &PerturbationRule,
) -> Result<(Thread, EditLog), PerturbError> {
    apply_rule_with(thread, rule, None)
}

/// [`apply_rule`] with an optional replacement model for
/// `"&markov"` substitutions.
pub fn apply_rule_with(
    thread: &Thread,
    rule: &PerturbationRule,
    replacer: Option<&dyn ReplacementSource>,
) -> Result<(Thread, EditLog), PerturbError> {
    let mut out = thread.clone();
    let mut edits: EditLog = Vec::new();

    match &rule.action {
        RuleAction::WordSwap { target, replacement } => {
            let wants_markov = replacement == MARKOV_SENTINEL;
            if wants_markov && replacer.is_none() {
                return Err(PerturbError::MarkovNotConfigured);
            }
            let matches = find_matches(thread, rule);
            let mut deltas: HashMap<String, isize> = HashMap::new();
            let mut access = DocAccess { thread: &mut out };
            for m in &matches {
                let delta = *deltas.entry(location_key(&m.location).to_string()).or_default();
                let idx = m.token_index.wrapping_add_signed(delta);
                let doc = access.get(&m.location);
                let tokens = tokenize(&doc.body);
                if idx >= tokens.len() || tokens[idx].text != m.token_text {
                    // an earlier edit rewrote or absorbed this occurrence
                    continue;
                }
                let chosen = if wants_markov {
                    let prev = preceding_counted(&tokens, idx);
                    replacer
                        .expect("checked above")
                        .choose(prev.as_deref(), target)
                } else {
                    replacement.clone()
                };
                let rendered = if rule.case_sensitive {
                    chosen
                } else {
                    adapt_case(&tokens[idx].text, &chosen)
                };
                if rendered == tokens[idx].text {
                    continue;
                }
                let before = tokens.len() as isize;
                doc.body = substitute_token(&doc.body, &tokens, idx, &rendered);
                let after = tokenize(&doc.body).len() as isize;
                *deltas.get_mut(location_key(&m.location)).unwrap() += after - before;
                edits.push(Edit {
                    op: EditOp::Substitute,
                    location: m.location.clone(),
                    token_index: Some(idx),
                    original: Some(EditValue::Text(m.token_text.clone())),
                    replacement: Some(EditValue::Text(rendered)),
                });
            }
        }
        RuleAction::WordRemove { .. } => {
            let matches = find_matches(thread, rule);
            let mut deltas: HashMap<String, isize> = HashMap::new();
            let mut access = DocAccess { thread: &mut out };
            for m in &matches {
                let delta = *deltas.entry(location_key(&m.location).to_string()).or_default();
                let idx = m.token_index.wrapping_add_signed(delta);
                let doc = access.get(&m.location);
                let tokens = tokenize(&doc.body);
                if idx >= tokens.len() || tokens[idx].text != m.token_text {
                    continue;
                }
                let before = tokens.len() as isize;
                doc.body = delete_token(&doc.body, &tokens, idx);
                let after = tokenize(&doc.body).len() as isize;
                *deltas.get_mut(location_key(&m.location)).unwrap() += after - before;
                edits.push(Edit {
                    op: EditOp::Delete,
                    location: m.location.clone(),
                    token_index: Some(idx),
                    original: Some(EditValue::Text(m.token_text.clone())),
                    replacement: None,
                });
            }
        }
        RuleAction::WordInsert { token, side, .. } => {
            // the inserted token goes beside the first scope-eligible anchor
            if let Some(anchor) = find_matches(thread, rule).first() {
                let mut access = DocAccess { thread: &mut out };
                let doc = access.get(&anchor.location);
                let tokens = tokenize(&doc.body);
                let insert_idx = match side {
                    InsertSide::Before => anchor.token_index,
                    InsertSide::After => anchor.token_index + 1,
                };
                doc.body = insert_token_at(&doc.body, &tokens, insert_idx, token);
                edits.push(Edit {
                    op: EditOp::Insert,
                    location: anchor.location.clone(),
                    token_index: Some(insert_idx),
                    original: None,
                    replacement: Some(EditValue::Text(token.clone())),
                });
            }
        }
        RuleAction::HashtagSwap { target, replacement } => {
            if !predicate_holds(thread, rule) {
                return Ok((out, edits));
            }
            let selected = docs_in_scope(rule.scope, thread.comments.len());
            for which in selected {
                let (doc, location) = match which {
                    None => (&mut out.root, Location::Root),
                    Some(i) => {
                        let id = out.comments[i].id.clone();
                        (&mut out.comments[i], Location::Comment(id))
                    }
                };
                // body occurrences first, then the hashtags list
                let mut delta: isize = 0;
                let body_hits: Vec<(usize, String)> = tokenize(&doc.body)
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| {
                        t.kind == TokenKind::Hashtag
                            && eq_under(rule.case_sensitive, &t.text, target)
                    })
                    .map(|(i, t)| (i, t.text.clone()))
                    .collect();
                for (orig_idx, text) in body_hits {
                    let idx = orig_idx.wrapping_add_signed(delta);
                    let tokens = tokenize(&doc.body);
                    if idx >= tokens.len() || tokens[idx].text != text {
                        continue;
                    }
                    let before = tokens.len() as isize;
                    doc.body = substitute_token(&doc.body, &tokens, idx, replacement);
                    delta += tokenize(&doc.body).len() as isize - before;
                    edits.push(Edit {
                        op: EditOp::HashtagSwap,
                        location: location.clone(),
                        token_index: Some(idx),
                        original: Some(EditValue::Text(text)),
                        replacement: Some(EditValue::Text(replacement.clone())),
                    });
                }
                for slot in doc.hashtags.iter_mut() {
                    if eq_under(rule.case_sensitive, slot, target) {
                        edits.push(Edit {
                            op: EditOp::HashtagSwap,
                            location: location.clone(),
                            token_index: None,
                            original: Some(EditValue::Text(slot.clone())),
                            replacement: Some(EditValue::Text(replacement.clone())),
                        });
                        *slot = replacement.clone();
                    }
                }
            }
        }
        RuleAction::MetricScale { factor } => {
            if !predicate_holds(thread, rule) {
                return Ok((out, edits));
            }
            let selected = docs_in_scope(rule.scope, thread.comments.len());
            for which in selected {
                let (doc, location) = match which {
                    None => (&mut out.root, Location::Root),
                    Some(i) => {
                        let id = out.comments[i].id.clone();
                        (&mut out.comments[i], Location::Comment(id))
                    }
                };
                let scaled = scale_metrics(&doc.metrics, *factor)?;
                if scaled != doc.metrics {
                    edits.push(Edit {
                        op: EditOp::MetricScale,
                        location,
                        token_index: None,
                        original: Some(EditValue::Metrics(doc.metrics)),
                        replacement: Some(EditValue::Metrics(scaled)),
                    });
                    doc.metrics = scaled;
                }
            }
        }
    }

    Ok((out, edits))
}

/// Apply every rule in order, each against the output of the previous one,
/// and concatenate the edit logs.
pub fn apply_ruleset(
    thread: &Thread,
    rules: &RuleSet,
    replacer: Option<&dyn ReplacementSource>,
) -> Result<(Thread, EditLog), PerturbError> {
    let mut current = thread.clone();
    let mut log: EditLog = Vec::new();
    for rule in &rules.rules {
        let (next, mut edits) = apply_rule_with(&current, rule, replacer)?;
        current = next;
        log.append(&mut edits);
    }
    Ok((current, log))
}
