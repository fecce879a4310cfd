//! Document model, tokenizer, and JSON Lines corpus ingestion.
//!
//! A corpus is a flat list of [`TweetDocument`] values, one JSON object per
//! line. Replies are separate documents that point at their parent through
//! `parent_id` (one level of threading, no trees). All values are immutable
//! after construction and safe to share across threads.

use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Engagement counters displayed next to a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub replies: u64,
    pub retweets: u64,
    pub likes: u64,
}

impl Metrics {
    pub fn new(replies: u64, retweets: u64, likes: u64) -> Self {
        Self { replies, retweets, likes }
    }
}

/// One feed document: a root post or a reply to one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetDocument {
    pub id: String,
    pub author: String,
    pub verified: bool,
    pub body: String,
    pub hashtags: Vec<String>,
    pub metrics: Metrics,
    /// Present iff this document is a reply to another document in the
    /// same corpus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
}

/// A root document together with its replies, in corpus order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thread {
    pub root: TweetDocument,
    pub comments: Vec<TweetDocument>,
}

impl Thread {
    /// A thread consisting of just the root, no replies.
    pub fn lone(root: TweetDocument) -> Self {
        Self { root, comments: Vec::new() }
    }
}

/// Group a corpus into threads. Documents without a `parent_id` become
/// roots (in corpus order); every reply is attached to its root.
pub fn group_threads(docs: &[TweetDocument]) -> Vec<Thread> {
    let mut threads: Vec<Thread> = docs
        .iter()
        .filter(|d| d.parent_id.is_none())
        .map(|d| Thread::lone(d.clone()))
        .collect();
    for doc in docs.iter().filter(|d| d.parent_id.is_some()) {
        let pid = doc.parent_id.as_deref().unwrap();
        if let Some(t) = threads.iter_mut().find(|t| t.root.id == pid) {
            t.comments.push(doc.clone());
        }
    }
    threads
}

/// Build the thread rooted at `id`, or `None` if no such document exists.
pub fn thread_for(docs: &[TweetDocument], id: &str) -> Option<Thread> {
    let root = docs.iter().find(|d| d.id == id)?.clone();
    let comments = docs
        .iter()
        .filter(|d| d.parent_id.as_deref() == Some(id))
        .cloned()
        .collect();
    Some(Thread { root, comments })
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Hashtag,
    Mention,
    Number,
    Punctuation,
}

/// A token with its byte span in the source body. Spans are strictly
/// increasing and non-overlapping; concatenating token texts with the
/// skipped inter-token bytes reconstructs the body exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub byte_start: usize,
    pub byte_end: usize,
    pub kind: TokenKind,
}

/// Split a body into tokens.
///
/// Rules, in order of precedence at each position:
/// - `#` followed by at least one alphanumeric: one hashtag token
/// - `@` followed by at least one alphanumeric: one mention token
/// - a run of numeric characters: one number token
/// - a run of alphabetic characters, optionally containing internal
///   apostrophes (so `don't` is a single word): one word token
/// - any other non-whitespace character: one punctuation token
///
/// Whitespace separates tokens and is never part of one.
pub fn tokenize(body: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let chars: Vec<(usize, char)> = body.char_indices().collect();
    let total = body.len();

    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let (kind, next) = if (c == '#' || c == '@')
            && i + 1 < chars.len()
            && chars[i + 1].1.is_alphanumeric()
        {
            let mut j = i + 1;
            while j < chars.len() && chars[j].1.is_alphanumeric() {
                j += 1;
            }
            (if c == '#' { TokenKind::Hashtag } else { TokenKind::Mention }, j)
        } else if c.is_numeric() {
            let mut j = i;
            while j < chars.len() && chars[j].1.is_numeric() {
                j += 1;
            }
            (TokenKind::Number, j)
        } else if c.is_alphabetic() {
            let mut j = i;
            while j < chars.len() {
                let ch = chars[j].1;
                if ch.is_alphabetic() {
                    j += 1;
                } else if ch == '\''
                    && j + 1 < chars.len()
                    && chars[j + 1].1.is_alphabetic()
                    && chars[j - 1].1.is_alphabetic()
                {
                    // internal apostrophe: "don't" stays one token
                    j += 1;
                } else {
                    break;
                }
            }
            (TokenKind::Word, j)
        } else {
            (TokenKind::Punctuation, i + 1)
        };

        let byte_end = if next < chars.len() { chars[next].0 } else { total };
        tokens.push(Token {
            text: body[start..byte_end].to_string(),
            byte_start: start,
            byte_end,
            kind,
        });
        i = next;
    }
    tokens
}

// ---------------------------------------------------------------------------
// Corpus ingestion
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 { line: usize, offset: usize },
    #[error("line {line}: malformed document: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("line {line}: duplicate id \"{id}\"")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: parent_id \"{parent}\" of \"{id}\" does not name a document in this corpus")]
    DanglingParent { line: usize, id: String, parent: String },
    #[error("corpus read failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetrics {
    replies: i64,
    retweets: i64,
    likes: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    id: String,
    author: String,
    verified: bool,
    body: String,
    hashtags: Vec<String>,
    metrics: RawMetrics,
    #[serde(default)]
    parent_id: Option<String>,
}

fn metric_count(value: i64, field: &str, line: usize) -> Result<u64, CorpusError> {
    u64::try_from(value).map_err(|_| CorpusError::Invalid {
        line,
        message: format!("metrics.{field} must be ≥ 0"),
    })
}

/// Parse and validate a single corpus line. Cross-document invariants
/// (unique ids, resolvable parents) are checked by [`parse_corpus`].
pub fn parse_document_line(line: &str, line_no: usize) -> Result<TweetDocument, CorpusError> {
    let raw: RawDocument = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
        line: line_no,
        message: e.to_string(),
    })?;
    if raw.id.is_empty() {
        return Err(CorpusError::Invalid { line: line_no, message: "id must be non-empty".into() });
    }
    for tag in &raw.hashtags {
        if !tag.starts_with('#') || tag.len() == 1 {
            return Err(CorpusError::Invalid {
                line: line_no,
                message: format!("hashtag \"{tag}\" must start with '#'"),
            });
        }
        if tag.chars().any(char::is_whitespace) {
            return Err(CorpusError::Invalid {
                line: line_no,
                message: format!("hashtag \"{tag}\" must not contain whitespace"),
            });
        }
    }
    let metrics = Metrics {
        replies: metric_count(raw.metrics.replies, "replies", line_no)?,
        retweets: metric_count(raw.metrics.retweets, "retweets", line_no)?,
        likes: metric_count(raw.metrics.likes, "likes", line_no)?,
    };
    Ok(TweetDocument {
        id: raw.id,
        author: raw.author,
        verified: raw.verified,
        body: raw.body,
        hashtags: raw.hashtags,
        metrics,
        parent_id: raw.parent_id,
    })
}

/// Read a JSON Lines corpus from a byte stream, validating every document
/// invariant: one object per line, unique non-empty ids, well-formed
/// hashtags, non-negative metrics, and parent links that resolve within
/// the corpus. Blank lines are skipped.
pub fn parse_corpus<R: BufRead>(mut reader: R) -> Result<Vec<TweetDocument>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut doc_lines: Vec<usize> = Vec::new();
    let mut line_no = 0usize;
    let mut stream_offset = 0usize;
    let mut buf = Vec::new();

    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let line_start = stream_offset;
        stream_offset += n;
        let text = std::str::from_utf8(&buf).map_err(|e| CorpusError::InvalidUtf8 {
            line: line_no,
            offset: line_start + e.valid_up_to(),
        })?;
        let text = text.trim_end_matches('\n').trim_end_matches('\r');
        if text.trim().is_empty() {
            continue;
        }
        let doc = parse_document_line(text, line_no)?;
        if !seen.insert(doc.id.clone()) {
            return Err(CorpusError::DuplicateId { line: line_no, id: doc.id });
        }
        doc_lines.push(line_no);
        docs.push(doc);
    }

    for (doc, &line) in docs.iter().zip(&doc_lines) {
        if let Some(parent) = &doc.parent_id {
            if !seen.contains(parent) {
                return Err(CorpusError::DanglingParent {
                    line,
                    id: doc.id.clone(),
                    parent: parent.clone(),
                });
            }
        }
    }
    Ok(docs)
}

/// Parse a corpus held in memory.
pub fn parse_corpus_str(s: &str) -> Result<Vec<TweetDocument>, CorpusError> {
    parse_corpus(s.as_bytes())
}

/// Serialize one document to its canonical single-line JSON form.
pub fn serialize_document(doc: &TweetDocument) -> String {
    serde_json::to_string(doc).expect("document serialization cannot fail")
}

/// Serialize a corpus to JSON Lines, one document per line, each line
/// terminated by `\n`.
pub fn serialize_corpus(docs: &[TweetDocument]) -> String {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&serialize_document(doc));
        out.push('\n');
    }
    out
}
