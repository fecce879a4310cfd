//! Local feed origin and man-in-the-middle rewriting proxy.
//!
//! The origin serves an immutable corpus over plain HTTP/1.1:
//! `GET /feed` returns every document as JSON Lines, `GET /tweet/{id}` one
//! document. The proxy forwards requests to an upstream origin and rewrites
//! each document in the response through the perturbation engine,
//! re-framing the payload with a correct content length. Documents the
//! rule set leaves untouched pass through with their original bytes.
//!
//! Rewriting is per document and stateless across requests: each document
//! is treated as its own thread, so `comments_only` rules never fire on
//! the wire. Every rewritten document appends one ground-truth line to the
//! proxy's audit log *before* the response is sent, so a client that has
//! seen a response can rely on the audit entry existing.
//!
//! Both endpoints are thread-per-connection; the corpus and rule set are
//! shared immutably and the audit file writes are serialized behind a
//! mutex, so concurrent fetches cannot interleave payloads or tear audit
//! lines.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{parse_document_line, serialize_corpus, serialize_document, Thread, TweetDocument};
use crate::edit::Edit;
use crate::perturb::{apply_ruleset, ReplacementSource};
use crate::rules::RuleSet;

const NDJSON: &str = "application/x-ndjson";
const IO_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error)]
pub enum WireError {
    #[error("failed to bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("proxy configuration: {0}")]
    Config(String),
    #[error("malformed HTTP response: {0}")]
    InvalidResponse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One audit line: either the ground-truth edits for a rewritten document
/// or a note that a request could not be processed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AuditRecord {
    Rewrite { request_id: u64, tweet_id: String, edits: Vec<Edit> },
    Error { request_id: u64, error: String },
}

/// Parse an audit log written by the proxy.
pub fn parse_audit_log(text: &str) -> Result<Vec<AuditRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// A running endpoint. Dropping the handle (or calling [`shutdown`]) stops
/// the accept loop.
///
/// [`shutdown`]: ServerHandle::shutdown
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    join: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// `host:port` string suitable for a client or `--upstream` flag.
    pub fn authority(&self) -> String {
        self.addr.to_string()
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(join) = self.join.take() {
            let _ = join.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}

fn spawn_accept_loop<F>(listener: TcpListener, stop: Arc<AtomicBool>, handler: Arc<F>) -> JoinHandle<()>
where
    F: Fn(TcpStream) + Send + Sync + 'static,
{
    thread::spawn(move || {
        listener.set_nonblocking(true).expect("nonblocking listener");
        while !stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let handler = Arc::clone(&handler);
                    thread::spawn(move || {
                        let _ = stream.set_nonblocking(false);
                        let _ = stream.set_read_timeout(Some(IO_TIMEOUT));
                        let _ = stream.set_write_timeout(Some(IO_TIMEOUT));
                        handler(stream);
                    });
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    thread::sleep(Duration::from_millis(2));
                }
                Err(_) => thread::sleep(Duration::from_millis(2)),
            }
        }
    })
}

fn bind(addr: &str) -> Result<(TcpListener, SocketAddr), WireError> {
    let listener = TcpListener::bind(addr)
        .map_err(|source| WireError::Bind { addr: addr.to_string(), source })?;
    let local = listener.local_addr().map_err(WireError::Io)?;
    Ok((listener, local))
}

// ---------------------------------------------------------------------------
// Minimal HTTP plumbing
// ---------------------------------------------------------------------------

fn read_request_path(stream: &mut TcpStream) -> std::io::Result<Option<(String, String)>> {
    let mut reader = BufReader::new(stream);
    let mut request_line = String::new();
    if reader.read_line(&mut request_line)? == 0 {
        return Ok(None);
    }
    // drain headers; GET requests carry no body
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
    }
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();
    Ok(Some((method, path)))
}

fn write_response(stream: &mut TcpStream, status: u16, content_type: &str, body: &[u8]) {
    let reason = match status {
        200 => "OK",
        404 => "Not Found",
        405 => "Method Not Allowed",
        502 => "Bad Gateway",
        _ => "Unknown",
    };
    let head = format!(
        "HTTP/1.1 {status} {reason}\r\ncontent-type: {content_type}\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
        body.len()
    );
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(body);
    let _ = stream.flush();
}

/// A parsed HTTP response from [`http_get`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn body_str(&self) -> Result<&str, std::str::Utf8Error> {
        std::str::from_utf8(&self.body)
    }
}

/// Blocking GET against `authority` (`host:port`). Reads to end of stream;
/// both endpoints in this crate close the connection after one response.
pub fn http_get(authority: &str, path: &str) -> Result<HttpResponse, WireError> {
    let mut stream = TcpStream::connect(authority)?;
    stream.set_read_timeout(Some(IO_TIMEOUT))?;
    stream.set_write_timeout(Some(IO_TIMEOUT))?;
    let request = format!(
        "GET {path} HTTP/1.1\r\nhost: {authority}\r\nconnection: close\r\naccept: {NDJSON}\r\n\r\n"
    );
    stream.write_all(request.as_bytes())?;
    stream.flush()?;

    let mut raw = Vec::new();
    stream.read_to_end(&mut raw)?;
    let split = find_header_end(&raw)
        .ok_or_else(|| WireError::InvalidResponse("missing header terminator".into()))?;
    let head = std::str::from_utf8(&raw[..split])
        .map_err(|_| WireError::InvalidResponse("non-UTF-8 header block".into()))?;
    let mut lines = head.split("\r\n");
    let status_line = lines.next().unwrap_or_default();
    let status: u16 = status_line
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| WireError::InvalidResponse(format!("bad status line {status_line:?}")))?;
    let mut content_type = None;
    let mut content_length: Option<usize> = None;
    for line in lines {
        if let Some((name, value)) = line.split_once(':') {
            match name.trim().to_ascii_lowercase().as_str() {
                "content-type" => content_type = Some(value.trim().to_string()),
                "content-length" => content_length = value.trim().parse().ok(),
                _ => {}
            }
        }
    }
    let mut body = raw[split + 4..].to_vec();
    if let Some(len) = content_length {
        if body.len() < len {
            return Err(WireError::InvalidResponse(format!(
                "truncated body: content-length {len}, got {}",
                body.len()
            )));
        }
        body.truncate(len);
    }
    Ok(HttpResponse { status, content_type, body })
}

fn find_header_end(raw: &[u8]) -> Option<usize> {
    raw.windows(4).position(|w| w == b"\r\n\r\n")
}

// ---------------------------------------------------------------------------
// Origin
// ---------------------------------------------------------------------------

/// Serve a corpus as the authentic content origin. Responses are
/// byte-deterministic for a fixed corpus.
pub fn serve_feed(corpus: Vec<TweetDocument>, bind_addr: &str) -> Result<ServerHandle, WireError> {
    let (listener, addr) = bind(bind_addr)?;
    let feed_body: Arc<Vec<u8>> = Arc::new(serialize_corpus(&corpus).into_bytes());
    let by_id: Arc<HashMap<String, String>> = Arc::new(
        corpus.iter().map(|d| (d.id.clone(), serialize_document(d))).collect(),
    );

    let stop = Arc::new(AtomicBool::new(false));
    let handler = Arc::new(move |mut stream: TcpStream| {
        let Ok(Some((method, path))) = read_request_path(&mut stream) else { return };
        if method != "GET" {
            write_response(&mut stream, 405, "text/plain", b"GET only\n");
            return;
        }
        if path == "/feed" {
            write_response(&mut stream, 200, NDJSON, &feed_body);
        } else if let Some(id) = path.strip_prefix("/tweet/") {
            match by_id.get(id) {
                Some(line) => {
                    let mut body = line.clone().into_bytes();
                    body.push(b'\n');
                    write_response(&mut stream, 200, NDJSON, &body);
                }
                None => write_response(&mut stream, 404, "text/plain", b""),
            }
        } else {
            write_response(&mut stream, 404, "text/plain", b"");
        }
    });

    let join = spawn_accept_loop(listener, Arc::clone(&stop), handler);
    Ok(ServerHandle { addr, stop, join: Some(join) })
}

// ---------------------------------------------------------------------------
// Proxy
// ---------------------------------------------------------------------------

struct ProxyState {
    upstream: String,
    rules: RuleSet,
    replacer: Option<Arc<dyn ReplacementSource + Send + Sync>>,
    audit: Mutex<File>,
    next_request: AtomicU64,
}

impl ProxyState {
    fn append_audit(&self, records: &[AuditRecord]) {
        if records.is_empty() {
            return;
        }
        let mut file = self.audit.lock().unwrap_or_else(|e| e.into_inner());
        for record in records {
            let line = serde_json::to_string(record).expect("audit serialization cannot fail");
            let _ = writeln!(file, "{line}");
        }
        let _ = file.flush();
    }
}

/// Rewrite one JSON Lines payload. Untouched lines keep their exact
/// original bytes; changed documents are re-serialized. Returns the new
/// payload plus one audit record per rewritten document.
fn rewrite_payload(
    body: &str,
    state: &ProxyState,
    request_id: u64,
) -> Result<(String, Vec<AuditRecord>), String> {
    let had_trailing = body.ends_with('\n');
    let logical = if had_trailing { &body[..body.len() - 1] } else { body };
    let mut records = Vec::new();
    let mut out_lines: Vec<String> = Vec::new();
    for (i, line) in logical.split('\n').enumerate() {
        if line.trim().is_empty() {
            out_lines.push(line.to_string());
            continue;
        }
        let doc = parse_document_line(line, i + 1).map_err(|e| e.to_string())?;
        let thread = Thread::lone(doc);
        let replacer = state.replacer.as_deref().map(|r| r as &dyn ReplacementSource);
        let (rewritten, edits) =
            apply_ruleset(&thread, &state.rules, replacer).map_err(|e| e.to_string())?;
        if edits.is_empty() {
            out_lines.push(line.to_string());
        } else {
            records.push(AuditRecord::Rewrite {
                request_id,
                tweet_id: rewritten.root.id.clone(),
                edits,
            });
            out_lines.push(serialize_document(&rewritten.root));
        }
    }
    let mut out = out_lines.join("\n");
    if had_trailing {
        out.push('\n');
    }
    Ok((out, records))
}

/// Start the rewriting proxy. Every incoming `GET` is forwarded to the
/// upstream origin; 200 responses have each document rewritten under the
/// rule set, anything else passes through. An unreachable upstream or a
/// payload that fails to parse yields a 502 (and, for payloads, an audit
/// note).
pub fn proxy_rewrite(
    upstream: &str,
    rules: RuleSet,
    bind_addr: &str,
    audit_path: &Path,
) -> Result<ServerHandle, WireError> {
    proxy_rewrite_with(upstream, rules, bind_addr, audit_path, None)
}

/// [`proxy_rewrite`] with a replacement model for `"&markov"` rules.
pub fn proxy_rewrite_with(
    upstream: &str,
    rules: RuleSet,
    bind_addr: &str,
    audit_path: &Path,
    replacer: Option<Arc<dyn ReplacementSource + Send + Sync>>,
) -> Result<ServerHandle, WireError> {
    if rules.needs_replacer() && replacer.is_none() {
        return Err(WireError::Config(
            "rule set uses \"&markov\" but no replacement model is configured".into(),
        ));
    }
    let audit = File::create(audit_path)?;
    let (listener, addr) = bind(bind_addr)?;
    let state = Arc::new(ProxyState {
        upstream: upstream.to_string(),
        rules,
        replacer,
        audit: Mutex::new(audit),
        next_request: AtomicU64::new(1),
    });

    let stop = Arc::new(AtomicBool::new(false));
    let handler = {
        let state = Arc::clone(&state);
        Arc::new(move |mut stream: TcpStream| {
            let Ok(Some((method, path))) = read_request_path(&mut stream) else { return };
            if method != "GET" {
                write_response(&mut stream, 405, "text/plain", b"GET only\n");
                return;
            }
            let request_id = state.next_request.fetch_add(1, Ordering::SeqCst);
            let upstream_response = match http_get(&state.upstream, &path) {
                Ok(r) => r,
                Err(_) => {
                    write_response(&mut stream, 502, "text/plain", b"upstream unreachable\n");
                    return;
                }
            };
            if upstream_response.status != 200 {
                let ct = upstream_response.content_type.as_deref().unwrap_or("text/plain");
                write_response(
                    &mut stream,
                    upstream_response.status,
                    ct,
                    &upstream_response.body,
                );
                return;
            }
            let Ok(text) = upstream_response.body_str() else {
                state.append_audit(&[AuditRecord::Error {
                    request_id,
                    error: "upstream payload is not valid UTF-8".into(),
                }]);
                write_response(&mut stream, 502, "text/plain", b"malformed upstream payload\n");
                return;
            };
            match rewrite_payload(text, &state, request_id) {
                Ok((payload, records)) => {
                    // audit first: a delivered response implies its entry exists
                    state.append_audit(&records);
                    write_response(&mut stream, 200, NDJSON, payload.as_bytes());
                }
                Err(message) => {
                    state.append_audit(&[AuditRecord::Error { request_id, error: message }]);
                    write_response(&mut stream, 502, "text/plain", b"malformed upstream payload\n");
                }
            }
        })
    };

    let join = spawn_accept_loop(listener, Arc::clone(&stop), handler);
    Ok(ServerHandle { addr, stop, join: Some(join) })
}
