//! misperceive: simulate, detect, and analyze in-transit manipulation of
//! social feed documents.
//!
//! The crate covers four sides of one attack-and-defense loop:
//!
//! - **simulate** — declarative rules rewrite words, hashtags, and
//!   engagement metrics of a document ([`perturb`], [`rules`]), optionally
//!   picking replacements from a trained transition model ([`markov`]),
//!   either in process or as a man-in-the-middle proxy between a client
//!   and a feed origin ([`wire`]);
//! - **detect** — compare an authentic document against a delivered
//!   rendering, recover the edit script, and score the manipulation
//!   signatures ([`detect`]);
//! - **respond** — suggest a ready-made reply to a hostile rendering via
//!   keyword features and jittered nearest-neighbor selection
//!   ([`recommend`]);
//! - **analyze** — compare endorsement behavior across groups with the
//!   tie-corrected Kruskal-Wallis test ([`stats`]).
//!
//! Every change the engine makes is recorded as an edit log that replays
//! byte-for-byte ([`edit`]), and the bundled scenarios ([`scenario`])
//! verify the whole loop end to end.

pub mod assets;
pub mod book;
pub mod corpus;
pub mod detect;
pub mod edit;
pub mod markov;
pub mod perturb;
pub mod recommend;
pub mod rules;
pub mod scenario;
pub mod stats;
pub mod wire;

pub use corpus::{
    group_threads, parse_corpus, parse_corpus_str, serialize_corpus, serialize_document,
    thread_for, tokenize, CorpusError, Metrics, Thread, Token, TokenKind, TweetDocument,
};
pub use detect::{
    align, classify, detect, estimate_metric_factor, replay_report, DetectError, DetectionReport,
    HashtagFlip, ValenceLexicon,
};
pub use edit::{replay_edits, Edit, EditLog, EditOp, EditValue, Location, ReplayError};
pub use markov::{train, MarkovError, MarkovModel, MarkovReplacer};
pub use perturb::{
    apply_rule, apply_rule_with, apply_ruleset, find_matches, scale_metrics, Match, PerturbError,
    ReplacementSource,
};
pub use recommend::{
    distance, extract_features, parse_candidates, recommend, CandidateScore, FeatureVector,
    KeywordLexicons, Recommendation, RecommendError, ResponseCandidate, Rhetoric, Stance,
};
pub use rules::{
    InsertSide, PerturbationRule, RuleAction, RuleError, RulePredicate, RuleSet, ScaleFactor,
    Scope,
};
pub use scenario::{
    run_scenario, render_summary, RoundTrip, ScenarioConfig, ScenarioError, ScenarioName,
    ScenarioReport,
};
pub use stats::{chi_square_sf, kruskal_wallis, rank_with_ties, KWResult, StatsError};
pub use wire::{
    http_get, parse_audit_log, proxy_rewrite, proxy_rewrite_with, serve_feed, AuditRecord,
    HttpResponse, ServerHandle, WireError,
};
