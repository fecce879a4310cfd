//! Bundled sample corpus, rule sets, lexicons, and response candidates.
//!
//! These files make the two built-in scenarios reproducible anywhere the
//! binary runs. The corpus carrier sentences are synthetic stand-ins
//! written for this toolkit; the tokens the rules target, the hashtag
//! pairs, and the metric values are the fixed points the scenarios assert.

use crate::corpus::{parse_corpus_str, TweetDocument};
use crate::detect::ValenceLexicon;
use crate::recommend::{parse_candidates, KeywordLexicons, ResponseCandidate};
use crate::rules::RuleSet;

pub const CORPUS_JSONL: &str = include_str!("../../../assets/corpus.jsonl");
pub const PILOT_RULES_JSON: &str = include_str!("../../../rules/pilot.json");
pub const STUDY_RULES_JSON: &str = include_str!("../../../rules/study.json");
pub const VALENCE_LEXICON_JSON: &str = include_str!("../../../assets/lexicon.json");
pub const KEYWORD_LEXICONS_JSON: &str = include_str!("../../../assets/keywords.json");
pub const CANDIDATES_JSONL: &str = include_str!("../../../assets/candidates.jsonl");

/// Root document id targeted by the study scenario.
pub const STUDY_ROOT_ID: &str = "study-root";
/// Root document id targeted by the pilot scenario.
pub const PILOT_ROOT_ID: &str = "pilot-root";

pub fn bundled_corpus() -> Vec<TweetDocument> {
    parse_corpus_str(CORPUS_JSONL).expect("bundled corpus is valid")
}

pub fn study_rules() -> RuleSet {
    RuleSet::from_json(STUDY_RULES_JSON).expect("bundled study rules are valid")
}

pub fn pilot_rules() -> RuleSet {
    RuleSet::from_json(PILOT_RULES_JSON).expect("bundled pilot rules are valid")
}

pub fn valence_lexicon() -> ValenceLexicon {
    ValenceLexicon::from_json(VALENCE_LEXICON_JSON).expect("bundled lexicon is valid")
}

pub fn keyword_lexicons() -> KeywordLexicons {
    KeywordLexicons::from_json(KEYWORD_LEXICONS_JSON).expect("bundled keyword lists are valid")
}

pub fn candidates() -> Vec<ResponseCandidate> {
    parse_candidates(CANDIDATES_JSONL).expect("bundled candidates are valid")
}
