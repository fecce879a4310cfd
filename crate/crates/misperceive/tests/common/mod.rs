//! Seeded random documents and rule sets shared by the integration suites.
#![allow(dead_code)] // each test binary uses a different subset

use misperceive::{
    InsertSide, Metrics, PerturbationRule, RuleAction, RulePredicate, RuleSet, ScaleFactor, Scope,
    Thread, TweetDocument,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const VOCAB: &[&str] = &[
    "vaccines", "work", "many", "no", "not", "they", "do", "cause", "autism", "safe", "wrong",
    "right", "studies", "people", "trust", "science", "experts", "agree",
];

pub const HASHTAG_POOL: &[&str] =
    &["#provax", "#vaccineswork", "#antivax", "#vaccines", "#health"];

const PUNCT: &[&str] = &[".", "!", ",", "?"];

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn pick<'a>(rng: &mut StdRng, pool: &[&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

pub fn random_body(rng: &mut StdRng) -> String {
    let segments = rng.random_range(3..=12);
    let mut parts = Vec::with_capacity(segments);
    for _ in 0..segments {
        let mut segment = match rng.random_range(0..10) {
            0 => pick(rng, HASHTAG_POOL).to_string(),
            1 => rng.random_range(0..1000u32).to_string(),
            2 => {
                // capitalized word, exercises case adaptation
                let w = pick(rng, VOCAB);
                let mut c = w.chars();
                match c.next() {
                    Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
                    None => w.to_string(),
                }
            }
            _ => pick(rng, VOCAB).to_string(),
        };
        if rng.random_range(0..4) == 0 {
            segment.push_str(pick(rng, PUNCT));
        }
        parts.push(segment);
    }
    parts.join(" ")
}

pub fn random_doc(rng: &mut StdRng, id: &str) -> TweetDocument {
    let mut hashtags = Vec::new();
    for tag in HASHTAG_POOL {
        if rng.random_range(0..4) == 0 {
            hashtags.push(tag.to_string());
        }
    }
    TweetDocument {
        id: id.to_string(),
        author: format!("@user{}", rng.random_range(0..50)),
        verified: rng.random_bool(0.3),
        body: random_body(rng),
        hashtags,
        metrics: Metrics::new(
            rng.random_range(0..300),
            rng.random_range(0..300),
            rng.random_range(0..300),
        ),
        parent_id: None,
    }
}

pub fn random_thread(rng: &mut StdRng, id_prefix: &str) -> Thread {
    let root = random_doc(rng, &format!("{id_prefix}-root"));
    let comment_count = rng.random_range(0..=3);
    let comments = (0..comment_count)
        .map(|i| {
            let mut c = random_doc(rng, &format!("{id_prefix}-c{i}"));
            c.parent_id = Some(root.id.clone());
            c
        })
        .collect();
    Thread { root, comments }
}

fn random_scope(rng: &mut StdRng, allow_comments: bool) -> Scope {
    match rng.random_range(0..if allow_comments { 3 } else { 2 }) {
        0 => Scope::All,
        1 => Scope::First,
        _ => Scope::CommentsOnly,
    }
}

fn random_predicate(rng: &mut StdRng) -> Option<RulePredicate> {
    if rng.random_range(0..4) != 0 {
        return None;
    }
    Some(RulePredicate {
        hashtag_any: Some(vec![pick(rng, HASHTAG_POOL).to_string()]),
        author_is: None,
    })
}

/// A random rule set. At most one `metric_scale` rule is generated so a
/// single uniform factor always explains the metric change.
pub fn random_ruleset(rng: &mut StdRng, allow_comments: bool) -> RuleSet {
    let count = rng.random_range(1..=4);
    let mut rules = Vec::with_capacity(count);
    let mut used_metric = false;
    for _ in 0..count {
        let action = match rng.random_range(0..5) {
            0 => RuleAction::WordSwap {
                target: pick(rng, VOCAB).to_string(),
                replacement: pick(rng, VOCAB).to_string(),
            },
            1 => RuleAction::WordRemove { target: pick(rng, VOCAB).to_string() },
            2 => RuleAction::WordInsert {
                token: if rng.random_bool(0.3) {
                    "don't".to_string()
                } else {
                    pick(rng, VOCAB).to_string()
                },
                anchor: pick(rng, VOCAB).to_string(),
                side: if rng.random_bool(0.5) { InsertSide::Before } else { InsertSide::After },
            },
            3 => {
                let target = pick(rng, HASHTAG_POOL);
                let mut replacement = pick(rng, HASHTAG_POOL);
                while replacement == target {
                    replacement = pick(rng, HASHTAG_POOL);
                }
                RuleAction::HashtagSwap {
                    target: target.to_string(),
                    replacement: replacement.to_string(),
                }
            }
            _ if !used_metric => {
                used_metric = true;
                RuleAction::MetricScale {
                    factor: ScaleFactor::new(
                        rng.random_range(1..=8),
                        rng.random_range(1..=8),
                    )
                    .expect("positive"),
                }
            }
            _ => RuleAction::WordRemove { target: pick(rng, VOCAB).to_string() },
        };
        rules.push(PerturbationRule {
            action,
            scope: random_scope(rng, allow_comments),
            case_sensitive: rng.random_bool(0.7),
            predicate: random_predicate(rng),
        });
    }
    RuleSet { rules }
}
