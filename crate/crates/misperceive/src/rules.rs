//! Declarative manipulation rules and their JSON file format.
//!
//! A rule file is a single object `{"rules": [...]}`. Each rule names its
//! `kind` plus exactly the fields that kind requires; anything else is a
//! validation error that points at the offending rule and field.

use std::fmt;

use num_rational::Ratio;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Exact positive rational used for metric scaling. Serialized as a plain
/// integer when whole (`4`), otherwise as a `"p/q"` string (`"1/2"`); float
/// literals are rejected so scaling stays exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ScaleFactor(Ratio<u64>);

impl ScaleFactor {
    pub fn new(numer: u64, denom: u64) -> Result<Self, RuleError> {
        if numer == 0 || denom == 0 {
            return Err(RuleError::InvalidFactor(format!("{numer}/{denom}")));
        }
        Ok(Self(Ratio::new(numer, denom)))
    }

    pub fn from_integer(n: u64) -> Result<Self, RuleError> {
        Self::new(n, 1)
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    /// Exact product of two factors.
    pub fn times(&self, other: &ScaleFactor) -> ScaleFactor {
        ScaleFactor(self.0 * other.0)
    }

    /// Scale one counter, rounding halves away from zero. `None` on
    /// arithmetic overflow.
    pub fn scale_count(&self, count: u64) -> Option<u64> {
        let n = (count as u128).checked_mul(self.numer() as u128)?;
        let q = self.denom() as u128;
        let rounded = n.checked_mul(2)?.checked_add(q)? / (q * 2);
        u64::try_from(rounded).ok()
    }
}

impl fmt::Display for ScaleFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl Serialize for ScaleFactor {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.denom() == 1 {
            serializer.serialize_u64(self.numer())
        } else {
            serializer.serialize_str(&format!("{}/{}", self.numer(), self.denom()))
        }
    }
}

impl<'de> Deserialize<'de> for ScaleFactor {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Float(f64),
            Text(String),
        }
        let parsed = match Repr::deserialize(deserializer)? {
            Repr::Int(n) => ScaleFactor::from_integer(n),
            Repr::Float(x) => {
                if x.fract() == 0.0 && x > 0.0 && x <= u64::MAX as f64 {
                    ScaleFactor::from_integer(x as u64)
                } else {
                    return Err(D::Error::custom(
                        "non-integer factor must be written as a \"p/q\" string",
                    ));
                }
            }
            Repr::Text(s) => {
                let (p, q) = match s.split_once('/') {
                    Some((p, q)) => (
                        p.trim().parse::<u64>().map_err(D::Error::custom)?,
                        q.trim().parse::<u64>().map_err(D::Error::custom)?,
                    ),
                    None => (s.trim().parse::<u64>().map_err(D::Error::custom)?, 1),
                };
                ScaleFactor::new(p, q)
            }
        };
        parsed.map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    All,
    First,
    CommentsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertSide {
    Before,
    After,
}

/// Gate that must hold on the root document before a rule fires.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulePredicate {
    /// Fire only if the document carries at least one of these hashtags.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hashtag_any: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_is: Option<String>,
}

/// What a rule does. Kind-specific payloads live here; scope, case
/// handling, and predicates are shared by every kind.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleAction {
    WordSwap { target: String, replacement: String },
    WordRemove { target: String },
    WordInsert { token: String, anchor: String, side: InsertSide },
    HashtagSwap { target: String, replacement: String },
    MetricScale { factor: ScaleFactor },
}

/// Replacement sentinel: a `word_swap` whose replacement is this string
/// asks the configured replacement model for the token instead.
pub const MARKOV_SENTINEL: &str = "&markov";

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationRule {
    pub action: RuleAction,
    pub scope: Scope,
    pub case_sensitive: bool,
    pub predicate: Option<RulePredicate>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleSet {
    pub rules: Vec<PerturbationRule>,
}

impl RuleSet {
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// True if any rule defers its replacement to the markov hook.
    pub fn needs_replacer(&self) -> bool {
        self.rules.iter().any(|r| {
            matches!(&r.action, RuleAction::WordSwap { replacement, .. } if replacement == MARKOV_SENTINEL)
        })
    }

    pub fn from_json(text: &str) -> Result<Self, RuleError> {
        let raw: RawRuleSet =
            serde_json::from_str(text).map_err(|e| RuleError::Parse(e.to_string()))?;
        let rules = raw
            .rules
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.validate(i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RuleSet { rules })
    }

    pub fn to_json(&self) -> String {
        let raw = RawRuleSet { rules: self.rules.iter().map(RawRule::from).collect() };
        serde_json::to_string_pretty(&raw).expect("rule serialization cannot fail")
    }
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rule file is not valid JSON: {0}")]
    Parse(String),
    #[error("rule {rule}: {message}")]
    Invalid { rule: usize, message: String },
    #[error("scale factor must be positive, got {0}")]
    InvalidFactor(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRuleSet {
    rules: Vec<RawRule>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRule {
    kind: String,
    #[serde(rename = "match", default, skip_serializing_if = "Option::is_none")]
    target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    replacement: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    insert_token: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anchor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    side: Option<InsertSide>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    factor: Option<ScaleFactor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scope: Option<Scope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    case_sensitive: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    predicate: Option<RulePredicate>,
}

impl RawRule {
    fn validate(self, index: usize) -> Result<PerturbationRule, RuleError> {
        let fail = |message: String| RuleError::Invalid { rule: index, message };
        let need = |value: Option<String>, field: &str, kind: &str| {
            value.filter(|v| !v.trim().is_empty()).ok_or_else(|| {
                RuleError::Invalid {
                    rule: index,
                    message: format!("{kind} requires a non-empty \"{field}\" field"),
                }
            })
        };
        let forbid = |absent: bool, field: &str, kind: &str| {
            if absent {
                Ok(())
            } else {
                Err(RuleError::Invalid {
                    rule: index,
                    message: format!("\"{field}\" is not valid for {kind}"),
                })
            }
        };

        let action = match self.kind.as_str() {
            "word_swap" => {
                forbid(self.insert_token.is_none(), "insert_token", "word_swap")?;
                forbid(self.anchor.is_none(), "anchor", "word_swap")?;
                forbid(self.side.is_none(), "side", "word_swap")?;
                forbid(self.factor.is_none(), "factor", "word_swap")?;
                RuleAction::WordSwap {
                    target: need(self.target, "match", "word_swap")?,
                    replacement: need(self.replacement, "replacement", "word_swap")?,
                }
            }
            "word_remove" => {
                forbid(self.replacement.is_none(), "replacement", "word_remove")?;
                forbid(self.insert_token.is_none(), "insert_token", "word_remove")?;
                forbid(self.anchor.is_none(), "anchor", "word_remove")?;
                forbid(self.side.is_none(), "side", "word_remove")?;
                forbid(self.factor.is_none(), "factor", "word_remove")?;
                RuleAction::WordRemove { target: need(self.target, "match", "word_remove")? }
            }
            "word_insert" => {
                forbid(self.target.is_none(), "match", "word_insert")?;
                forbid(self.replacement.is_none(), "replacement", "word_insert")?;
                forbid(self.factor.is_none(), "factor", "word_insert")?;
                RuleAction::WordInsert {
                    token: need(self.insert_token, "insert_token", "word_insert")?,
                    anchor: need(self.anchor, "anchor", "word_insert")?,
                    side: self
                        .side
                        .ok_or_else(|| fail("word_insert requires a \"side\" field".into()))?,
                }
            }
            "hashtag_swap" => {
                forbid(self.insert_token.is_none(), "insert_token", "hashtag_swap")?;
                forbid(self.anchor.is_none(), "anchor", "hashtag_swap")?;
                forbid(self.side.is_none(), "side", "hashtag_swap")?;
                forbid(self.factor.is_none(), "factor", "hashtag_swap")?;
                let target = need(self.target, "match", "hashtag_swap")?;
                let replacement = need(self.replacement, "replacement", "hashtag_swap")?;
                for (field, value) in [("match", &target), ("replacement", &replacement)] {
                    if !value.starts_with('#') || value.len() == 1 {
                        return Err(fail(format!(
                            "hashtag_swap \"{field}\" must start with '#', got \"{value}\""
                        )));
                    }
                }
                RuleAction::HashtagSwap { target, replacement }
            }
            "metric_scale" => {
                forbid(self.target.is_none(), "match", "metric_scale")?;
                forbid(self.replacement.is_none(), "replacement", "metric_scale")?;
                forbid(self.insert_token.is_none(), "insert_token", "metric_scale")?;
                forbid(self.anchor.is_none(), "anchor", "metric_scale")?;
                forbid(self.side.is_none(), "side", "metric_scale")?;
                RuleAction::MetricScale {
                    factor: self
                        .factor
                        .ok_or_else(|| fail("metric_scale requires a \"factor\" field".into()))?,
                }
            }
            other => return Err(fail(format!("unknown rule kind \"{other}\""))),
        };

        let scope = self.scope.ok_or_else(|| fail("missing \"scope\" field".into()))?;
        if let Some(p) = &self.predicate {
            if p.hashtag_any.is_none() && p.author_is.is_none() {
                return Err(fail("predicate must set at least one of hashtag_any, author_is".into()));
            }
            if let Some(tags) = &p.hashtag_any {
                if tags.is_empty() {
                    return Err(fail("predicate hashtag_any must not be empty".into()));
                }
            }
        }
        Ok(PerturbationRule {
            action,
            scope,
            case_sensitive: self.case_sensitive.unwrap_or(true),
            predicate: self.predicate,
        })
    }
}

impl From<&PerturbationRule> for RawRule {
    fn from(rule: &PerturbationRule) -> Self {
        let mut raw = RawRule {
            scope: Some(rule.scope),
            case_sensitive: Some(rule.case_sensitive),
            predicate: rule.predicate.clone(),
            ..Default::default()
        };
        match &rule.action {
            RuleAction::WordSwap { target, replacement } => {
                raw.kind = "word_swap".into();
                raw.target = Some(target.clone());
                raw.replacement = Some(replacement.clone());
            }
            RuleAction::WordRemove { target } => {
                raw.kind = "word_remove".into();
                raw.target = Some(target.clone());
            }
            RuleAction::WordInsert { token, anchor, side } => {
                raw.kind = "word_insert".into();
                raw.insert_token = Some(token.clone());
                raw.anchor = Some(anchor.clone());
                raw.side = Some(*side);
            }
            RuleAction::HashtagSwap { target, replacement } => {
                raw.kind = "hashtag_swap".into();
                raw.target = Some(target.clone());
                raw.replacement = Some(replacement.clone());
            }
            RuleAction::MetricScale { factor } => {
                raw.kind = "metric_scale".into();
                raw.factor = Some(*factor);
            }
        }
        raw
    }
}
