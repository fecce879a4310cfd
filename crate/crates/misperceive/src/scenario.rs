//! End-to-end scenarios: perturb a bundled sample, run the detector against
//! the authentic original, and verify both replay paths.
//!
//! A scenario can run fully in-process or over the wire (`wire: true`), in
//! which case it spawns the origin and the rewriting proxy on loopback,
//! fetches the sample through both, and takes the ground-truth edit log
//! from the proxy's audit file. Either way the sample is perturbed as a
//! lone document, so the two modes produce the same report.
//!
//! Reports are deterministic given the assets and the seed.

use std::fmt;
use std::path::{Path, PathBuf};
use std::thread;

use serde::Serialize;
use thiserror::Error;

use crate::assets;
use crate::corpus::{parse_corpus_str, Thread, TweetDocument};
use crate::detect::{detect, replay_report, DetectionReport, ValenceLexicon};
use crate::edit::{replay_edits, Edit};
use crate::markov::MarkovError;
use crate::perturb::{apply_ruleset, PerturbError};
use crate::recommend::{
    recommend, CandidateScore, KeywordLexicons, RecommendError, ResponseCandidate,
};
use crate::rules::{RuleError, RuleSet};
use crate::wire::{http_get, parse_audit_log, proxy_rewrite, serve_feed, AuditRecord, WireError};
use crate::corpus::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Pilot,
    Study,
}

impl ScenarioName {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pilot" => Some(Self::Pilot),
            "study" => Some(Self::Study),
            _ => None,
        }
    }

    fn root_id(self) -> &'static str {
        match self {
            Self::Pilot => assets::PILOT_ROOT_ID,
            Self::Study => assets::STUDY_ROOT_ID,
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Pilot => write!(f, "pilot"),
            Self::Study => write!(f, "study"),
        }
    }
}

/// Asset paths plus run parameters. Any path left `None` uses the bundled
/// asset; every named file is read and validated before the scenario runs.
#[derive(Debug, Clone, Default)]
pub struct ScenarioConfig {
    pub corpus: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub seed: u64,
    pub wire: bool,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Asset { path: String, source: Box<ScenarioError> },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Detect(#[from] crate::detect::DetectError),
    #[error(transparent)]
    Recommend(#[from] RecommendError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("document \"{0}\" not found in the corpus")]
    MissingDocument(String),
    #[error("wire fetch returned status {0}")]
    BadStatus(u16),
    #[error("wire payload: {0}")]
    BadPayload(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    /// True for failures of input validation (as opposed to runtime/IO).
    pub fn is_validation(&self) -> bool {
        match self {
            ScenarioError::Asset { source, .. } => source.is_validation(),
            ScenarioError::Corpus(CorpusError::Io(_)) => false,
            ScenarioError::Corpus(_)
            | ScenarioError::Rules(_)
            | ScenarioError::Detect(_)
            | ScenarioError::Recommend(_)
            | ScenarioError::Markov(_)
            | ScenarioError::Perturb(_)
            | ScenarioError::MissingDocument(_) => true,
            ScenarioError::Wire(_)
            | ScenarioError::BadStatus(_)
            | ScenarioError::BadPayload(_)
            | ScenarioError::Io(_) => false,
        }
    }
}

/// Round-trip verification outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundTrip {
    /// Replaying the engine's ground-truth log reproduces the delivered
    /// rendering exactly.
    pub ground_truth_replay: bool,
    /// Replaying the detector's recovered report reproduces it too.
    pub detector_replay: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuggestedResponse {
    pub text: String,
    pub stance: crate::recommend::Stance,
    pub rhetoric: crate::recommend::Rhetoric,
    pub scores: Vec<CandidateScore>,
}

/// Everything a scenario run produces.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub scenario: ScenarioName,
    pub seed: u64,
    pub wire: bool,
    pub original: TweetDocument,
    pub perturbed: TweetDocument,
    pub edit_log: Vec<Edit>,
    pub detection: DetectionReport,
    pub suggested_response: SuggestedResponse,
    pub round_trip: RoundTrip,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub participant_grouping: &'static str,
}

const GROUPING_NOTE: &str = "participant grouping by attitude certainty and issue importance \
     is survey-side context; this toolkit records it here and does not simulate it";

struct LoadedAssets {
    corpus: Vec<TweetDocument>,
    rules: RuleSet,
    lexicon: ValenceLexicon,
    keywords: KeywordLexicons,
    candidates: Vec<ResponseCandidate>,
}

fn read_or<F, T>(path: &Option<PathBuf>, bundled: &str, parse: F) -> Result<T, ScenarioError>
where
    F: Fn(&str) -> Result<T, ScenarioError>,
{
    match path {
        None => parse(bundled),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ScenarioError::Asset {
                path: p.display().to_string(),
                source: Box::new(ScenarioError::Io(e)),
            })?;
            parse(&text).map_err(|e| ScenarioError::Asset {
                path: p.display().to_string(),
                source: Box::new(e),
            })
        }
    }
}

fn load_assets(name: ScenarioName, config: &ScenarioConfig) -> Result<LoadedAssets, ScenarioError> {
    let bundled_rules = match name {
        ScenarioName::Pilot => assets::PILOT_RULES_JSON,
        ScenarioName::Study => assets::STUDY_RULES_JSON,
    };
    Ok(LoadedAssets {
        corpus: read_or(&config.corpus, assets::CORPUS_JSONL, |t| {
            parse_corpus_str(t).map_err(Into::into)
        })?,
        rules: read_or(&config.rules, bundled_rules, |t| {
            RuleSet::from_json(t).map_err(Into::into)
        })?,
        lexicon: read_or(&config.lexicon, assets::VALENCE_LEXICON_JSON, |t| {
            ValenceLexicon::from_json(t).map_err(Into::into)
        })?,
        keywords: read_or(&config.keywords, assets::KEYWORD_LEXICONS_JSON, |t| {
            KeywordLexicons::from_json(t).map_err(Into::into)
        })?,
        candidates: read_or(&config.candidates, assets::CANDIDATES_JSONL, |t| {
            crate::recommend::parse_candidates(t).map_err(Into::into)
        })?,
    })
}

/// Default jitter amplitude for the scenario's suggested response.
pub const DEFAULT_EPSILON: f64 = 0.001;

/// Run a named scenario end to end and build its report.
pub fn run_scenario(
    name: ScenarioName,
    config: &ScenarioConfig,
) -> Result<ScenarioReport, ScenarioError> {
    let loaded = load_assets(name, config)?;
    let root_id = name.root_id();
    let original = loaded
        .corpus
        .iter()
        .find(|d| d.id == root_id)
        .cloned()
        .ok_or_else(|| ScenarioError::MissingDocument(root_id.to_string()))?;
    let thread = Thread::lone(original.clone());

    let (perturbed, edit_log) = if config.wire {
        perturb_over_wire(&loaded, &original)?
    } else {
        let (t, log) = apply_ruleset(&thread, &loaded.rules, None)?;
        (t.root, log)
    };

    let detection = detect(&original, &perturbed, &loaded.lexicon);

    let ground_truth_replay =
        replay_edits(&thread, &edit_log).map(|t| t.root == perturbed).unwrap_or(false);
    let detector_replay =
        replay_report(&original, &detection).map(|d| d == perturbed).unwrap_or(false);
    let round_trip = RoundTrip {
        ground_truth_replay,
        detector_replay,
        pass: ground_truth_replay && detector_replay,
    };

    let rec = recommend(
        &perturbed.body,
        &loaded.candidates,
        &loaded.keywords,
        DEFAULT_EPSILON,
        config.seed,
    )?;
    let chosen = &loaded.candidates[rec.chosen];
    let suggested_response = SuggestedResponse {
        text: chosen.text.clone(),
        stance: chosen.stance,
        rhetoric: chosen.rhetoric,
        scores: rec.scores,
    };

    let report = ScenarioReport {
        scenario: name,
        seed: config.seed,
        wire: config.wire,
        original,
        perturbed,
        edit_log,
        detection,
        suggested_response,
        round_trip,
        metadata: Metadata { participant_grouping: GROUPING_NOTE },
    };

    if let Some(dir) = &config.output_dir {
        write_report(dir, &report)?;
    }
    Ok(report)
}

/// Spawn origin + proxy on loopback, fetch the sample through the proxy,
/// and recover the ground-truth log from the audit file.
fn perturb_over_wire(
    loaded: &LoadedAssets,
    original: &TweetDocument,
) -> Result<(TweetDocument, Vec<Edit>), ScenarioError> {
    let origin = serve_feed(loaded.corpus.clone(), "127.0.0.1:0")?;
    let audit = tempfile_path()?;
    let proxy = proxy_rewrite(&origin.authority(), loaded.rules.clone(), "127.0.0.1:0", &audit)?;

    let path = format!("/tweet/{}", original.id);
    let authority = proxy.authority();
    let fetch = thread::spawn(move || http_get(&authority, &path));
    let response = fetch.join().expect("client thread panicked")?;
    if response.status != 200 {
        return Err(ScenarioError::BadStatus(response.status));
    }
    let body = response.body_str().map_err(|e| ScenarioError::BadPayload(e.to_string()))?;
    let docs = parse_corpus_str(body)?;
    let perturbed = docs
        .into_iter()
        .next()
        .ok_or_else(|| ScenarioError::BadPayload("empty proxy response".into()))?;

    proxy.shutdown();
    origin.shutdown();

    let audit_text = std::fs::read_to_string(&audit)?;
    let _ = std::fs::remove_file(&audit);
    let mut edits = Vec::new();
    for record in parse_audit_log(&audit_text)
        .map_err(|e| ScenarioError::BadPayload(format!("audit log: {e}")))?
    {
        match record {
            AuditRecord::Rewrite { tweet_id, edits: e, .. } if tweet_id == original.id => {
                edits.extend(e);
            }
            AuditRecord::Rewrite { .. } => {}
            AuditRecord::Error { error, .. } => {
                return Err(ScenarioError::BadPayload(format!("proxy audit error: {error}")));
            }
        }
    }
    Ok((perturbed, edits))
}

fn tempfile_path() -> Result<PathBuf, std::io::Error> {
    let mut path = std::env::temp_dir();
    let unique = format!(
        "misperceive-audit-{}-{:?}.jsonl",
        std::process::id(),
        std::thread::current().id()
    );
    path.push(unique);
    Ok(path)
}

/// Render the human-readable side of a report.
pub fn render_summary(report: &ScenarioReport) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!("scenario: {}", report.scenario));
    line(format!("mode: {}", if report.wire { "wire (origin + proxy)" } else { "in-process" }));
    line(format!("seed: {}", report.seed));
    line(String::new());
    line(format!("original  [{} | {}]", report.original.author, report.original.id));
    line(format!("  body:     {}", report.original.body));
    line(format!("  hashtags: {}", report.original.hashtags.join(" ")));
    let m = &report.original.metrics;
    line(format!("  metrics:  replies {} · retweets {} · likes {}", m.replies, m.retweets, m.likes));
    line(String::new());
    line("delivered (after manipulation)".to_string());
    line(format!("  body:     {}", report.perturbed.body));
    line(format!("  hashtags: {}", report.perturbed.hashtags.join(" ")));
    let m = &report.perturbed.metrics;
    line(format!("  metrics:  replies {} · retweets {} · likes {}", m.replies, m.retweets, m.likes));
    line(String::new());
    line(format!("ground-truth edits: {}", report.edit_log.len()));
    line(format!(
        "detection: severity {:.4}, valence inversion {}, metric factor {}, hashtag flips {}",
        report.detection.severity,
        report.detection.valence_inversion,
        report
            .detection
            .metric_factor
            .map(|f| f.to_string())
            .unwrap_or_else(|| "none".into()),
        report.detection.hashtag_flips.len(),
    ));
    line(format!(
        "suggested response ({:?}/{:?}): {}",
        report.suggested_response.stance, report.suggested_response.rhetoric,
        report.suggested_response.text,
    ));
    line(format!(
        "round-trip: ground truth {} · detector {} => {}",
        verdict(report.round_trip.ground_truth_replay),
        verdict(report.round_trip.detector_replay),
        if report.round_trip.pass { "PASS" } else { "FAIL" },
    ));
    out
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "MISMATCH"
    }
}

fn write_report(dir: &Path, report: &ScenarioReport) -> Result<(), std::io::Error> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    std::fs::write(dir.join(format!("{}-report.json", report.scenario)), json)?;
    std::fs::write(
        dir.join(format!("{}-report.txt", report.scenario)),
        render_summary(report),
    )?;
    Ok(())
}
