//! Command-line front end: wires the corpus, rules, proxy, detector,
//! recommender, and statistics into reproducible runs.
//!
//! Exit codes: 0 on success, 1 when an input fails validation, 2 on
//! runtime or IO failure. Errors print as a single `error: ...` line on
//! stderr.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use misperceive::scenario::{ScenarioConfig, ScenarioName};
use misperceive::{
    detect, group_threads, kruskal_wallis, parse_corpus_str, recommend, serialize_corpus,
    thread_for, CorpusError, KeywordLexicons, MarkovModel, MarkovReplacer, ReplacementSource,
    RuleSet, Thread, TweetDocument, ValenceLexicon, WireError,
};

#[derive(Parser)]
#[command(
    name = "misperceive",
    version,
    about = "Simulate, detect, and analyze in-transit manipulation of social feed documents"
)]
struct Cli {
    /// Seed for any randomized step (jittered recommendations)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Directory where reports and logs are written
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a rule set to corpus documents and print the rewritten corpus
    Perturb {
        /// JSON Lines corpus file
        #[arg(long)]
        corpus: PathBuf,
        /// Rule set file ({"rules": [...]})
        #[arg(long)]
        rules: PathBuf,
        /// Only rewrite the thread rooted at this document id
        #[arg(long)]
        doc: Option<String>,
        /// Write the ground-truth edit log (JSON) to this file
        #[arg(long)]
        log: Option<PathBuf>,
        /// Markov model file backing "&markov" replacements
        #[arg(long)]
        markov: Option<PathBuf>,
        /// Candidate tokens for "&markov" replacements, one per line
        #[arg(long, requires = "markov")]
        markov_candidates: Option<PathBuf>,
    },
    /// Compare authentic documents against delivered renderings
    Detect {
        /// Corpus file with the authentic documents
        #[arg(long)]
        original: PathBuf,
        /// Corpus file with the delivered renderings (matched by id)
        #[arg(long)]
        delivered: PathBuf,
        /// Valence lexicon file (defaults to the bundled one)
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Suggest the best ready-made reply to a tweet text
    Recommend {
        /// The hostile-opinion-climate text to respond to
        #[arg(long)]
        input: String,
        /// JSON Lines candidates file (defaults to the bundled set)
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Keyword lexicons file (defaults to the bundled one)
        #[arg(long)]
        lexicons: Option<PathBuf>,
        /// Jitter amplitude added to each distance
        #[arg(long, default_value_t = 0.001)]
        epsilon: f64,
    },
    /// Kruskal-Wallis test over groups of ordinal values
    Kw {
        /// JSON file holding an array of arrays of numbers
        #[arg(long)]
        groups: PathBuf,
    },
    /// Train an order-1 transition model from a corpus
    TrainMarkov {
        #[arg(long)]
        corpus: PathBuf,
        /// Output model file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add-k smoothing
        #[arg(long, default_value_t = 0.0)]
        smoothing: f64,
    },
    /// Serve a corpus as the authentic feed origin
    Serve {
        /// Corpus file (defaults to the bundled sample corpus)
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:7800")]
        bind: String,
    },
    /// Run the rewriting man-in-the-middle proxy
    Proxy {
        /// Upstream origin as host:port
        #[arg(long)]
        upstream: String,
        /// Rule set file
        #[arg(long)]
        rules: PathBuf,
        /// Audit log path (JSON Lines of ground-truth edits)
        #[arg(long, default_value = "audit.jsonl")]
        audit: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7801")]
        bind: String,
        /// Markov model file backing "&markov" replacements
        #[arg(long)]
        markov: Option<PathBuf>,
        /// Candidate tokens for "&markov" replacements, one per line
        #[arg(long, requires = "markov")]
        markov_candidates: Option<PathBuf>,
    },
    /// Run a bundled end-to-end scenario and write its report
    RunScenario {
        /// Which scenario: "pilot" or "study"
        name: String,
        /// Perturb over a live origin + proxy instead of in process
        #[arg(long)]
        wire: bool,
        /// Override the bundled corpus
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Override the bundled rule set
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Override the bundled valence lexicon
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Override the bundled keyword lexicons
        #[arg(long)]
        keywords: Option<PathBuf>,
        /// Override the bundled response candidates
        #[arg(long)]
        candidates: Option<PathBuf>,
    },
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn load_corpus(path: &Path) -> Result<Vec<TweetDocument>, CliError> {
    let text = read_file(path)?;
    parse_corpus_str(&text).map_err(|e| match e {
        CorpusError::Io(io) => runtime(io),
        other => CliError::Validation(format!("{}: {other}", path.display())),
    })
}

fn load_rules(path: &Path) -> Result<RuleSet, CliError> {
    let text = read_file(path)?;
    RuleSet::from_json(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn load_replacer(
    model_path: &Path,
    candidates_path: Option<&Path>,
) -> Result<MarkovReplacer, CliError> {
    let model = MarkovModel::from_json(&read_file(model_path)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", model_path.display())))?;
    let candidates: Vec<String> = match candidates_path {
        Some(p) => read_file(p)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
        None => model.vocab().iter().cloned().collect(),
    };
    MarkovReplacer::new(model, candidates).map_err(validation)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Perturb { corpus, rules, doc, log, markov, markov_candidates } => {
            let docs = load_corpus(&corpus)?;
            let rules = load_rules(&rules)?;
            let replacer = markov
                .as_deref()
                .map(|m| load_replacer(m, markov_candidates.as_deref()))
                .transpose()?;
            let replacer_ref = replacer.as_ref().map(|r| r as &dyn ReplacementSource);

            let threads: Vec<Thread> = match &doc {
                Some(id) => vec![thread_for(&docs, id).ok_or_else(|| {
                    CliError::Validation(format!("document \"{id}\" not found in corpus"))
                })?],
                None => group_threads(&docs),
            };

            let mut rewritten: BTreeMap<String, TweetDocument> = BTreeMap::new();
            let mut log_entries = Vec::new();
            for thread in &threads {
                let (perturbed, edits) =
                    misperceive::apply_ruleset(thread, &rules, replacer_ref)
                        .map_err(validation)?;
                if !edits.is_empty() {
                    log_entries.push(serde_json::json!({
                        "root_id": perturbed.root.id,
                        "edits": edits,
                    }));
                }
                rewritten.insert(perturbed.root.id.clone(), perturbed.root.clone());
                for c in perturbed.comments {
                    rewritten.insert(c.id.clone(), c);
                }
            }

            let output: Vec<TweetDocument> = docs
                .iter()
                .map(|d| rewritten.get(&d.id).cloned().unwrap_or_else(|| d.clone()))
                .collect();
            print!("{}", serialize_corpus(&output));

            if let Some(log_path) = log {
                let text = serde_json::to_string_pretty(&log_entries).expect("edit log is JSON");
                std::fs::write(&log_path, text).map_err(runtime)?;
            }
            Ok(())
        }
        Command::Detect { original, delivered, lexicon } => {
            let originals = load_corpus(&original)?;
            let delivered_docs = load_corpus(&delivered)?;
            let lexicon = match lexicon {
                Some(p) => ValenceLexicon::from_json(&read_file(&p)?)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?,
                None => misperceive::assets::valence_lexicon(),
            };
            let by_id: BTreeMap<&str, &TweetDocument> =
                delivered_docs.iter().map(|d| (d.id.as_str(), d)).collect();
            let pairs: Vec<(&TweetDocument, &TweetDocument)> = originals
                .iter()
                .filter_map(|o| by_id.get(o.id.as_str()).map(|d| (o, *d)))
                .collect();
            if pairs.is_empty() {
                return Err(CliError::Validation(
                    "no document ids are shared between the two files".into(),
                ));
            }
            if pairs.len() == 1 {
                let report = detect(pairs[0].0, pairs[0].1, &lexicon);
                println!("{}", serde_json::to_string_pretty(&report).expect("report is JSON"));
            } else {
                for (o, d) in pairs {
                    let report = detect(o, d, &lexicon);
                    let line = serde_json::json!({ "id": o.id, "report": report });
                    println!("{line}");
                }
            }
            Ok(())
        }
        Command::Recommend { input, candidates, lexicons, epsilon } => {
            let cands = match candidates {
                Some(p) => misperceive::parse_candidates(&read_file(&p)?)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?,
                None => misperceive::assets::candidates(),
            };
            let lex = match lexicons {
                Some(p) => KeywordLexicons::from_json(&read_file(&p)?)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?,
                None => misperceive::assets::keyword_lexicons(),
            };
            let rec = recommend(&input, &cands, &lex, epsilon, cli.seed).map_err(validation)?;
            println!("{}", cands[rec.chosen].text);
            println!();
            println!("{:<5} {:>9} {:>9} {:>9}  text", "idx", "distance", "jitter", "score");
            for s in &rec.scores {
                let marker = if s.index == rec.chosen { "*" } else { " " };
                println!(
                    "{marker}{:<4} {:>9.4} {:>9.6} {:>9.4}  {}",
                    s.index, s.distance, s.jitter, s.score, cands[s.index].text
                );
            }
            Ok(())
        }
        Command::Kw { groups } => {
            let text = read_file(&groups)?;
            let data: Vec<Vec<f64>> = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", groups.display())))?;
            let result = kruskal_wallis(&data).map_err(validation)?;
            println!("{}", serde_json::to_string(&result).expect("result is JSON"));
            Ok(())
        }
        Command::TrainMarkov { corpus, out, smoothing } => {
            let docs = load_corpus(&corpus)?;
            let model = misperceive::train(&docs, smoothing).map_err(validation)?;
            let json = model.to_json();
            match out {
                Some(p) => std::fs::write(&p, json).map_err(runtime)?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::Serve { corpus, bind } => {
            let docs = match corpus {
                Some(p) => load_corpus(&p)?,
                None => misperceive::assets::bundled_corpus(),
            };
            let server = misperceive::serve_feed(docs, &bind).map_err(wire_error)?;
            eprintln!("origin listening on {}", server.authority());
            park_forever();
        }
        Command::Proxy { upstream, rules, audit, bind, markov, markov_candidates } => {
            let rules = load_rules(&rules)?;
            let replacer = markov
                .as_deref()
                .map(|m| load_replacer(m, markov_candidates.as_deref()))
                .transpose()?
                .map(|r| Arc::new(r) as Arc<dyn ReplacementSource + Send + Sync>);
            let server =
                misperceive::proxy_rewrite_with(&upstream, rules, &bind, &audit, replacer)
                    .map_err(wire_error)?;
            eprintln!("proxy listening on {} (upstream {upstream})", server.authority());
            park_forever();
        }
        Command::RunScenario { name, wire, corpus, rules, lexicon, keywords, candidates } => {
            let scenario = ScenarioName::parse(&name).ok_or_else(|| {
                CliError::Validation(format!("unknown scenario \"{name}\" (try pilot or study)"))
            })?;
            let config = ScenarioConfig {
                corpus,
                rules,
                lexicon,
                keywords,
                candidates,
                seed: cli.seed,
                wire,
                output_dir: cli.output.clone(),
            };
            let report = misperceive::run_scenario(scenario, &config).map_err(|e| {
                if e.is_validation() {
                    validation(e)
                } else {
                    runtime(e)
                }
            })?;
            print!("{}", misperceive::render_summary(&report));
            if !report.round_trip.pass {
                return Err(CliError::Runtime("round-trip verification failed".into()));
            }
            Ok(())
        }
    }
}

fn wire_error(e: WireError) -> CliError {
    match e {
        WireError::Config(_) => validation(e),
        other => runtime(other),
    }
}

fn park_forever() -> ! {
    // keep serving until the process is killed
    loop {
        std::thread::park();
    }
}
