//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p misperceive --test acceptance -- --nocapture`
//! to see the per-criterion lines.

mod common;

use std::time::Instant;

use misperceive::scenario::{ScenarioConfig, ScenarioName};
use misperceive::{
    align, apply_ruleset, chi_square_sf, detect, kruskal_wallis, recommend, replay_edits,
    replay_report, run_scenario, serialize_document, tokenize, Edit, EditOp, EditValue,
    KeywordLexicons, Metrics, ResponseCandidate, Rhetoric, RuleSet, Stance, Thread, Token,
};
use rand::Rng;

// ---------------------------------------------------------------------------
// 1. Study-scenario fidelity
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_study_scenario_fidelity() {
    let started = Instant::now();
    let report = run_scenario(ScenarioName::Study, &ScenarioConfig::default()).unwrap();
    let elapsed = started.elapsed();

    assert_eq!(
        report.perturbed.body,
        "No studies confirm vaccines are safe and effective. #antivax #vaccinesdontwork"
    );
    let swapped_many = report.edit_log.iter().any(|e| {
        e.op == EditOp::Substitute
            && e.original == Some(EditValue::Text("Many".into()))
            && e.replacement == Some(EditValue::Text("No".into()))
    });
    assert!(swapped_many, "word swap Many→No missing from the log");
    assert_eq!(report.perturbed.hashtags, vec!["#antivax", "#vaccinesdontwork"]);
    assert_eq!(report.perturbed.metrics, Metrics::new(32, 160, 548));
    assert!(elapsed.as_secs_f64() < 1.0, "scenario took {elapsed:?}");

    println!("acceptance criterion 1 (study-scenario fidelity): PASS");
}

// ---------------------------------------------------------------------------
// 2. Pilot-scenario fidelity
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_pilot_scenario_fidelity() {
    let report = run_scenario(ScenarioName::Pilot, &ScenarioConfig::default()).unwrap();

    assert_eq!(
        report.perturbed.body,
        "Vaccines are dangerous and they don't work. Saying vaccines cause autism is right. #vaccineswork"
    );
    let has = |op: EditOp, orig: Option<&str>, repl: Option<&str>| {
        report.edit_log.iter().any(|e| {
            e.op == op
                && e.original == orig.map(|t| EditValue::Text(t.into()))
                && e.replacement == repl.map(|t| EditValue::Text(t.into()))
        })
    };
    assert!(has(EditOp::Delete, Some("not"), None), "delete \"not\" missing");
    assert!(has(EditOp::Insert, None, Some("don't")), "insert \"don't\" missing");
    assert!(has(EditOp::Substitute, Some("wrong"), Some("right")), "swap wrong→right missing");
    let original = report.original.metrics;
    assert_eq!(
        report.perturbed.metrics,
        Metrics::new(original.replies * 2, original.retweets * 2, original.likes * 2)
    );

    println!("acceptance criterion 2 (pilot-scenario fidelity): PASS");
}

// ---------------------------------------------------------------------------
// 3. Detector round-trip
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_detector_round_trip() {
    let lexicon = misperceive::assets::valence_lexicon();
    let mut rng = common::rng(0x3aa3);
    for case in 0..1000 {
        let doc = common::random_doc(&mut rng, &format!("doc{case}"));
        let rules = common::random_ruleset(&mut rng, false);
        let thread = Thread::lone(doc.clone());
        let (perturbed, log) = apply_ruleset(&thread, &rules, None)
            .unwrap_or_else(|e| panic!("case {case}: {e}"));

        // ground truth replays byte-for-byte
        let replayed = replay_edits(&thread, &log).unwrap_or_else(|e| panic!("case {case}: {e}"));
        assert_eq!(replayed, perturbed, "case {case}: ground-truth replay diverged");

        // the recovered report replays byte-for-byte too
        let report = detect(&doc, &perturbed.root, &lexicon);
        let recovered = replay_report(&doc, &report)
            .unwrap_or_else(|e| panic!("case {case}: recovered replay failed: {e}\nrules {rules:?}\noriginal {:?}\ndelivered {:?}", doc.body, perturbed.root.body));
        assert_eq!(
            recovered, perturbed.root,
            "case {case}: recovered replay diverged\nrules {rules:?}"
        );
    }

    // zero false positives across the bundled corpus
    for doc in misperceive::assets::bundled_corpus() {
        let report = detect(&doc, &doc, &lexicon);
        assert_eq!(report.severity, 0.0, "false positive on {}", doc.id);
    }

    println!("acceptance criterion 3 (detector round-trip, 1000 cases): PASS");
}

// ---------------------------------------------------------------------------
// 4. Alignment optimality (exhaustive)
// ---------------------------------------------------------------------------

fn token_lists_up_to(len: usize, alphabet: &[&str]) -> Vec<Vec<Token>> {
    let mut lists: Vec<Vec<String>> = vec![Vec::new()];
    let mut all: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for list in &lists {
            for sym in alphabet {
                let mut longer = list.clone();
                longer.push(sym.to_string());
                next.push(longer);
            }
        }
        all.extend(next.iter().cloned());
        lists = next;
    }
    all.iter().map(|words| tokenize(&words.join(" "))).collect()
}

fn oracle_distance(a: &[Token], b: &[Token]) -> usize {
    let (m, n) = (a.len(), b.len());
    let mut d = vec![vec![0usize; n + 1]; m + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=m {
        for j in 1..=n {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1].text != b[j - 1].text);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[m][n]
}

fn replay_on_texts(original: &[Token], script: &[Edit]) -> Vec<String> {
    let mut seq: Vec<String> = original.iter().map(|t| t.text.clone()).collect();
    for edit in script {
        let idx = edit.token_index.expect("script edits carry indices");
        let text = |v: &Option<EditValue>| match v {
            Some(EditValue::Text(t)) => t.clone(),
            other => panic!("unexpected payload {other:?}"),
        };
        match edit.op {
            EditOp::Substitute => seq[idx] = text(&edit.replacement),
            EditOp::Delete => {
                seq.remove(idx);
            }
            EditOp::Insert => seq.insert(idx, text(&edit.replacement)),
            other => panic!("unexpected op {other:?}"),
        }
    }
    seq
}

#[test]
fn criterion_4_alignment_optimality_exhaustive() {
    // every {a,b}-list of length 0..=8: 1 + 2 + 4 + ... + 256 = 511
    let lists = token_lists_up_to(8, &["a", "b"]);
    assert_eq!(lists.len(), 511);

    let mut checked = 0usize;
    for a in &lists {
        for b in &lists {
            let script = align(a, b);
            let expected = oracle_distance(a, b);
            assert_eq!(script.len(), expected, "cost mismatch for {a:?} vs {b:?}");
            let replayed = replay_on_texts(a, &script);
            let want: Vec<String> = b.iter().map(|t| t.text.clone()).collect();
            assert_eq!(replayed, want, "script does not transform {a:?} into {b:?}");
            checked += 1;
        }
    }
    assert_eq!(checked, 511 * 511);

    println!("acceptance criterion 4 (alignment optimality, {checked} exhaustive pairs): PASS");
}

// ---------------------------------------------------------------------------
// 5. Wire equivalence
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_wire_equivalence() {
    let corpus = misperceive::assets::bundled_corpus();
    let origin = misperceive::serve_feed(corpus.clone(), "127.0.0.1:0").unwrap();

    // study proxy: every document equals the in-process rewrite
    let audit = tempfile::NamedTempFile::new().unwrap();
    let proxy = misperceive::proxy_rewrite(
        &origin.authority(),
        misperceive::assets::study_rules(),
        "127.0.0.1:0",
        audit.path(),
    )
    .unwrap();
    for doc in &corpus {
        let via_proxy =
            misperceive::http_get(&proxy.authority(), &format!("/tweet/{}", doc.id)).unwrap();
        assert_eq!(via_proxy.status, 200);
        let (expected_thread, edits) = apply_ruleset(
            &Thread::lone(doc.clone()),
            &misperceive::assets::study_rules(),
            None,
        )
        .unwrap();
        let expected = if edits.is_empty() {
            let direct = misperceive::http_get(&origin.authority(), &format!("/tweet/{}", doc.id))
                .unwrap();
            direct.body
        } else {
            let mut line = serialize_document(&expected_thread.root).into_bytes();
            line.push(b'\n');
            line
        };
        assert_eq!(via_proxy.body, expected, "document {}", doc.id);
    }
    proxy.shutdown();

    // empty ruleset: byte-identical pass-through
    let audit2 = tempfile::NamedTempFile::new().unwrap();
    let passthrough = misperceive::proxy_rewrite(
        &origin.authority(),
        RuleSet::default(),
        "127.0.0.1:0",
        audit2.path(),
    )
    .unwrap();
    let direct_feed = misperceive::http_get(&origin.authority(), "/feed").unwrap();
    let proxied_feed = misperceive::http_get(&passthrough.authority(), "/feed").unwrap();
    assert_eq!(direct_feed.body, proxied_feed.body);
    for doc in &corpus {
        let path = format!("/tweet/{}", doc.id);
        let direct = misperceive::http_get(&origin.authority(), &path).unwrap();
        let proxied = misperceive::http_get(&passthrough.authority(), &path).unwrap();
        assert_eq!(direct.body, proxied.body, "pass-through differs for {}", doc.id);
    }
    assert!(std::fs::read_to_string(audit2.path()).unwrap().is_empty());
    passthrough.shutdown();

    // 100 concurrent fetches: consistent payloads, one audit entry each
    let audit3 = tempfile::NamedTempFile::new().unwrap();
    let concurrent = misperceive::proxy_rewrite(
        &origin.authority(),
        misperceive::assets::study_rules(),
        "127.0.0.1:0",
        audit3.path(),
    )
    .unwrap();
    let (expected_thread, expected_edits) = apply_ruleset(
        &Thread::lone(corpus.iter().find(|d| d.id == "study-root").unwrap().clone()),
        &misperceive::assets::study_rules(),
        None,
    )
    .unwrap();
    let mut expected_body = serialize_document(&expected_thread.root).into_bytes();
    expected_body.push(b'\n');

    let authority = concurrent.authority();
    let handles: Vec<_> = (0..100)
        .map(|_| {
            let authority = authority.clone();
            std::thread::spawn(move ||
                misperceive::http_get(&authority, "/tweet/study-root").unwrap()
            )
        })
        .collect();
    for handle in handles {
        let response = handle.join().unwrap();
        assert_eq!(response.status, 200);
        assert_eq!(response.body, expected_body, "interleaved or corrupt payload");
    }
    concurrent.shutdown();
    origin.shutdown();

    let records = misperceive::parse_audit_log(&std::fs::read_to_string(audit3.path()).unwrap())
        .unwrap();
    assert_eq!(records.len(), 100, "one audit entry per rewritten response");
    let mut seen_requests = std::collections::HashSet::new();
    for record in records {
        match record {
            misperceive::AuditRecord::Rewrite { request_id, tweet_id, edits } => {
                assert!(seen_requests.insert(request_id), "duplicate request id");
                assert_eq!(tweet_id, "study-root");
                assert_eq!(edits, expected_edits);
            }
            other => panic!("unexpected audit record {other:?}"),
        }
    }

    println!("acceptance criterion 5 (wire equivalence + 100 concurrent fetches): PASS");
}

// ---------------------------------------------------------------------------
// 6. Statistics
// ---------------------------------------------------------------------------

/// ln Γ(df/2) from closed forms: Γ(n) = (n−1)!, Γ(n+½) = (2n)!√π/(4ⁿn!).
fn ln_gamma_half(df: usize) -> f64 {
    let ln_factorial = |n: usize| (1..=n).map(|i| (i as f64).ln()).sum::<f64>();
    if df.is_multiple_of(2) {
        ln_factorial(df / 2 - 1)
    } else {
        let n = df / 2; // df = 2n + 1
        ln_factorial(2 * n) - (n as f64) * 4.0f64.ln() - ln_factorial(n)
            + 0.5 * std::f64::consts::PI.ln()
    }
}

/// High-precision quadrature oracle for the chi-square upper tail:
/// composite Simpson over [x, x+1500], refined until convergence.
fn chi_sf_oracle(x: f64, df: usize) -> f64 {
    let a = df as f64 / 2.0;
    let log_norm = a * 2.0f64.ln() + ln_gamma_half(df);
    let density = |t: f64| {
        if t <= 0.0 {
            0.0
        } else {
            ((a - 1.0) * t.ln() - t / 2.0 - log_norm).exp()
        }
    };
    let upper = x + 1500.0;
    let simpson = |n: usize| {
        let h = (upper - x) / n as f64;
        let mut sum = density(x) + density(upper);
        for k in 1..n {
            let t = x + k as f64 * h;
            sum += density(t) * if k % 2 == 0 { 2.0 } else { 4.0 };
        }
        sum * h / 3.0
    };
    let mut n = 2048;
    let mut prev = simpson(n);
    loop {
        n *= 2;
        let next = simpson(n);
        if (next - prev).abs() <= 1e-12 * next.abs() || n >= 1 << 22 {
            return next;
        }
        prev = next;
    }
}

#[test]
fn criterion_6_statistics() {
    // H and p for the two separated groups, against hand-computed ranks
    // (mean ranks 2 and 5 give H = 27/7) and the quadrature oracle
    let result = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
    assert!((result.h - 3.857).abs() < 1e-3, "h = {}", result.h);
    assert!((result.h - 27.0 / 7.0).abs() < 1e-12);
    assert_eq!(result.df, 1);
    assert!((result.p - 0.0495).abs() < 1e-3, "p = {}", result.p);
    let oracle_p = chi_sf_oracle(27.0 / 7.0, 1);
    assert!((result.p - oracle_p).abs() < 1e-8, "p {} vs oracle {}", result.p, oracle_p);

    // df = 2 closed form to 1e-9
    for step in 1..=100 {
        let x = step as f64 * 0.2;
        let sf = chi_square_sf(x, 2).unwrap();
        assert!((sf - (-x / 2.0).exp()).abs() < 1e-9, "x = {x}");
    }

    // survival function against the quadrature oracle
    for &df in &[1usize, 2, 3, 5, 10, 30] {
        for &x in &[0.5, 1.0, 2.0, 3.857, 5.0, 10.0, 20.0, 50.0, 100.0] {
            let sf = chi_square_sf(x, df).unwrap();
            let oracle = chi_sf_oracle(x, df);
            let rel = (sf - oracle).abs() / oracle.max(f64::MIN_POSITIVE);
            assert!(rel <= 1e-8, "df {df} x {x}: sf {sf} oracle {oracle} rel {rel}");
        }
    }

    // scale and permutation invariance over 1000 random datasets
    let mut rng = common::rng(0x57a7);
    for case in 0..1000 {
        let group_count = rng.random_range(2..=5);
        let groups: Vec<Vec<f64>> = (0..group_count)
            .map(|_| {
                (0..rng.random_range(1..=8))
                    .map(|_| rng.random_range(1..=7) as f64)
                    .collect()
            })
            .collect();
        if groups.iter().map(Vec::len).sum::<usize>() < 3 {
            continue;
        }
        let base = kruskal_wallis(&groups).unwrap();

        let transformed: Vec<Vec<f64>> = groups
            .iter()
            .map(|g| g.iter().map(|&v| v * v * v + 2.0 * v + 1.0).collect())
            .collect();
        let t = kruskal_wallis(&transformed).unwrap();
        assert!((base.h - t.h).abs() < 1e-9, "case {case}: scale invariance");
        assert!((base.p - t.p).abs() < 1e-9, "case {case}: scale invariance (p)");

        let mut reversed = groups.clone();
        reversed.reverse();
        let r = kruskal_wallis(&reversed).unwrap();
        assert!((base.h - r.h).abs() < 1e-9, "case {case}: permutation invariance");
        assert!((base.p - r.p).abs() < 1e-9, "case {case}: permutation invariance (p)");
    }

    println!("acceptance criterion 6 (statistics vs independent oracles): PASS");
}

// ---------------------------------------------------------------------------
// 7. Markov
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_markov_matches_brute_force() {
    let mut rng = common::rng(0x3a5c0f);
    for case in 0..300 {
        let docs: Vec<_> = (0..rng.random_range(1..=5))
            .map(|i| common::random_doc(&mut rng, &format!("m{case}-{i}")))
            .collect();

        // independent bigram counter over folded word/hashtag/number tokens
        let mut oracle: std::collections::BTreeMap<(String, String), u64> =
            std::collections::BTreeMap::new();
        let mut totals: std::collections::BTreeMap<String, u64> =
            std::collections::BTreeMap::new();
        for doc in &docs {
            let tokens: Vec<String> = tokenize(&doc.body)
                .iter()
                .filter(|t| {
                    matches!(
                        t.kind,
                        misperceive::TokenKind::Word
                            | misperceive::TokenKind::Hashtag
                            | misperceive::TokenKind::Number
                    )
                })
                .map(|t| t.text.to_lowercase())
                .collect();
            for w in tokens.windows(2) {
                *oracle.entry((w[0].clone(), w[1].clone())).or_insert(0) += 1;
                *totals.entry(w[0].clone()).or_insert(0) += 1;
            }
        }

        let Ok(model) = misperceive::train(&docs, 0.0) else {
            assert!(oracle.is_empty());
            continue;
        };

        let mut model_pairs: std::collections::BTreeMap<(String, String), u64> =
            std::collections::BTreeMap::new();
        for (prev, nexts) in model.counts() {
            for (next, count) in nexts {
                model_pairs.insert((prev.clone(), next.clone()), *count);
            }
        }
        assert_eq!(model_pairs, oracle, "case {case}: counts differ");

        // probabilities are the exact count ratios
        for ((prev, next), count) in &oracle {
            let expected = *count as f64 / totals[prev] as f64;
            assert_eq!(model.transition_prob(prev, next), expected, "case {case}");
        }

        // per-state normalization within 1e-9 for several smoothings
        for &k in &[0.0, 0.5, 1.7] {
            let smoothed = misperceive::train(&docs, k).unwrap();
            for prev in smoothed.vocab() {
                let sum: f64 = smoothed
                    .vocab()
                    .iter()
                    .map(|next| smoothed.transition_prob(prev, next))
                    .sum();
                if sum != 0.0 {
                    assert!((sum - 1.0).abs() < 1e-9, "case {case} prev {prev} k {k}");
                }
            }
        }
    }

    println!("acceptance criterion 7 (markov vs brute-force bigrams, 300 corpora): PASS");
}

// ---------------------------------------------------------------------------
// 8. Recommender
// ---------------------------------------------------------------------------

fn keyword_instance(
    rng: &mut impl Rng,
) -> (KeywordLexicons, Vec<ResponseCandidate>, Vec<Vec<u8>>, String, Vec<u8>) {
    let dim = rng.random_range(2..=10);
    let pro_len = rng.random_range(1..dim);
    let keywords: Vec<String> = (0..dim).map(|i| format!("kw{i}")).collect();
    let lexicons = KeywordLexicons {
        pro: keywords[..pro_len].to_vec(),
        anti: keywords[pro_len..].to_vec(),
    };
    let candidate_count = rng.random_range(1..=6);
    let mut candidates = Vec::new();
    let mut vectors = Vec::new();
    for _ in 0..candidate_count {
        let mut text_parts = Vec::new();
        let mut vector = vec![0u8; dim];
        for (i, kw) in keywords.iter().enumerate() {
            if rng.random_bool(0.4) {
                text_parts.push(kw.clone());
                vector[i] = 1;
            }
        }
        if text_parts.is_empty() {
            text_parts.push("filler".to_string());
        }
        candidates.push(ResponseCandidate {
            text: text_parts.join(" "),
            stance: Stance::Pro,
            rhetoric: Rhetoric::Authority,
        });
        vectors.push(vector);
    }
    let mut input_parts = Vec::new();
    let mut input_vector = vec![0u8; dim];
    for (i, kw) in keywords.iter().enumerate() {
        if rng.random_bool(0.4) {
            input_parts.push(kw.clone());
            input_vector[i] = 1;
        }
    }
    let input = if input_parts.is_empty() { "nothing".to_string() } else { input_parts.join(" ") };
    (lexicons, candidates, vectors, input, input_vector)
}

fn oracle_nearest(vectors: &[Vec<u8>], input: &[u8]) -> usize {
    let mut best = (f64::INFINITY, 0usize);
    for (i, v) in vectors.iter().enumerate() {
        let d2: f64 = v
            .iter()
            .zip(input)
            .map(|(&a, &b)| {
                let d = f64::from(a) - f64::from(b);
                d * d
            })
            .sum();
        let d = d2.sqrt();
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

#[test]
fn criterion_8_recommender_oracle_and_jitter() {
    // ε = 0 equals the brute-force nearest neighbor with list-order ties
    let mut rng = common::rng(0x8ec0);
    for case in 0..1000 {
        let (lexicons, candidates, vectors, input, input_vector) = keyword_instance(&mut rng);
        let rec = recommend(&input, &candidates, &lexicons, 0.0, 0).unwrap();
        let expected = oracle_nearest(&vectors, &input_vector);
        assert_eq!(rec.chosen, expected, "case {case}");
    }

    // jitter soundness over 10,000 seeded trials
    let mut rng = common::rng(0x8ec1);
    for trial in 0..10_000 {
        let (lexicons, candidates, _, input, _) = keyword_instance(&mut rng);
        let epsilon = rng.random_range(0.0001..0.75);
        let seed = rng.random_range(0..u64::MAX);
        let rec = recommend(&input, &candidates, &lexicons, epsilon, seed).unwrap();
        let min = rec.scores.iter().map(|s| s.distance).fold(f64::INFINITY, f64::min);
        let chosen = rec.scores[rec.chosen].distance;
        assert!(
            chosen < min + epsilon,
            "trial {trial}: chosen {chosen} exceeds min {min} + ε {epsilon}"
        );
    }

    // fixed seed, identical output
    let lexicons = misperceive::assets::keyword_lexicons();
    let candidates = misperceive::assets::candidates();
    let a = recommend("vaccines are dangerous #antivax", &candidates, &lexicons, 0.01, 1234)
        .unwrap();
    let b = recommend("vaccines are dangerous #antivax", &candidates, &lexicons, 0.01, 1234)
        .unwrap();
    assert_eq!(a, b);

    println!("acceptance criterion 8 (recommender oracle + 10k jitter trials): PASS");
}
