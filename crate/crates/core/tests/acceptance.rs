//! Acceptance gate. Runs without the libtest harness so that every criterion prints one
//! PASS/FAIL line; the process exits nonzero if any criterion fails or exceeds its limit.
//!
//! Set UPDATE_GOLDEN=1 to rewrite the golden prompt files instead of comparing them.
//! Set DATADISC_LIVE=1 (plus a credential) to run the non-gating live check.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use datadisc::backend::{load_transcript, HttpBackend, HttpConfig, Role, ScriptedBackend};
use datadisc::eval::{
    aggregate, per_class_stats, run_benchmark, weighted_metrics, BenchmarkConfig, Labels, Manifest,
    Report, System,
};
use datadisc::harness::{
    check_column_types, check_table_class, parse_column_types, parse_table_class, run_column_type_task,
    run_join_task, run_table_class_task, run_table_pipeline, ColumnAssignment, HarnessError, PipelineConfig,
};
use datadisc::ontology::{load_ontology, Ontology, OntologyFormat, TermKind};
use datadisc::prompt::{assemble, column_type_prompt, join_prompt, table_class_prompt, PromptConfig};
use datadisc::table::Table;

type Outcome = Result<String, String>;
/// Number, name, time limit and check.
type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($msg)+));
        }
    };
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn fixture(rel: &str) -> PathBuf {
    fixtures().join(rel)
}

fn table(rel: &str) -> Table {
    let path = fixture(rel);
    let name = path.file_stem().unwrap().to_str().unwrap().to_owned();
    Table::from_csv_str(name, &std::fs::read_to_string(path).unwrap(), true).unwrap()
}

fn ontology() -> Ontology {
    load_ontology(
        &std::fs::read_to_string(fixture("ontology.tsv")).unwrap(),
        OntologyFormat::TabSeparatedKindIri,
    )
    .unwrap()
}

fn allowed_classes() -> Vec<String> {
    std::fs::read_to_string(fixture("classes.txt"))
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect()
}

/// Weighted precision, recall and F1 computed straight from the definitions: for each
/// class c, precision = |pred=c and gold=c| / |pred=c|, recall = |pred=c and gold=c| /
/// |gold=c|, each weighted by |gold=c| / n. `None` predicts nothing.
fn brute_weighted(preds: &[Option<&str>], golds: &[&str]) -> (f64, f64, f64) {
    let classes: BTreeSet<&str> = golds.iter().copied().chain(preds.iter().flatten().copied()).collect();
    let n = golds.len() as f64;
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for c in classes {
        let hit = preds.iter().zip(golds).filter(|(pr, g)| **pr == Some(c) && **g == c).count() as f64;
        let predicted = preds.iter().filter(|pr| **pr == Some(c)).count() as f64;
        let support = golds.iter().filter(|g| **g == c).count() as f64;
        let prec = if predicted > 0.0 { hit / predicted } else { 0.0 };
        let rec = if support > 0.0 { hit / support } else { 0.0 };
        let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        p += support / n * prec;
        r += support / n * rec;
        f += support / n * f1;
    }
    (p, r, f)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for instance in 0..200 {
        let k = rng.gen_range(1..=10);
        let n = rng.gen_range(1..=1000);
        let label = |rng: &mut ChaCha8Rng| format!("c{}", rng.gen_range(0..k));
        let golds: Vec<String> = (0..n).map(|_| label(&mut rng)).collect();
        // Mix of accurate and noisy predictors so scores span the range.
        let accuracy: f64 = rng.gen();
        let preds: Vec<String> = golds
            .iter()
            .map(|g| if rng.gen_bool(accuracy) { g.clone() } else { label(&mut rng) })
            .collect();
        let m = weighted_metrics(&per_class_stats(&preds, &golds).unwrap()).unwrap();
        let pr: Vec<Option<&str>> = preds.iter().map(|p| Some(p.as_str())).collect();
        let gr: Vec<&str> = golds.iter().map(String::as_str).collect();
        let (p, r, f) = brute_weighted(&pr, &gr);
        for (got, want) in [(m.precision, p), (m.recall, r), (m.f1, f)] {
            let d = (got - want).abs();
            worst = worst.max(d);
            ensure!(d <= 1e-12, "instance {instance}: {got} vs {want}");
        }
    }
    Ok(format!("200 instances, max deviation {worst:.1e}"))
}

fn golden_prompts() -> Vec<(String, String)> {
    let ev = table("ev.csv");
    let reg = table("car_registration.csv");
    let classes = allowed_classes();
    let notes = "df1 describes instances of https://dbpedia.org/ontology/ElectricVehicle.";
    let mut out = Vec::new();
    for bits in 0..16u8 {
        let (d, m, p, k) = (bits & 8 != 0, bits & 4 != 0, bits & 2 != 0, bits & 1 != 0);
        let cfg = PromptConfig {
            include_demonstration: d,
            include_metadata: m,
            include_prefix: p,
            ..PromptConfig::default()
        };
        let tag = format!("D{}M{}P{}K{}", d as u8, m as u8, p as u8, k as u8);
        let list = k.then_some(classes.as_slice());
        out.push((
            format!("table-class-{tag}.txt"),
            assemble(&table_class_prompt(&ev, list, &cfg).unwrap()),
        ));
        // Join prompts have no demonstration; column-type prompts have no prefix or
        // task knowledge. Flags a prompt lacks are left out of the golden set.
        if !d {
            out.push((
                format!("join-{tag}.txt"),
                assemble(&join_prompt(&ev, &reg, &cfg, k.then_some(notes)).unwrap()),
            ));
        }
        if !p && !k {
            out.push((
                format!("column-type-D{}M{}.txt", d as u8, m as u8),
                assemble(&column_type_prompt(&ev, &cfg).unwrap()),
            ));
        }
    }
    out
}

fn criterion_2() -> Outcome {
    let dir = fixture("golden");
    let prompts = golden_prompts();
    if std::env::var_os("UPDATE_GOLDEN").is_some_and(|v| v == "1") {
        std::fs::create_dir_all(&dir).unwrap();
        for (name, text) in &prompts {
            std::fs::write(dir.join(name), text).unwrap();
        }
        return Ok(format!("rewrote {} golden files", prompts.len()));
    }
    let mut mismatched = Vec::new();
    for (name, text) in &prompts {
        match std::fs::read_to_string(dir.join(name)) {
            Ok(golden) if golden == *text => {}
            _ => mismatched.push(name.as_str()),
        }
    }
    let distinct: BTreeSet<&String> = prompts.iter().map(|(_, t)| t).collect();
    ensure!(mismatched.is_empty(), "mismatched: {}", mismatched.join(", "));
    ensure!(distinct.len() == prompts.len(), "two flag combinations produced the same prompt");
    Ok(format!("{} prompts byte-identical", prompts.len()))
}

fn criterion_3() -> Outcome {
    let onto = ontology();
    let animals = table("animals.csv");
    let transcript = std::fs::read_to_string(fixture("transcripts/animals_anchoring.jsonl")).unwrap();
    let run = |config: &PipelineConfig| {
        let backend = load_transcript(&transcript).unwrap();
        run_table_pipeline(&animals, &onto, &backend, config, None).unwrap()
    };
    let labels = |a: &[ColumnAssignment]| a.iter().map(|a| a.label().to_owned()).collect::<Vec<_>>();

    let anchored = run(&PipelineConfig::default());
    let runs: BTreeSet<String> = (0..10).map(|_| format!("{:?}", run(&PipelineConfig::default()))).collect();
    ensure!(runs.len() == 1, "anchored runs differ");
    ensure!(anchored.column_types.anchored, "anchored flag not set");
    ensure!(
        labels(&anchored.column_types.assignments) == ["conservationStatus", "binomial"],
        "assignments {:?}",
        labels(&anchored.column_types.assignments)
    );
    let conv = &anchored.conversations[0];
    let replies: Vec<&str> = conv.turns().iter().filter(|t| t.role() == Role::Assistant).map(|t| t.text()).collect();
    ensure!(replies.len() == 2, "expected two assistant turns, got {}", replies.len());
    let class = parse_table_class(replies[0]).map_err(|v| v.to_string())?;
    check_table_class(&class.text, &onto).map_err(|v| v.to_string())?;
    let list = parse_column_types(replies[1], animals.arity()).map_err(|v| v.to_string())?;
    let items: Vec<&str> = list.items.iter().map(|i| i.text.as_str()).collect();
    check_column_types(&items, &onto).map_err(|v| format!("final conversation still violates: {v}"))?;

    let off = PipelineConfig {
        anchoring_enabled: false,
        ..PipelineConfig::default()
    };
    let plain = run(&off);
    let runs: BTreeSet<String> = (0..10).map(|_| format!("{:?}", run(&off))).collect();
    ensure!(runs.len() == 1, "unanchored runs differ");
    ensure!(!plain.column_types.anchored, "unanchored run reports anchoring");
    for a in &plain.column_types.assignments {
        if let ColumnAssignment::Term(t) = a {
            ensure!(onto.lookup(TermKind::Property, t.local_name()) == Some(t), "{} not in ontology", t.iri());
        }
    }
    ensure!(plain.conversations[0] != *conv, "conversations should differ");
    ensure!(
        plain.conversations[0].last().unwrap().text().contains("iucnStatus"),
        "unanchored conversation should keep the hallucinated label"
    );
    Ok("anchored conversation clean, unanchored keeps iucnStatus, 10/10 identical".into())
}

/// Wagner-Fischer with a full matrix over chars.
fn oracle_edit_distance(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

struct SynthPair {
    left: Table,
    right: Table,
    gold: (String, String),
}

fn synth_corpus(n: usize, seed: u64) -> Vec<SynthPair> {
    const NAMES: [&str; 12] = [
        "city", "price", "color", "year", "rating", "owner", "state", "amount", "label", "score", "notes", "region",
    ];
    const KEYS: [(&str, &str); 5] = [
        ("customer_id", "cust_id"),
        ("order_no", "order_number"),
        ("sku", "product_sku"),
        ("isbn", "book_isbn"),
        ("emp_id", "employee"),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let (lk, rk) = KEYS[rng.gen_range(0..KEYS.len())];
            let pick = |rng: &mut ChaCha8Rng, count: usize| -> Vec<String> {
                let mut names: Vec<&str> = NAMES.to_vec();
                let mut out = Vec::new();
                for _ in 0..count {
                    out.push(names.swap_remove(rng.gen_range(0..names.len())).to_owned());
                }
                out
            };
            let (nl, nr) = (rng.gen_range(1..4), rng.gen_range(1..4));
            let mut lh = pick(&mut rng, nl);
            let mut rh = pick(&mut rng, nr);
            let lpos = rng.gen_range(0..=lh.len());
            let rpos = rng.gen_range(0..=rh.len());
            lh.insert(lpos, lk.to_owned());
            rh.insert(rpos, rk.to_owned());
            let rows_l = rng.gen_range(3..12);
            let rows_r = rng.gen_range(3..12);
            let key = |j: usize| format!("K{i}-{j}");
            let noise = |rng: &mut ChaCha8Rng| format!("v{}", rng.gen_range(0..40));
            let mk = |rng: &mut ChaCha8Rng, headers: &[String], pos: usize, rows: usize, offset: usize| {
                let data = (0..rows)
                    .map(|j| {
                        (0..headers.len())
                            .map(|c| if c == pos { key(j + offset) } else { noise(rng) })
                            .collect()
                    })
                    .collect();
                Table::new(format!("t{i}"), Some(headers.to_vec()), data).unwrap()
            };
            let left = mk(&mut rng, &lh, lpos, rows_l, 0);
            let offset = rng.gen_range(0..3);
            let right = mk(&mut rng, &rh, rpos, rows_r, offset);
            SynthPair {
                left,
                right,
                gold: (lk.to_owned(), rk.to_owned()),
            }
        })
        .collect()
}

fn oracle_levenshtein(l: &Table, r: &Table) -> (String, String) {
    let mut scored: Vec<(usize, String, String)> = Vec::new();
    for a in l.headers().unwrap() {
        for b in r.headers().unwrap() {
            scored.push((oracle_edit_distance(&a.to_lowercase(), &b.to_lowercase()), a.clone(), b.clone()));
        }
    }
    scored.sort();
    let (_, a, b) = scored.swap_remove(0);
    (a, b)
}

fn oracle_jaccard(l: &Table, r: &Table) -> (String, String) {
    let values = |t: &Table, i: usize| -> BTreeSet<String> {
        t.rows().iter().map(|row| row[i].clone()).filter(|v| !v.trim().is_empty()).collect()
    };
    let (lh, rh) = (l.headers().unwrap(), r.headers().unwrap());
    let mut best: Option<(f64, &String, &String)> = None;
    for (i, a) in lh.iter().enumerate() {
        for (j, b) in rh.iter().enumerate() {
            let (x, y) = (values(l, i), values(r, j));
            let union = x.union(&y).count();
            let score = if union == 0 { 0.0 } else { x.intersection(&y).count() as f64 / union as f64 };
            let better = match best {
                None => true,
                Some((s, ba, bb)) => score > s || (score == s && (a, b) < (ba, bb)),
            };
            if better {
                best = Some((score, a, b));
            }
        }
    }
    let (_, a, b) = best.unwrap();
    (a.clone(), b.clone())
}

fn write_join_manifest(dir: &Path, corpus: &[SynthPair]) -> Manifest {
    let mut lines = Vec::new();
    for (i, pair) in corpus.iter().enumerate() {
        for (side, t) in [("l", &pair.left), ("r", &pair.right)] {
            std::fs::write(dir.join(format!("{i}{side}.csv")), datadisc::table::to_csv(t)).unwrap();
        }
        lines.push(
            serde_json::json!({
                "id": format!("pair-{i}"), "task": "join",
                "left": format!("{i}l.csv"), "right": format!("{i}r.csv"),
                "gold": [[pair.gold.0, pair.gold.1]],
            })
            .to_string(),
        );
    }
    let path = dir.join("manifest.jsonl");
    std::fs::write(&path, lines.join("\n")).unwrap();
    datadisc::eval::load_manifest(&path).unwrap()
}

fn criterion_4() -> Outcome {
    let corpus = synth_corpus(50, 4);
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_join_manifest(dir.path(), &corpus);
    let mut summary = Vec::new();
    for (system, oracle) in [
        (System::Jaccard, oracle_jaccard as fn(&Table, &Table) -> (String, String)),
        (System::Levenshtein, oracle_levenshtein),
    ] {
        let report =
            run_benchmark(&manifest, system, None, &Ontology::new(), &BenchmarkConfig::default()).map_err(|e| e.to_string())?;
        let mut correct = 0u64;
        for (pair, item) in corpus.iter().zip(&report.per_item) {
            let want = oracle(&pair.left, &pair.right);
            ensure!(
                item.prediction == Labels::Pairs(vec![want.clone()]),
                "{system:?} {}: {:?} vs oracle {want:?}",
                item.id,
                item.prediction
            );
            correct += u64::from(want == pair.gold);
        }
        let (p, r) = (correct as f64 / 50.0, correct as f64 / 50.0);
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        ensure!(report.metrics.f1 == f1, "{system:?} F1 {} vs oracle {f1}", report.metrics.f1);
        summary.push(format!("{system:?} F1={f1:.3}"));
    }
    Ok(format!("50 pairs, selections exact; {}", summary.join(", ")))
}

fn fuzz_response(rng: &mut ChaCha8Rng, onto: &Ontology, columns: &[&str]) -> String {
    const CHARS: &[u8] = b"abcdeXYZ019 `,:/.'()[]=_-\n";
    let iris: Vec<String> = onto
        .terms(TermKind::Class)
        .chain(onto.terms(TermKind::Property))
        .map(|t| t.iri().to_owned())
        .collect();
    let word = |rng: &mut ChaCha8Rng| -> String {
        (0..rng.gen_range(1..9)).map(|_| (b'a' + rng.gen_range(0..26)) as char).collect()
    };
    let quote = |rng: &mut ChaCha8Rng, s: String| if rng.gen_bool(0.5) { format!("`{s}`") } else { s };
    match rng.gen_range(0..5) {
        0 => (0..rng.gen_range(1..40)).map(|_| CHARS[rng.gen_range(0..CHARS.len())] as char).collect(),
        1 => {
            let iri = &iris[rng.gen_range(0..iris.len())];
            let cut = rng.gen_range(0..=iri.len());
            quote(rng, iri[..cut].to_owned())
        }
        2 => {
            let props: Vec<_> = onto.terms(TermKind::Property).collect();
            let items: Vec<String> = (0..rng.gen_range(0..7))
                .map(|_| match rng.gen_range(0..4) {
                    0 => onto.compact(props[rng.gen_range(0..props.len())]),
                    1 => format!("dbo:{}", word(rng)),
                    2 => "Unknown".to_owned(),
                    _ => word(rng),
                })
                .collect();
            quote(rng, items.join(", "))
        }
        3 => {
            let mut col = |rng: &mut ChaCha8Rng| {
                if rng.gen_bool(0.6) {
                    columns[rng.gen_range(0..columns.len())].to_owned()
                } else {
                    word(rng)
                }
            };
            let list = |rng: &mut ChaCha8Rng, col: &mut dyn FnMut(&mut ChaCha8Rng) -> String| {
                let n = rng.gen_range(0..4);
                let items: Vec<String> = (0..n).map(|_| format!("'{}'", col(rng))).collect();
                format!("[{}]", items.join(", "))
            };
            match rng.gen_range(0..4) {
                0 => format!("'{}', right_on='{}')`", col(rng), col(rng)),
                1 => {
                    let (a, b) = (list(rng, &mut col), list(rng, &mut col));
                    format!("{a}, right_on={b})")
                }
                2 => format!("pd.merge(df1, df2, on='{}')", col(rng)),
                _ => format!("'{}'", col(rng)),
            }
        }
        _ => iris[rng.gen_range(0..iris.len())].clone(),
    }
}

fn criterion_5() -> Outcome {
    let onto = ontology();
    let (ev, animals, reg) = (table("ev.csv"), table("animals.csv"), table("car_registration.csv"));
    let allowed = allowed_classes();
    let mut columns: Vec<&str> = Vec::new();
    for t in [&ev, &reg] {
        columns.extend(t.headers().unwrap().iter().map(String::as_str));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tally: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
    for case in 0..1000 {
        // Empty completions are rejected by the backend layer before the harness sees them.
        let responses: Vec<String> = (0..6)
            .map(|_| fuzz_response(&mut rng, &onto, &columns))
            .map(|r| if r.is_empty() { " ".to_owned() } else { r })
            .collect();
        let task = ["table-class", "column-type", "join"][case % 3];
        let mut responses = responses;
        if task == "join" {
            // Random names rarely land on the right side, so plant some valid answers.
            let (l, rr) = (ev.headers().unwrap(), reg.headers().unwrap());
            for r in responses.iter_mut() {
                if !rng.gen_bool(0.3) {
                    continue;
                }
                *r = format!("'{}', right_on='{}')", l[rng.gen_range(0..l.len())], rr[rng.gen_range(0..rr.len())]);
            }
        }
        let backend = ScriptedBackend::from_responses(responses.clone());
        let config = PipelineConfig {
            anchoring_enabled: rng.gen_bool(0.7),
            max_anchor_attempts: rng.gen_range(1..=4),
            ..PipelineConfig::default()
        };
        let t = if rng.gen_bool(0.5) { &ev } else { &animals };
        let outcome: Result<(), HarnessError> = match task {
            "table-class" => {
                let list = rng.gen_bool(0.25).then_some(allowed.as_slice());
                let mut conv = Default::default();
                run_table_class_task(&mut conv, t, &onto, &backend, &config, list).and_then(|(r, _)| {
                    let ok = onto.lookup(TermKind::Class, r.term.local_name()) == Some(&r.term)
                        && list.is_none_or(|l| l.iter().any(|c| c == r.term.local_name()));
                    if ok { Ok(()) } else { Err(HarnessError::InvalidState(format!("class {}", r.term.iri()))) }
                })
            }
            "column-type" => run_column_type_task(&mut Default::default(), t, &onto, &backend, &config).and_then(|(r, _)| {
                let ok = r.assignments.len() == t.arity()
                    && r.assignments.iter().all(|a| match a {
                        ColumnAssignment::Term(term) => onto.lookup(TermKind::Property, term.local_name()) == Some(term),
                        ColumnAssignment::Unknown => true,
                    });
                if ok { Ok(()) } else { Err(HarnessError::InvalidState(format!("assignments {:?}", r.assignments))) }
            }),
            _ => run_join_task(&ev, &reg, &backend, &config, None).and_then(|o| {
                let p = &o.prediction;
                let ok = !p.left_cols().is_empty()
                    && p.left_cols().len() == p.right_cols().len()
                    && p.left_cols().iter().all(|c| ev.has_column(c))
                    && p.right_cols().iter().all(|c| reg.has_column(c));
                if ok { Ok(()) } else { Err(HarnessError::InvalidState(format!("join {p:?}"))) }
            }),
        };
        let entry = tally.entry(task).or_default();
        match outcome {
            Ok(()) => entry.0 += 1,
            Err(HarnessError::TaskFailed { .. }) => entry.1 += 1,
            Err(e) => return Err(format!("case {case} ({task}, responses {responses:?}): {e}")),
        }
    }
    let parts: Vec<String> = tally.iter().map(|(t, (ok, failed))| format!("{t} {ok} ok/{failed} failed")).collect();
    Ok(format!("1000 responses, no invariant broken; {}", parts.join(", ")))
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = datadisc::cli::run(std::iter::once("datadisc").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, onto) = (fixture("bench/manifest.jsonl"), fixture("ontology.tsv"));
    let backend = format!("scripted:{}", fixture("bench/transcript.jsonl").display());
    let mut seen: Vec<(String, Report)> = Vec::new();
    for t in ["0", "0.25", "0.5", "0.75", "1.0"] {
        let report_path = dir.path().join(format!("report-{t}.json"));
        let (code, out, err) = run_cli(&[
            "eval",
            manifest.to_str().unwrap(),
            "--headers",
            "--ontology",
            onto.to_str().unwrap(),
            "--backend",
            &backend,
            "--temperature",
            t,
            "--report",
            report_path.to_str().unwrap(),
        ]);
        ensure!(code == 0, "T={t}: exit {code}: {err}");
        let report: Report = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
        ensure!(report.settings.temperature == t.parse::<f64>().unwrap(), "T={t} not echoed");
        seen.push((out, report));
    }
    let (first_out, first) = &seen[0];
    for (out, r) in &seen[1..] {
        ensure!(out == first_out, "summary differs: {out:?} vs {first_out:?}");
        ensure!(r.metrics == first.metrics && r.per_item == first.per_item, "metrics differ");
    }
    Ok(format!("5 temperatures, identical: {}", first_out.trim()))
}

/// Twenty scripted items across the three tasks with a mix of right, wrong and
/// repairable answers.
fn mixed_benchmark(dir: &Path) -> (Manifest, ScriptedBackend) {
    const CLASS: &str = "select one DBpedia.org ontology";
    const COLS: &str = "suggest a DBPedia.org Property";
    const JOIN: &str = "pd.merge";
    let iri = |c: &str| format!("https://dbpedia.org/ontology/{c}");
    let ev_cols = ["manufacturer", "model", "postalCode", "Unknown"];
    let an_cols = ["conservationStatus", "binomial"];
    let (ev, an, reg) = (fixture("ev.csv"), fixture("animals.csv"), fixture("car_registration.csv"));
    let mut lines = Vec::new();
    let mut script: Vec<(&str, String)> = Vec::new();
    let mut add = |line: serde_json::Value| lines.push(line.to_string());

    let classes = [
        (&ev, "ElectricVehicle", "ElectricVehicle"),
        (&ev, "ElectricVehicle", "ElectricVehicle"),
        (&ev, "ElectricVehicle", "Automobile"),
        (&an, "Animal", "Animal"),
        (&an, "Animal", "Animal"),
        (&an, "Animal", "Hospital"),
        (&ev, "ElectricVehicle", "ElectricVehicel"),
    ];
    for (i, (path, gold, answer)) in classes.iter().enumerate() {
        add(serde_json::json!({"id": format!("class-{i}"), "task": "table-class", "table": path, "gold": gold}));
        script.push((CLASS, iri(answer)));
    }
    let columns: [(&PathBuf, &[&str], &str, &str); 7] = [
        (&ev, &ev_cols, "ElectricVehicle", "`dbo:manufacturer, dbo:model, dbo:postalCode, Unknown`"),
        (&ev, &ev_cols, "ElectricVehicle", "`dbo:manufacturer, dbo:model, dbo:postalCode`"),
        (&ev, &ev_cols, "Automobile", "`dbo:manufacturer, dbo:name, dbo:postalCode, Unknown`"),
        (&ev, &ev_cols, "ElectricVehicle", "`dbo:manufacturer, dbo:modell, dbo:postalCode, Unknown`"),
        (&an, &an_cols, "Animal", "`dbo:iucnStatus, dbo:binomial`"),
        (&an, &an_cols, "Animal", "`dbo:conservationStatus, dbo:binomial`"),
        (&an, &an_cols, "Animal", "`dbo:family, dbo:binomial`"),
    ];
    for (i, (path, gold, class, answer)) in columns.iter().enumerate() {
        add(serde_json::json!({"id": format!("columns-{i}"), "task": "column-type", "table": path, "gold": gold}));
        script.push((CLASS, iri(class)));
        script.push((COLS, answer.to_string()));
    }
    let joins = [
        "'VIN_prefix', right_on='vehicle_id_number')`",
        "'VIN_prefix', right_on='vehicle_id_number')`",
        "'VIN_prefix', right_on='vehicle_id_number')`",
        "'Model', right_on='name')`",
        "['VIN_prefix', 'Brand'], right_on=['vehicle_id_number', 'name'])`",
        "pd.merge(df1, df2, left_on='VIN_prefix', right_on='vehicle_id_number')",
    ];
    for (i, answer) in joins.iter().enumerate() {
        add(serde_json::json!({
            "id": format!("join-{i}"), "task": "join", "left": ev, "right": reg,
            "gold": [["VIN_prefix", "vehicle_id_number"]],
        }));
        script.push((JOIN, answer.to_string()));
    }
    let path = dir.join("mixed.jsonl");
    std::fs::write(&path, lines.join("\n")).unwrap();
    let transcript: Vec<String> = script
        .iter()
        .map(|(m, r)| serde_json::json!({"match": m, "response": r}).to_string())
        .collect();
    (
        datadisc::eval::load_manifest(&path).unwrap(),
        load_transcript(&transcript.join("\n")).unwrap(),
    )
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, backend) = mixed_benchmark(dir.path());
    ensure!(manifest.examples.len() == 20, "manifest has {} items", manifest.examples.len());
    let report = run_benchmark(&manifest, System::Llm, Some(&backend), &ontology(), &BenchmarkConfig::default())
        .map_err(|e| e.to_string())?;
    ensure!(backend.remaining() == 0, "{} scripted responses unused", backend.remaining());
    ensure!(report.items == 20 && report.task == "mixed", "items {} task {}", report.items, report.task);
    ensure!(report.throughput > 0.0, "throughput {}", report.throughput);
    ensure!(report.total_cost > 0.0, "cost {}", report.total_cost);

    let (metrics, per_task) = aggregate(&report.per_item).map_err(|e| e.to_string())?;
    ensure!(metrics == report.metrics && per_task == report.per_task, "aggregate differs from report");

    // Independent re-aggregation from the per-item labels and bits.
    let mut units: HashMap<&str, (Vec<Option<&str>>, Vec<&str>)> = HashMap::new();
    let (mut pair_hits, mut pair_predicted, mut pair_gold) = (0u64, 0u64, 0u64);
    for item in &report.per_item {
        let key = item.task.as_str();
        let (preds, golds): (Vec<Option<&str>>, Vec<&str>) = match (&item.prediction, &item.gold) {
            (Labels::Single(p), Labels::Single(Some(g))) => (vec![p.as_deref()], vec![g.as_str()]),
            (Labels::PerColumn(p), Labels::PerColumn(g)) => {
                (p.iter().map(|x| x.as_deref()).collect(), g.iter().map(|x| x.as_deref().unwrap()).collect())
            }
            (Labels::Pairs(p), Labels::Pairs(g)) => {
                let hits: Vec<bool> = p.iter().map(|x| g.contains(x)).collect();
                ensure!(hits == item.correct, "{}: bits {:?} vs {:?}", item.id, item.correct, hits);
                pair_hits += hits.iter().filter(|h| **h).count() as u64;
                pair_predicted += p.len() as u64;
                pair_gold += g.len() as u64;
                continue;
            }
            _ => return Err(format!("{}: label shapes disagree", item.id)),
        };
        let bits: Vec<bool> = preds.iter().zip(&golds).map(|(p, g)| *p == Some(*g)).collect();
        ensure!(bits == item.correct, "{}: bits {:?} vs {:?}", item.id, item.correct, bits);
        let e = units.entry(key).or_default();
        e.0.extend(preds);
        e.1.extend(golds);
    }
    let mut weighted = [0.0; 3];
    let mut total = 0.0;
    for (task, (preds, golds)) in &units {
        let (p, r, f) = brute_weighted(preds, golds);
        let got = report.per_task.iter().find(|(t, _)| t.as_str() == *task).unwrap().1.metrics;
        for (a, b) in [(got.precision, p), (got.recall, r), (got.f1, f)] {
            ensure!((a - b).abs() <= 1e-12, "{task}: {a} vs {b}");
        }
        let n = golds.len() as f64;
        total += n;
        for (w, v) in weighted.iter_mut().zip([p, r, f]) {
            *w += n * v;
        }
    }
    let (jp, jr) = (pair_hits as f64 / pair_predicted as f64, pair_hits as f64 / pair_gold as f64);
    let jf = 2.0 * jp * jr / (jp + jr);
    total += pair_gold as f64;
    for (w, v) in weighted.iter_mut().zip([jp, jr, jf]) {
        *w += pair_gold as f64 * v;
    }
    let m = report.metrics;
    for (a, b) in [(m.precision, weighted[0] / total), (m.recall, weighted[1] / total), (m.f1, weighted[2] / total)] {
        ensure!((a - b).abs() <= 1e-12, "overall {a} vs {b}");
    }
    let back: Report = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    ensure!(back == report, "report does not round-trip through JSON");
    Ok(format!(
        "F1={:.3} throughput={:.1}/s cost=${:.6}",
        m.f1, report.throughput, report.total_cost
    ))
}

/// Runs the table pipeline on the EV fixture against a real endpoint. Only the
/// constraints are asserted; the model's choice is reported, not judged.
fn live_check() -> Outcome {
    let config = HttpConfig::from_env(None).map_err(|e| e.to_string())?;
    let backend = HttpBackend::new(config);
    let out = run_table_pipeline(&table("ev.csv"), &ontology(), &backend, &PipelineConfig::default(), None)
        .map_err(|e| e.to_string())?;
    ensure!(
        out.column_types.assignments.len() == 4,
        "{} labels for 4 columns",
        out.column_types.assignments.len()
    );
    Ok(format!(
        "class {} (anchored {}), {} prompt tokens",
        out.table_class.term.local_name(),
        out.table_class.anchored,
        out.usage.prompt_tokens
    ))
}

fn main() {
    let criteria: [Criterion; 7] = [
        (1, "metric oracle", Duration::from_secs(5), criterion_1),
        (2, "golden prompts", Duration::from_secs(1), criterion_2),
        (3, "anchoring replay", Duration::from_secs(1), criterion_3),
        (4, "baseline oracle", Duration::from_secs(10), criterion_4),
        (5, "constraint totality", Duration::from_secs(10), criterion_5),
        (6, "temperature sweep", Duration::from_secs(5), criterion_6),
        (7, "end-to-end report", Duration::from_secs(5), criterion_7),
    ];
    let mut failed = 0;
    for (n, name, limit, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|d| {
            if elapsed > limit {
                Err(format!("over the {} ms limit", limit.as_millis()))
            } else {
                Ok(d)
            }
        });
        let (verdict, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(e) => ("FAIL", e),
        };
        println!(
            "criterion {n} {name}: {verdict} ({} ms, limit {} ms) {detail}",
            elapsed.as_millis(),
            limit.as_millis()
        );
        failed += usize::from(outcome.is_err());
    }
    if std::env::var_os("DATADISC_LIVE").is_some_and(|v| v == "1") {
        let start = Instant::now();
        let (verdict, detail) = match live_check() {
            Ok(d) => ("PASS", d),
            Err(e) => ("FAIL", e),
        };
        println!(
            "criterion 8 live check: {verdict} ({} ms, non-gating) {detail}",
            start.elapsed().as_millis()
        );
    } else {
        println!("criterion 8 live check: SKIPPED (set DATADISC_LIVE=1 and a credential to run; non-gating)");
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all gating criteria passed");
}
