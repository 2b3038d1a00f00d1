use std::path::PathBuf;
use std::process::Command;

use datadisc::eval::Report;

fn fixture(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = datadisc::cli::run(
        std::iter::once("datadisc").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn scripted(name: &str) -> String {
    format!("scripted:{}", fixture(&format!("transcripts/{name}")))
}

#[test]
fn classify_table_prints_iri_anchored_attempts() {
    let (onto, backend, csv) = (fixture("ontology.tsv"), scripted("ev_class.jsonl"), fixture("ev.csv"));
    let (code, out, err) = run(&["classify-table", &csv, "--headers", "--ontology", &onto, "--backend", &backend]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "https://dbpedia.org/ontology/ElectricVehicle\tfalse\t1\n");

    let classes = fixture("classes.txt");
    let (code, out, _) = run(&[
        "classify-table", &csv, "--allowed-classes", &classes, "--headers", "--ontology", &onto, "--backend", &backend,
    ]);
    assert_eq!(code, 0);
    assert!(out.starts_with("https://dbpedia.org/ontology/ElectricVehicle\t"));
}

#[test]
fn classify_table_errors() {
    let (backend, csv) = (scripted("ev_class.jsonl"), fixture("ev.csv"));
    let (code, _, err) = run(&["classify-table", &csv, "--ontology", "/missing/onto.tsv", "--backend", &backend]);
    assert_eq!(code, 1);
    assert!(err.contains("/missing/onto.tsv"), "{err}");

    let onto = fixture("ontology.tsv");
    let (code, _, err) = run(&["classify-table", &csv, "--ontology", &onto, "--backend", &scripted("empty.jsonl")]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn annotate_columns_prints_one_line_per_column() {
    let (onto, csv) = (fixture("ontology.tsv"), fixture("ev.csv"));
    let (code, out, err) =
        run(&["annotate-columns", &csv, "--headers", "--ontology", &onto, "--backend", &scripted("ev_columns.jsonl")]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "0\tdbo:manufacturer\n1\tdbo:model\n2\tdbo:postalCode\n3\tUnknown\n");

    let short = scripted("ev_columns_short.jsonl");
    let (code, out, _) = run(&["annotate-columns", &csv, "--headers", "--ontology", &onto, "--backend", &short]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().nth(3), Some("3\tUnknown"));
    let (code, _, err) =
        run(&["annotate-columns", &csv, "--headers", "--no-anchoring", "--ontology", &onto, "--backend", &short]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn annotate_single_column_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("one.csv");
    std::fs::write(&csv, "country\nFrance\nPeru\n").unwrap();
    let transcript = dir.path().join("t.jsonl");
    std::fs::write(&transcript, "{\"response\": \"`dbo:country`\"}\n").unwrap();
    let (code, out, _) = run(&[
        "annotate-columns",
        csv.to_str().unwrap(),
        "--headers",
        "--ontology",
        &fixture("ontology.tsv"),
        "--backend",
        &format!("scripted:{}", transcript.display()),
    ]);
    assert_eq!(code, 0);
    assert_eq!(out, "0\tdbo:country\n");
}

#[test]
fn predict_join_with_model_and_baselines() {
    let (l, r) = (fixture("ev.csv"), fixture("car_registration.csv"));
    let (code, out, err) = run(&["predict-join", &l, &r, "--headers", "--backend", &scripted("ev_join.jsonl")]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "VIN_prefix\tvehicle_id_number\n");

    let (code, out, _) = run(&["predict-join", &l, &r, "--headers", "--baseline", "jaccard"]);
    assert_eq!(code, 0);
    assert_eq!(out, "VIN_prefix\tvehicle_id_number\n");

    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    std::fs::write(&a, "id,name\n").unwrap();
    std::fs::write(&b, "ident,title\n").unwrap();
    let (a, b) = (a.to_str().unwrap(), b.to_str().unwrap());
    let (code, out, _) = run(&["predict-join", a, b, "--headers", "--baseline", "levenshtein"]);
    assert_eq!(code, 0);
    assert_eq!(out, "id\tident\n");
    let (code, _, _) = run(&["predict-join", a, b, "--headers", "--baseline", "jaccard"]);
    assert_eq!(code, 1);
}

#[test]
fn dump_prompt_omits_exactly_the_prefix() {
    let csv = fixture("ev.csv");
    let (code, full, _) = run(&["classify-table", &csv, "--headers", "--dump-prompt"]);
    assert_eq!(code, 0);
    let (_, bare, _) = run(&["classify-table", &csv, "--headers", "--dump-prompt", "--no-prefix"]);
    assert!(full.contains(datadisc::prompt::TABLE_CLASS_PREFIX));
    assert!(!bare.contains(datadisc::prompt::TABLE_CLASS_PREFIX));
    let golden = std::fs::read_to_string(fixture("golden/table-class-D1M1P1K0.txt")).unwrap();
    assert_eq!(full, golden + "\n");
}

#[test]
fn eval_writes_report_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let (code, out, err) = run(&[
        "eval",
        &fixture("bench/manifest.jsonl"),
        "--headers",
        "--ontology",
        &fixture("ontology.tsv"),
        "--backend",
        &format!("scripted:{}", fixture("bench/transcript.jsonl")),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("P=1.000 R=1.000 F1=1.000 items=3 cost="), "{out}");
    let parsed: Report = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed.items, 3);
    assert_eq!(parsed.task, "mixed");
    assert!(parsed.total_cost > 0.0 && parsed.throughput > 0.0);
}

#[test]
fn eval_reports_bad_manifest_line() {
    let (code, _, err) = run(&["eval", &fixture("bench/bad_manifest.jsonl"), "--system", "jaccard"]);
    assert_eq!(code, 1);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn baseline_eval_needs_no_backend() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.jsonl");
    std::fs::write(
        &manifest,
        format!(
            "{{\"id\":\"j\",\"task\":\"join\",\"left\":\"{}\",\"right\":\"{}\",\"gold\":[[\"VIN_prefix\",\"vehicle_id_number\"]]}}\n",
            fixture("ev.csv"),
            fixture("car_registration.csv")
        ),
    )
    .unwrap();
    let (code, out, err) = run(&["eval", manifest.to_str().unwrap(), "--system", "levenshtein"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("items=1 cost=0.000000"), "{out}");
    let (code, _, _) = run(&["eval", &fixture("bench/manifest.jsonl"), "--system", "jaccard"]);
    assert_eq!(code, 1);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_datadisc");
    let ok = Command::new(bin)
        .args(["predict-join", &fixture("ev.csv"), &fixture("car_registration.csv"), "--headers", "--baseline", "jaccard"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&ok.stdout), "VIN_prefix\tvehicle_id_number\n");
    let bad = Command::new(bin).args(["classify-table"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let failed = Command::new(bin)
        .args([
            "classify-table",
            &fixture("ev.csv"),
            "--ontology",
            &fixture("ontology.tsv"),
            "--backend",
            &scripted("empty.jsonl"),
        ])
        .output()
        .unwrap();
    assert_eq!(failed.status.code(), Some(2));
}
