//! End-to-end tests driving the compiled binary the way a user would.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cdlsi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdlsi"))
        .args(args)
        .args(["--out-dir", dir.to_str().unwrap()])
        .output()
        .expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = cdlsi(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn run_err(dir: &Path, args: &[&str]) -> String {
    let out = cdlsi(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).expect("utf-8 stderr")
}

const TINY: &[&str] = &[
    "--topics",
    "4",
    "--docs-per-topic",
    "6",
    "--vocab-per-topic",
    "10",
    "--overlap",
    "0.2",
    "--polysemy",
    "2",
    "--seeds",
    "7",
];

fn generate(dir: &Path) {
    run_ok(dir, &[&["generate"], TINY].concat());
}

fn index(dir: &Path) {
    run_ok(
        dir,
        &["index", "--peers", "4", "--clusters", "3", "--epsilon", "0"],
    );
}

#[test]
fn generate_and_index_are_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [a.path(), b.path()] {
        generate(dir);
        index(dir);
    }
    for file in [
        "corpus.jsonl",
        "queries.jsonl",
        "qrels.txt",
        "global.json",
        "peers/peer000/index.json",
        "peers/peer000/descriptors.json",
        "peers/peer003/index.json",
    ] {
        let left = fs::read(a.path().join(file)).unwrap_or_else(|_| panic!("{file} exists"));
        let right = fs::read(b.path().join(file)).unwrap();
        assert_eq!(left, right, "{file} differs between identical runs");
    }
}

#[test]
fn publish_regenerates_the_descriptor_files() {
    let dir = TempDir::new().unwrap();
    generate(dir.path());
    index(dir.path());
    let path = dir.path().join("peers/peer001/descriptors.json");
    let before = fs::read(&path).unwrap();
    fs::write(&path, b"garbage").unwrap();
    run_ok(dir.path(), &["publish"]);
    assert_eq!(fs::read(&path).unwrap(), before);
}

#[test]
fn query_prints_a_ranked_result_list() {
    let dir = TempDir::new().unwrap();
    generate(dir.path());
    index(dir.path());

    // Ask with the first generated query's own text; its topic documents
    // share that vocabulary, so matches must come back.
    let queries = fs::read_to_string(dir.path().join("queries.jsonl")).unwrap();
    let first = queries.lines().next().unwrap();
    let text = first
        .split("\"text\":\"")
        .nth(1)
        .and_then(|s| s.split('"').next())
        .expect("query text field");

    let stdout = run_ok(
        dir.path(),
        &["query", "--cast", "4", "--h", "4", "--text", text],
    );
    assert!(stdout.contains("# effective config (query)"));
    assert!(stdout.contains("selected peers:"));
    let results: Vec<&str> = stdout
        .lines()
        .skip_while(|l| *l != "results:")
        .skip(1)
        .collect();
    assert!(!results.is_empty());
    // Each line is "rank doc_id peer_id score".
    let fields: Vec<&str> = results[0].split_whitespace().collect();
    assert_eq!(fields.len(), 4);
    assert_eq!(fields[0], "1");
    assert!(fields[2].starts_with("peer"));
    fields[3].parse::<f64>().expect("numeric score");
}

#[test]
fn config_file_loads_and_flags_override_it() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("run.conf");
    fs::write(&file, "topics = 4\ndocs_per_topic = 6\nvocab_per_topic = 10\npolysemy = 2\nseeds = 3\n").unwrap();
    let stdout = run_ok(
        dir.path(),
        &["generate", "--config", file.to_str().unwrap(), "--seeds", "9"],
    );
    assert!(stdout.contains("topics=4"), "file value applies");
    assert!(stdout.contains("seeds=9"), "flag overrides the file");
}

#[test]
fn duplicate_documents_across_corpus_files_are_a_config_error() {
    let dir = TempDir::new().unwrap();
    generate(dir.path());
    let corpus = dir.path().join("corpus.jsonl");
    let twice = format!("{p},{p}", p = corpus.display());
    let stderr = run_err(
        dir.path(),
        &["index", "--assignment", "by-file", "--corpus", &twice],
    );
    assert!(
        stderr.starts_with("error[config]: "),
        "got: {stderr}"
    );
    assert_eq!(stderr.trim_end().lines().count(), 1);
}

#[test]
fn out_of_range_values_are_parameter_errors() {
    let dir = TempDir::new().unwrap();
    let stderr = run_err(dir.path(), &["generate", "--topics", "0"]);
    assert!(stderr.starts_with("error[parameter]: "), "got: {stderr}");
    let stderr = run_err(dir.path(), &["bench", "--epsilon=-1"]);
    assert!(stderr.starts_with("error[parameter]: "), "got: {stderr}");
    let stderr = run_err(dir.path(), &["query", "--text", "x", "--method", "nope"]);
    assert!(stderr.starts_with("error[parameter]: "), "got: {stderr}");
}

#[test]
fn bench_writes_the_three_reports() {
    let dir = TempDir::new().unwrap();
    generate(dir.path());
    let stdout = run_ok(
        dir.path(),
        &[
            "bench",
            "--corpus",
            dir.path().join("corpus.jsonl").to_str().unwrap(),
            "--peers",
            "4",
            "--clusters",
            "2",
            "--epsilon",
            "0",
            "--h",
            "2",
            "--cast",
            "2,4",
            "--methods",
            "cdlsi,ggloss",
            "--seeds",
            "1,2",
        ],
    );
    assert!(stdout.contains("comp cdlsi vs ggloss at G=2"));

    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), cdlsi::eval::CSV_COLUMNS);
    // 2 methods x 2 casts x 2 seeds x 4 queries.
    assert_eq!(csv.lines().count(), 1 + 32);

    let aggregates: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.json")).unwrap())
            .unwrap();
    assert_eq!(aggregates.as_object().unwrap().len(), 8);

    let comp: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("comp.json")).unwrap())
            .unwrap();
    assert_eq!(comp.as_array().unwrap().len(), 1);
    assert_eq!(comp[0]["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn update_sim_reports_both_arms() {
    let dir = TempDir::new().unwrap();
    generate(dir.path());
    run_ok(
        dir.path(),
        &[
            "update-sim",
            "--corpus",
            dir.path().join("corpus.jsonl").to_str().unwrap(),
            "--peers",
            "2",
            "--clusters",
            "2",
            "--epsilon",
            "0",
            "--h",
            "4",
            "--cast",
            "2",
        ],
    );
    let study: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("update.json")).unwrap())
            .unwrap();
    assert_eq!(study["steps"], 6);
    assert_eq!(study["without_rebuild"].as_array().unwrap().len(), 7);
    assert_eq!(study["with_rebuild"].as_array().unwrap().len(), 7);
}
