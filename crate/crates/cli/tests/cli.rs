use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const FIXTURE: &str = r#"{"sender":"alice@x.com","recipients":["bob@x.com"],"subject":"hello","body":"lunch tomorrow","timestamp":"2003-05-01T10:00:00Z"}
{"sender":"bob@x.com","recipients":["alice@x.com"],"subject":"re hello","body":"money for lunch","timestamp":"2003-05-01T12:00:00Z"}
{"sender":"carol@x.com","recipients":["alice@x.com"],"subject":"report","body":"quarterly numbers","timestamp":"2003-06-02T09:00:00Z"}
{"sender":"alice@x.com","recipients":["carol@x.com","bob@x.com"],"subject":"urgent","body":"money transfer now","timestamp":"2004-01-15T08:00:00Z"}
{"sender":"dave@x.com","recipients":["bob@x.com"],"subject":"misc","body":"weekend plans"}
"#;

fn run(data: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mailsleuth"))
        .arg("--data-dir")
        .arg(data)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn ingest_fixture(dir: &Path) -> String {
    let path = dir.join("fixture.jsonl");
    std::fs::write(&path, FIXTURE).unwrap();
    let out = run(
        &dir.join("data"),
        &["ingest", path.to_str().unwrap(), "--format", "jsonl"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    stdout(&out).trim().to_string()
}

#[test]
fn query_prints_matches() {
    let dir = tempfile::tempdir().unwrap();
    let id = ingest_fixture(dir.path());
    let data = dir.path().join("data");
    let out = run(
        &data,
        &["query", &id, "--content", "money", "--content", "transfer"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "1 match: d4\n");
    let out = run(&data, &["query", &id, "--content", "money"]);
    assert_eq!(stdout(&out), "2 matches: d2 d4\n");
    let out = run(&data, &["query", &id, "--subject", "spam"]);
    assert_eq!(stdout(&out), "0 matches\n");
    let out = run(
        &data,
        &["query", &id, "--from", "2003-05-01", "--to", "2003-05-01"],
    );
    assert_eq!(stdout(&out), "2 matches: d1 d2\n");
}

#[test]
fn report_without_filters_covers_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let id = ingest_fixture(dir.path());
    let out = run(
        &dir.path().join("data"),
        &["report", &id, "--json", "--granularity", "year"],
    );
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["summary"]["data"]["count"], 5);
    let sent: u64 = v["correspondents"]["data"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["sent"].as_u64().unwrap())
        .sum();
    assert_eq!(sent, 5);
    let text = stdout(&run(&dir.path().join("data"), &["report", &id]));
    assert!(text.starts_with("5 of 5 emails match"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let id = ingest_fixture(dir.path());
    let data = dir.path().join("data");
    assert_eq!(
        run(&data, &["cluster", &id, "-k", "0"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&data, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&data, &["--help"]).status.code(), Some(0));
    let out = run(&data, &["query", "missing"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("UnknownDataset"));
    assert_eq!(
        run(&data, &["cluster", &id, "-k", "9"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&data, &["query", &id, "--content", "two words"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn cluster_lists_heads_and_members() {
    let dir = tempfile::tempdir().unwrap();
    let id = ingest_fixture(dir.path());
    let out = run(
        &dir.path().join("data"),
        &["cluster", &id, "-k", "2", "--seed", "4", "--json"],
    );
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let total: usize = v["members"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["data"]["members"].as_array().unwrap().len())
        .sum();
    assert_eq!(total, 5);
    let again = run(
        &dir.path().join("data"),
        &["cluster", &id, "-k", "2", "--seed", "4", "--json"],
    );
    assert_eq!(again.stdout, out.stdout);
}

#[test]
fn export_graph_formats() {
    let dir = tempfile::tempdir().unwrap();
    let id = ingest_fixture(dir.path());
    let data = dir.path().join("data");
    let dot = dir.path().join("g.dot");
    let out = run(
        &data,
        &[
            "export-graph",
            &id,
            "--content",
            "money",
            "--out",
            dot.to_str().unwrap(),
        ],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(&dot).unwrap();
    assert!(text.starts_with("graph"));
    assert!(text.contains("\"alice@x.com\" -- \"bob@x.com\""));
    let out = run(&data, &["export-graph", &id, "--format", "graphml"]);
    assert!(stdout(&out).contains("<graphml"));
}

#[test]
fn ingest_with_synthetic_bodies_and_tags() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let csv = dir.path().join("meta.csv");
    std::fs::write(
        &csv,
        "from,to,subject\nalice@x.com,bob@x.com,hi\nbob@x.com,alice@x.com,re hi\n",
    )
    .unwrap();
    let pool = dir.path().join("pool.json");
    std::fs::write(&pool, r#"["send the money", "wire transfer pending"]"#).unwrap();
    let out = run(
        &data,
        &[
            "ingest",
            csv.to_str().unwrap(),
            "--format",
            "csv",
            "--synthesize-bodies",
            pool.to_str().unwrap(),
            "--seed",
            "7",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let id = stdout(&out).trim().to_string();
    let v: Value = serde_json::from_str(&stdout(&run(&data, &["report", &id, "--json"]))).unwrap();
    assert_eq!(v["summary"]["data"]["count"], 2);

    assert!(run(
        &data,
        &[
            "tags",
            "--assign",
            "money=suspicious",
            "--assign",
            "wire=suspicious"
        ]
    )
    .status
    .success());
    assert_eq!(
        stdout(&run(&data, &["tags", "--term", "Money"])),
        "money: suspicious\n"
    );
    let dist: Value = serde_json::from_str(&stdout(&run(&data, &["tags", "--json"]))).unwrap();
    assert_eq!(dist, serde_json::json!([{"tag":"suspicious","count":2}]));
    assert_eq!(
        run(&data, &["tags", "--assign", "nolabel"]).status.code(),
        Some(2)
    );
}

#[test]
fn replay_command_reproduces_a_log() {
    let dir = tempfile::tempdir().unwrap();
    let id = ingest_fixture(dir.path());
    let data = dir.path().join("data");
    let log = format!(
        "{{\"format\":\"mailsleuth-action-log\",\"version\":1}}\n\
{{\"seq\":1,\"ts\":\"2024-01-01T00:00:00Z\",\"kind\":\"load_dataset\",\"payload\":{{\"dataset_id\":\"{id}\"}}}}\n\
{{\"seq\":2,\"ts\":\"2024-01-01T00:00:01Z\",\"kind\":\"add_filter\",\"payload\":{{\"filter_id\":\"f1\",\"field\":\"content\",\"value\":\"money\"}}}}\n\
{{\"seq\":3,\"ts\":\"2024-01-01T00:00:02Z\",\"kind\":\"assign_tag\",\"payload\":{{\"term\":\"money\",\"tag\":\"finance\"}}}}\n"
    );
    let path = dir.path().join("actions.jsonl");
    std::fs::write(&path, log).unwrap();
    let out = run(&data, &["replay", &id, "--log", path.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("replayed 3 actions"));
    assert!(text.contains("2 matches: d2 d4"));
    assert_eq!(
        stdout(&run(&data, &["tags", "--term", "money"])),
        "money: finance\n"
    );

    std::fs::write(&path, "{\"format\":\"mailsleuth-action-log\",\"version\":1}\n{\"seq\":1,\"ts\":\"2024-01-01T00:00:00Z\",\"kind\":\"remove_filter\",\"payload\":{\"filter_id\":\"f4\"}}\n").unwrap();
    let out = run(&data, &["replay", &id, "--log", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ReplayDivergence"));
}
