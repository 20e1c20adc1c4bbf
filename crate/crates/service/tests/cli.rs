use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn katriage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_katriage"))
        .args(args)
        .env_remove("KA_TRIAGE_LLM_URL")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn gen_is_byte_stable_and_labels_recount() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = katriage(&[
            "gen", "--seed", "42", "--persons", "10", "--days", "30", "--fraud-rate", "0.05", "--out", s(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["persons.jsonl", "transactions.jsonl"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    // recount the labels in the emitted file and compare with the report
    let txns = lines(&a.join("transactions.jsonl"));
    let labeled = txns.iter().filter(|t| !t["fraud_scenario"].is_null()).count();
    let o = katriage(&[
        "gen", "--seed", "42", "--persons", "10", "--days", "30", "--fraud-rate", "0.05", "--out", s(&a),
    ]);
    assert_eq!(
        stdout(&o).trim(),
        format!("wrote 10 persons and {} transactions ({labeled} labeled) to {}", txns.len(), s(&a))
    );
    assert_eq!(lines(&a.join("persons.jsonl")).len(), 10);
}

#[test]
fn gen_rejects_bad_settings() {
    let dir = tempfile::tempdir().unwrap();
    let o = katriage(&["gen", "--fraud-rate", "1.5", "--out", s(dir.path())]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("fraud_rate"), "{}", stderr(&o));
    let o = katriage(&["gen", "--persons", "0", "--out", s(dir.path())]);
    assert!(!o.status.success());
}

/// Generates a new-country-only dataset and ingests it into a fresh journal.
fn new_country_store(dir: &Path) -> (PathBuf, Vec<Value>) {
    let cfg = dir.join("gen.toml");
    std::fs::write(
        &cfg,
        "seed = 7\nn_persons = 6\ndays = 75\nfraud_rate = 0.04\n\n[scenario_weights]\nnew_country = 1.0\n",
    )
    .unwrap();
    let data = dir.join("data");
    let o = katriage(&["gen", "--config", s(&cfg), "--out", s(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let store = dir.join("store.jsonl");
    let txns = data.join("transactions.jsonl");
    let o = katriage(&["ingest", s(&txns), "--store", s(&store)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let records = lines(&txns);
    let out = stdout(&o);
    assert!(out.contains("persons: 6 ingested, 0 skipped"), "{out}");
    assert!(
        out.contains(&format!("transactions: {} ingested, 0 skipped, 0 rejected", records.len())),
        "{out}"
    );
    (store, records)
}

fn first_trigger(records: &[Value], scenario: &str) -> String {
    let t = records
        .iter()
        .find(|t| t["fraud_scenario"] == scenario && t["scenario_trigger"] == true)
        .expect("dataset has a triggering transaction");
    format!("alert-{}", t["transaction_id"].as_str().unwrap())
}

#[test]
fn ingest_triage_and_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let (store, records) = new_country_store(dir.path());
    let alert = first_trigger(&records, "new_country");

    let o = katriage(&["triage", &alert, "--mode", "template_only", "--store", s(&store)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with(&format!("Alert {alert} (open)\n")), "{text}");
    let location = text.lines().find(|l| l.contains(" location ")).unwrap();
    assert!(location.trim_start().starts_with("[!]"), "{location}");
    assert!(text.contains("== Location [risky] =="));
    assert_eq!(text.matches("\n== ").count(), 6);

    let again = katriage(&["triage", &alert, "--mode", "template_only", "--store", s(&store)]);
    assert_eq!(stdout(&again), text);

    let o = katriage(&["summarize", &alert, "location", "--mode", "template_only", "--store", s(&store)]);
    assert!(o.status.success());
    assert!(!stdout(&o).contains("**"));
    assert!(text.replace("**", "").contains(stdout(&o).trim()));

    let o = katriage(&[
        "summarize", &alert, "location", "--mode", "template_only", "--json", "--store", s(&store),
    ]);
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["verified"], true);
    assert!(!doc["highlights"].as_array().unwrap().is_empty());
}

#[test]
fn reingest_adds_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let (store, records) = new_country_store(dir.path());
    let before = stdout(&katriage(&["alerts", "--store", s(&store)]));
    let txns = dir.path().join("data").join("transactions.jsonl");
    let o = katriage(&["ingest", s(&txns), "--store", s(&store)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains(&format!("0 ingested, {} skipped", records.len())));
    assert!(stdout(&o).contains("alerts created: 0"));
    assert_eq!(stdout(&katriage(&["alerts", "--store", s(&store)])), before);
}

#[test]
fn unknown_alert_or_area_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (store, records) = new_country_store(dir.path());
    let alert = first_trigger(&records, "new_country");
    let o = katriage(&["summarize", &alert, "weather", "--mode", "template_only", "--store", s(&store)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("weather"));
    assert!(stdout(&o).is_empty());
    let o = katriage(&["triage", "alert-none", "--store", s(&store)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alert-none"));
}

#[test]
fn decide_then_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let (store, records) = new_country_store(dir.path());
    let alert = first_trigger(&records, "new_country");
    let o = katriage(&["decide", &alert, "fraud", "--store", s(&store)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), format!("{alert} fraud"));
    let o = katriage(&["decide", &alert, "legitimate", "--store", s(&store)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("already decided"));
    let listed = stdout(&katriage(&["alerts", "--status", "decided", "--store", s(&store)]));
    assert_eq!(listed.lines().count(), 1);
    assert!(listed.starts_with(&format!("{alert}\t")));
}

#[test]
fn rejected_records_fail_the_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = katriage(&["gen", "--persons", "2", "--days", "5", "--out", s(&data)]);
    assert!(o.status.success());
    let txns = data.join("transactions.jsonl");
    let mut text = std::fs::read_to_string(&txns).unwrap();
    let first = text.lines().next().unwrap().to_string();
    let mut bad: Value = serde_json::from_str(&first).unwrap();
    bad["transaction_id"] = "T-BAD".into();
    bad["currency"] = "euros".into();
    text.push_str(&format!("{bad}\n"));
    std::fs::write(&txns, text).unwrap();
    let store = dir.path().join("store.jsonl");
    let o = katriage(&["ingest", s(&txns), "--store", s(&store)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("T-BAD"));
    assert!(stdout(&o).contains("1 rejected"));
}

#[test]
fn settings_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let (store, records) = new_country_store(dir.path());
    let alert = first_trigger(&records, "new_country");
    let cfg = dir.path().join("service.toml");
    std::fs::write(
        &cfg,
        format!("store = {:?}\nsummary_mode = \"template_only\"\n", s(&store)),
    )
    .unwrap();
    let o = katriage(&["triage", &alert, "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    std::fs::write(&cfg, "colour = \"blue\"\n").unwrap();
    let o = katriage(&["alerts", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("colour"));
}

#[test]
fn triage_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let (store, records) = new_country_store(dir.path());
    let alert = first_trigger(&records, "new_country");
    assert_eq!(alert, "alert-T00005-F00001");
    let o = katriage(&["triage", &alert, "--mode", "template_only", "--store", s(&store)]);
    let golden = include_str!("golden/triage_new_country.txt");
    assert_eq!(stdout(&o), golden);
}
