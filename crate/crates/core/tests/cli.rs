use std::fs;
use std::path::{Path, PathBuf};

use microquake::cli::run;
use microquake::fixtures::{TARGET_EVENTS_CSV, TARGET_GROUPS_JSON, VP_ANOMALIES_JSON, CS_WARNINGS_CSV};
use serde_json::Value;

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

fn mq(args: &[&str]) -> i32 {
    let mut all = vec!["microquake"];
    all.extend_from_slice(args);
    run(all)
}

fn json(p: PathBuf) -> Value {
    serde_json::from_slice(&fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))).unwrap()
}

/// Table 1 catalog plus grouping overrides in `dir`.
fn catalog_files(dir: &Path) -> (PathBuf, PathBuf) {
    let (c, g) = (dir.join("targets.csv"), dir.join("groups.json"));
    fs::write(&c, TARGET_EVENTS_CSV).unwrap();
    fs::write(&g, TARGET_GROUPS_JSON).unwrap();
    (c, g)
}

fn synth(dir: &Path, seed: &str) -> PathBuf {
    let out = dir.join(format!("synth{seed}"));
    assert_eq!(mq(&["synth", "--seed", seed, "--days", "40", "--episode", "20:22", "--out", &s(&out)]), 0);
    out
}

#[test]
fn missing_station_file_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = s(&tmp.path().join("nope.csv"));
    let code = mq(&["analyze", "--station-a", &missing, "--station-b", &missing, "--out", &s(tmp.path())]);
    assert_eq!(code, 3);
}

#[test]
fn bad_flags_and_config_keys_are_config_errors() {
    assert_eq!(mq(&["analyze", "--no-such-flag"]), 2);
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[surrogate]\ncuont = 3\n").unwrap();
    assert_eq!(mq(&["--config", &s(&cfg), "synth", "--out", &s(tmp.path())]), 2);
    assert_eq!(mq(&["synth", "--episode", "1:x", "--out", &s(tmp.path())]), 2);
}

#[test]
fn overlapping_episodes_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let code = mq(&["synth", "--episode", "10:12", "--episode", "11:13", "--out", &s(tmp.path())]);
    assert_eq!(code, 2);
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth(tmp.path(), "7");
    let b = tmp.path().join("again");
    assert_eq!(mq(&["synth", "--seed", "7", "--days", "40", "--episode", "20:22", "--out", &s(&b)]), 0);
    for name in ["micro.csv", "truth.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let truth = json(a.join("truth.json"));
    assert_eq!(truth["truth"]["seed"], 7);
    assert_eq!(truth["truth"]["episodes"].as_array().unwrap().len(), 1);
    let c = synth(tmp.path(), "8");
    assert_ne!(fs::read(a.join("micro.csv")).unwrap(), fs::read(c.join("micro.csv")).unwrap());
}

#[test]
fn flags_override_config_and_paths_resolve_against_it() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "3");
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        "[analyze]\nstation_a = \"synth3/micro.csv\"\nstation_b = \"synth3/micro.csv\"\n\
         station_a_id = \"A\"\nstation_b_id = \"B\"\nout = \"result\"\n\
         [measure]\nkind = \"vp\"\nq_per_day = 10.0\n\
         [surrogate]\ncount = 40\nseed = 1\n",
    )
    .unwrap();
    assert_eq!(mq(&["--config", &s(&cfg), "analyze", "--seed", "9", "--dither-window", "6"]), 0);
    let manifest = json(tmp.path().join("result").join("manifest.json"));
    let config = &manifest["config"];
    assert_eq!(config["seed"], 9);
    assert_eq!(config["surrogates"], 40);
    assert_eq!(config["measure"], "vp");
    assert_eq!(config["q_per_day"], 10.0);
    assert_eq!(manifest["seed"], 9);
    for name in ["profile.csv", "band.csv", "anomalies.json", "correlogram.csv", "profile.svg"] {
        assert!(tmp.path().join("result").join(name).is_file(), "{name}");
    }
}

#[test]
fn analyze_outputs_round_trip_through_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), "4");
    let out = tmp.path().join("out");
    let micro = s(&data.join("micro.csv"));
    let code = mq(&[
        "analyze", "--station-a", &micro, "--station-b", &micro, "--station-a-id", "A", "--station-b-id", "B",
        "--surrogates", "40", "--out", &s(&out),
    ]);
    assert_eq!(code, 0);
    let anomalies = json(out.join("anomalies.json"));
    assert_eq!(anomalies["schema_version"], 1);
    let manifest = json(out.join("manifest.json"));
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(outputs.iter().any(|o| o["file"] == "profile.csv"));
    let svg = tmp.path().join("again.svg");
    assert_eq!(mq(&["report", "--dir", &s(&out), "--svg", &s(&svg)]), 0);
    assert!(fs::read_to_string(&svg).unwrap().contains("class=\"profile\""));
}

#[test]
fn evaluate_vp_anomaly_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let (cat, groups) = catalog_files(tmp.path());
    let anomalies = tmp.path().join("anomalies.json");
    fs::write(&anomalies, VP_ANOMALIES_JSON).unwrap();
    let out = tmp.path().join("eval");
    let code = mq(&[
        "evaluate", "--anomalies", &s(&anomalies), "--catalog", &s(&cat), "--groups", &s(&groups),
        "--match-policy", "next-group", "--out", &s(&out),
    ]);
    assert_eq!(code, 0);
    let r = json(out.join("report.json"));
    assert_eq!(r["match_policy"], "next-group");
    let report = &r["report"];
    assert_eq!(report["true_positives"].as_array().unwrap().len(), 13);
    assert_eq!(report["false_positives"], serde_json::json!(["A8", "A11"]));
    assert!((report["ppv"].as_f64().unwrap() - 13.0 / 15.0).abs() < 1e-12);
    assert!((report["precursory_time"]["mean"].as_f64().unwrap() - 59.77).abs() < 0.01);
    assert!(fs::read_to_string(out.join("report.txt")).unwrap().contains("PPV"));
}

#[test]
fn evaluate_cs_warning_table() {
    let tmp = tempfile::tempdir().unwrap();
    let (cat, groups) = catalog_files(tmp.path());
    let table = tmp.path().join("warnings.csv");
    fs::write(&table, CS_WARNINGS_CSV).unwrap();
    let out = tmp.path().join("eval");
    let code = mq(&[
        "evaluate", "--warnings", &s(&table), "--catalog", &s(&cat), "--groups", &s(&groups), "--out", &s(&out),
    ]);
    assert_eq!(code, 0);
    let report = &json(out.join("report.json"))["report"];
    assert!((report["ppv"].as_f64().unwrap() - 19.0 / 22.0).abs() < 1e-12);
    assert!((report["precursory_time"]["mean"].as_f64().unwrap() - 44.53).abs() < 0.01);
    // the written table reads back to the same report
    let again = tmp.path().join("again");
    let code = mq(&[
        "evaluate", "--warnings", &s(&out.join("warnings.csv")), "--catalog", &s(&cat), "--groups", &s(&groups),
        "--out", &s(&again),
    ]);
    assert_eq!(code, 0);
    assert_eq!(json(again.join("report.json"))["report"], *report);
}

#[test]
fn evaluate_without_anomalies_misses_every_group() {
    let tmp = tempfile::tempdir().unwrap();
    let (cat, groups) = catalog_files(tmp.path());
    let anomalies = tmp.path().join("none.json");
    fs::write(&anomalies, r#"{"schema_version": 1, "anomalies": []}"#).unwrap();
    let out = tmp.path().join("eval");
    let code = mq(&[
        "evaluate", "--anomalies", &s(&anomalies), "--catalog", &s(&cat), "--groups", &s(&groups), "--out", &s(&out),
    ]);
    assert_eq!(code, 0);
    let report = &json(out.join("report.json"))["report"];
    assert_eq!(report["false_negatives"].as_array().unwrap().len(), 25);
    assert!(report["ppv"].is_null());
}

#[test]
fn evaluate_needs_exactly_one_input() {
    let tmp = tempfile::tempdir().unwrap();
    let (cat, _) = catalog_files(tmp.path());
    assert_eq!(mq(&["evaluate", "--catalog", &s(&cat)]), 2);
}

#[test]
fn rates_on_empty_input_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("empty.csv");
    fs::write(&input, "station_id,timestamp_iso8601,magnitude\n").unwrap();
    let out = tmp.path().join("rates");
    let code = mq(&[
        "rates", "--input", &s(&input), "--station-id", "A", "--start", "2012-01-01T00:00:00Z", "--end",
        "2012-01-03T00:00:00Z", "--out", &s(&out),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(out.join("rates.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time_iso8601,rate_per_day"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 49);
    assert!(rows.iter().all(|r| r.split(',').nth(1).unwrap().parse::<f64>().unwrap() == 0.0));
}

#[test]
fn rates_on_synthetic_station() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), "5");
    let out = tmp.path().join("rates");
    let code = mq(&["rates", "--input", &s(&data.join("micro.csv")), "--station-id", "A", "--svg", "true", "--out", &s(&out)]);
    assert_eq!(code, 0);
    assert!(out.join("rates.svg").is_file());
    let text = fs::read_to_string(out.join("rates.csv")).unwrap();
    let mean: f64 = {
        let v: Vec<f64> = text.lines().skip(1).map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    // base rate 10 per day, edges lose up to half the kernel mass
    assert!(mean > 7.0 && mean < 12.0, "{mean}");
}
