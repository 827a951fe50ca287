use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn labelind(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labelind"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn synth(dir: &Path) {
    ok(&labelind(
        &[
            "synth",
            "--n-cases",
            "2000",
            "--detention-rate",
            "0.08",
            "--seed",
            "3",
            "--out",
            "cases.csv",
            "--schema-out",
            "schema.json",
            "--truth-out",
            "truth.csv",
        ],
        dir,
    ));
}

const SMALL_GRID: &str = r#"{
    "data": {"csv": {"path": "cases.csv", "schema": "schema.json"}},
    "seed": 5,
    "n_subsets": 3,
    "methods": ["corr", "obs"],
    "models": ["logistic", "xgboost"],
    "hyperparameters": {"xgboost": {"n_trees": 40, "min_child_weight": 1.0, "learning_rate": 0.3}}
}"#;

#[test]
fn synth_ingest_run_report_importance() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    assert!(dir.join("truth.csv").exists());

    let summary: Value = serde_json::from_str(&ok(&labelind(
        &["ingest", "--data", "cases.csv", "--schema", "schema.json", "--json"],
        dir,
    )))
    .unwrap();
    assert_eq!(summary["cases"], 2000);
    assert_eq!(summary["indeterminate"]["cases"], 160);

    fs::write(dir.join("grid.json"), SMALL_GRID).unwrap();
    let text = ok(&labelind(&["run", "--config", "grid.json", "--subsets", "2", "--out", "run"], dir));
    assert!(text.contains("scaled MCC"));
    let snapshot: Value = serde_json::from_str(&fs::read_to_string(dir.join("run/config.json")).unwrap()).unwrap();
    assert_eq!(snapshot["n_subsets"], 2, "flag overrides the config file");
    assert_eq!(snapshot["hyperparameters"]["xgboost"]["n_trees"], 40);
    assert_eq!(snapshot["hyperparameters"]["xgboost"]["max_depth"], 4, "unset fields keep defaults");

    let report: Value = serde_json::from_str(&ok(&labelind(&["report", "--run", "run", "--json"], dir))).unwrap();
    assert_eq!(report["mcc"]["cells"].as_array().unwrap().len(), 4);

    let test_cases = fs::read_to_string(dir.join("run/test_cases.csv")).unwrap();
    let id = test_cases.lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    let cases: Value =
        serde_json::from_str(&ok(&labelind(&["report", "--run", "run", "--cases", &id, "--json"], dir))).unwrap();
    let mean = cases[0]["means"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["method"] == "obs" && m["model"] == "logistic")
        .unwrap()["mean"]
        .as_f64()
        .unwrap();
    let from_csv: f64 = (0..2)
        .map(|s| {
            let csv = fs::read_to_string(dir.join(format!("run/predictions/obs/logistic/subset_{s:02}.csv"))).unwrap();
            let line = csv.lines().find(|l| l.starts_with(&format!("{id},"))).unwrap();
            line.split(',').nth(1).unwrap().parse::<f64>().unwrap()
        })
        .sum::<f64>()
        / 2.0;
    assert!((mean - from_csv).abs() < 1e-12);

    let top = ok(&labelind(&["importance", "--run", "run", "--top", "2"], dir));
    assert!(top.contains("corr") && top.contains("1. "), "{top}");
    let top: Value = serde_json::from_str(&ok(&labelind(&["importance", "--run", "run", "--json"], dir))).unwrap();
    assert_eq!(top["obs"].as_array().unwrap().len(), 3);

    let again = labelind(&["run", "--config", "grid.json", "--subsets", "2", "--out", "run"], dir);
    ok(&again);
    assert!(String::from_utf8_lossy(&again.stderr).contains("trained 0 models"));
}

#[test]
fn exit_codes_follow_error_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    fs::write(dir.join("grid.json"), SMALL_GRID).unwrap();

    assert_eq!(code(&labelind(&["run", "--no-such-flag"], dir)), 2);
    assert_eq!(code(&labelind(&["run", "--config", "grid.json", "--subsets", "0"], dir)), 3);
    fs::write(dir.join("broken.json"), "{ not json").unwrap();
    assert_eq!(code(&labelind(&["run", "--config", "broken.json"], dir)), 3);

    fs::write(dir.join("bad.csv"), "case_id,fta\n1,0\n").unwrap();
    assert_eq!(code(&labelind(&["ingest", "--data", "bad.csv", "--schema", "schema.json"], dir)), 4);
    assert_eq!(code(&labelind(&["synth", "--detention-rate", "2", "--out", "x.csv"], dir)), 4);

    let run = ["run", "--config", "grid.json", "--models", "logistic", "--out", "run"];
    ok(&labelind(&run, dir));
    assert_eq!(code(&labelind(&["run", "--config", "grid.json", "--seed", "9", "--out", "run"], dir)), 3);
    assert_eq!(code(&labelind(&["report", "--run", "run", "--cases", "no-such-case"], dir)), 7);
    assert_eq!(code(&labelind(&["report", "--run", "missing"], dir)), 6);
    assert_eq!(code(&labelind(&["importance", "--run", "run"], dir)), 3);
}

#[test]
fn synth_config_overlays_the_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("gen.json"), r#"{"n_cases": 500, "detention_rate": 0.2}"#).unwrap();
    ok(&labelind(
        &["synth", "--preset", "confounded", "--config", "gen.json", "--out", "c.csv", "--schema-out", "s.json"],
        dir,
    ));
    let summary: Value =
        serde_json::from_str(&ok(&labelind(&["ingest", "--data", "c.csv", "--schema", "s.json", "--json"], dir))).unwrap();
    assert_eq!(summary["cases"], 500);
    assert_eq!(summary["indeterminate"]["cases"], 100);
    assert!(summary["bail_status"]["Partial Posting"].as_u64().unwrap() > 0, "only the confounded preset uses it");
}
