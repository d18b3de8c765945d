use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use newsfame::hmm::{effective_gamma, HmmModel};
use newsfame::io::read_series_csv;
use serde_json::Value;

fn newsfame(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_newsfame"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env_remove("NEWSFAME_OUT_DIR")
        .output()
        .unwrap()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_error(out: &Output) -> Value {
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    v["error"].clone()
}

#[test]
fn simulate_then_train_recovers_beta_and_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = newsfame(
        d,
        &["--seed", "21", "simulate", "--days", "50000", "--beta", "0.01", "--gamma", "0.25", "--peak-exit", "geometric"],
    );
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let series = d.join("simulated.csv");
    let labels = d.join("generation.json");
    let train = newsfame(
        d,
        &["--series", series.to_str().unwrap(), "train-hmm", "--labels", labels.to_str().unwrap()],
    );
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    let m = &json(d.join("hmm_models.json"))["models"]["sim"];
    let beta = m["beta"].as_f64().unwrap();
    let gamma = m["gamma"].as_f64().unwrap();
    assert!((beta / 0.01 - 1.0).abs() <= 0.2, "beta {beta}");
    assert!((gamma / 0.25 - 1.0).abs() <= 0.2, "gamma {gamma}");
}

#[test]
fn pulse_end_round_trip_matches_effective_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(newsfame(d, &["--seed", "4", "simulate", "--days", "50000"]).status.success());
    let series = d.join("simulated.csv");
    let labels = d.join("generation.json");
    let train = newsfame(
        d,
        &["--series", series.to_str().unwrap(), "train-hmm", "--labels", labels.to_str().unwrap()],
    );
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    let trained: HmmModel = serde_json::from_value(json(d.join("hmm_models.json"))["models"]["sim"].clone()).unwrap();
    let model: HmmModel = serde_json::from_value(json(d.join("model.json"))).unwrap();
    let g = effective_gamma(&model, 50_000, 1).unwrap();
    assert!((trained.beta / model.beta - 1.0).abs() <= 0.2, "{trained:?}");
    assert!((trained.gamma / g - 1.0).abs() <= 0.2, "{} vs {g}", trained.gamma);
}

#[test]
fn fame_of_fixture_with_average_0_963() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("entity_id,date,frequency\n");
    let start = chrono::NaiveDate::from_ymd_opt(2007, 1, 1).unwrap();
    // 1000 days summing to 963
    for i in 0..1000 {
        let f = if i < 963 { 1 } else { 0 };
        csv.push_str(&format!("actor,{},{f}\n", start + chrono::Duration::days(i)));
    }
    let path = d.join("fixture.csv");
    fs::write(&path, csv).unwrap();
    let out = newsfame(d, &["--series", path.to_str().unwrap(), "fame"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(d.join("fame.json"));
    let row = &report[0];
    assert!((row["average_frequency"].as_f64().unwrap() - 0.963).abs() < 1e-12);
    assert!((row["fame"].as_f64().unwrap() - 0.675).abs() <= 0.001);
    assert!(fs::read_to_string(d.join("fame.txt")).unwrap().contains("0.674"));
}

#[test]
fn malformed_ingest_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let path = d.join("bad.csv");
    fs::write(
        &path,
        "entity_id,date,frequency\na,2008-01-01,3\na,2008-01-02,-1\na,2008-01-03,2\n",
    )
    .unwrap();
    let out = newsfame(d, &["--series", path.to_str().unwrap(), "ingest"]);
    assert!(!out.status.success());
    let err = stderr_error(&out);
    assert_eq!(err["kind"], "parse");
    assert_eq!(err["command"], "ingest");
    assert!(err["message"].as_str().unwrap().contains(":3:"), "{err}");
}

#[test]
fn usage_and_config_errors_are_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = newsfame(d, &["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["kind"], "usage");

    let out = newsfame(d, &["--series", "/does/not/exist.csv", "fame"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_error(&out)["kind"], "invalid_input");

    let help = newsfame(d, &["--help"]);
    assert!(help.status.success());
    assert!(String::from_utf8_lossy(&help.stdout).contains("forecast-ratio"));
}

#[test]
fn entity_errors_carry_the_entity() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let path = d.join("flat.csv");
    let mut csv = String::from("entity_id,date,frequency\n");
    for i in 0..5 {
        csv.push_str(&format!("flat,2008-01-0{},1\n", i + 1));
    }
    fs::write(&path, csv).unwrap();
    let out = newsfame(d, &["--series", path.to_str().unwrap(), "detect-pulses", "--entity", "flat"]);
    assert!(!out.status.success());
    let err = stderr_error(&out);
    assert_eq!(err["entity"], "flat");
    assert_eq!(err["kind"], "insufficient_data");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("run.json");
    let out_dir = d.join("from-config");
    fs::write(&cfg, format!(r#"{{"seed": 5, "out_dir": {:?}}}"#, out_dir.to_str().unwrap())).unwrap();
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_newsfame"))
            .args(["--config", cfg.to_str().unwrap()])
            .args(args)
            .env("NEWSFAME_OUT_DIR", d.join("from-env"))
            .output()
            .unwrap()
    };
    assert!(run(&["simulate", "--days", "300"]).status.success());
    assert!(out_dir.join("generation.json").exists());
    assert_eq!(json(out_dir.join("generation.json"))[0]["seed"], 5);
    assert!(run(&["--seed", "8", "simulate", "--days", "300"]).status.success());
    assert_eq!(json(out_dir.join("generation.json"))[0]["seed"], 8);
    assert!(!d.join("from-env").exists());
}

#[test]
fn emitted_series_reingest_losslessly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(newsfame(d, &["--seed", "2", "simulate", "--days", "400", "--count", "3"]).status.success());
    let original = read_series_csv(d.join("simulated.csv")).unwrap();
    let ingest_dir = d.join("ingested");
    let out = newsfame(&ingest_dir, &["--series", d.join("simulated.csv").to_str().unwrap(), "ingest"]);
    assert!(out.status.success());
    assert_eq!(read_series_csv(ingest_dir.join("series.csv")).unwrap(), original);
    assert_eq!(json(ingest_dir.join("ingest.json")).as_array().unwrap().len(), 3);
}

#[test]
fn forward_and_ratio_with_published_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = newsfame(
        d,
        &["forecast-forward", "--m-u", "20", "--threshold", "3000", "--slope=-1.415", "--intercept", "0.079", "--cohort-size", "1022651"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est = &json(d.join("forward_fame.json"))["estimates"][0];
    assert!((14.0..15.0).contains(&est["expected_count"].as_f64().unwrap()));

    let out = newsfame(
        d,
        &["forecast-ratio", "--threshold", "100", "--slope=-1.5", "--intercept", "-0.2", "--population", "3e8", "--periods", "1,10"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est = &json(d.join("ratio.json"))["estimates"][0];
    let ext = est["extrapolation"].as_array().unwrap();
    assert_eq!(ext.len(), 2);
    assert!(ext[1]["exact"].as_f64().unwrap() > ext[0]["exact"].as_f64().unwrap());
}
