use std::path::Path;
use std::process::{Command, Output};

fn viewcast(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viewcast"))
        .arg("--out-dir")
        .arg(out_dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |name: &str| d.join(name).to_str().unwrap().to_string();

    std::fs::write(d.join("synth.json"), r#"{"n_videos": 150, "n_hosts": 30}"#).unwrap();
    let g = ok(viewcast(d, &["--seed", "3", "generate", "--config", &p("synth.json")]));
    assert_eq!(g["videos"], 150);
    assert!(d.join("ground_truth.json").exists());

    let i = ok(viewcast(d, &["ingest", "--events", &p("events.ndjson")]));
    assert_eq!(i["videos"], 150);
    assert_eq!(i["horizon_days"], 27);

    let lim = ok(viewcast(d, &["train-lim", "--events", &p("events.ndjson"), "--out", &p("lim.ndjson")]));
    assert_eq!(lim["models"].as_array().unwrap().len(), 12);

    let f = ok(viewcast(
        d,
        &["features", "--events", &p("events.ndjson"), "--set", "ALL", "--t-c", "3", "--lim", &p("lim.ndjson"), "--out", &p("x.csv")],
    ));
    assert_eq!(f["rows"], 150);
    // Without the bank WEB_nag cannot be built.
    let bad = viewcast(d, &["features", "--events", &p("events.ndjson"), "--set", "WEB_nag", "--t-c", "3"]);
    assert!(!bad.status.success());

    std::fs::write(d.join("gbdt.json"), r#"{"n_trees": 5, "max_depth": 2}"#).unwrap();
    for model in ["gbdt", "linear", "avg"] {
        let out = p(&format!("{model}.json"));
        ok(viewcast(
            d,
            &["train", "--model", model, "--matrix", &p("x.csv"), "--events", &p("events.ndjson"), "--target", "log(Views[c])", "--target-day", "3", "--params", &p("gbdt.json"), "--out", &out],
        ));
        let e = ok(viewcast(
            d,
            &["evaluate", "--model", &out, "--matrix", &p("x.csv"), "--events", &p("events.ndjson"), "--target", "log(Views[c])", "--target-day", "3"],
        ));
        assert!(e["rmse"].as_f64().unwrap() >= 0.0);
        assert!((0.0..=1.0).contains(&e["ndcg100"].as_f64().unwrap()));
    }

    // A model trained on ALL rejects an API-only matrix.
    ok(viewcast(d, &["features", "--events", &p("events.ndjson"), "--set", "API", "--t-c", "3", "--out", &p("api.csv")]));
    let mismatch = viewcast(
        d,
        &["evaluate", "--model", &p("gbdt.json"), "--matrix", &p("api.csv"), "--events", &p("events.ndjson"), "--target", "log(Views[c])", "--target-day", "3"],
    );
    assert!(!mismatch.status.success());
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("schema"));
}

#[test]
fn experiment_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = r#"{
        "experiment": "per_day_curves",
        "corpus": {"synthetic": {"n_videos": 120, "n_hosts": 20}},
        "feature_sets": ["API", "LOG"],
        "targets": ["Views[d]"],
        "split": {"seed": 2, "repeats": 2},
        "gbdt": {"n_trees": 4, "max_depth": 2}
    }"#;
    std::fs::write(d.join("exp.json"), config).unwrap();
    let out = ok(viewcast(d, &["--threads", "2", "experiment", "--config", d.join("exp.json").to_str().unwrap()]));
    assert_eq!(out["rows"], 2 * 15);
    let report = std::fs::read_to_string(d.join("report.csv")).unwrap();
    assert_eq!(report.lines().next().unwrap(), "experiment,row,target,t_c,t_t,metric,mean,rel_pct,p_value,repeat_values");
    let curve = std::fs::read_to_string(d.join("curve_LOG_Views_d.csv")).unwrap();
    assert_eq!(curve.lines().count(), 15);
}

#[test]
fn rejects_malformed_events() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.ndjson"), "{\"kind\": \"views_day\", \"video\": \"v\", \"day\": -1, \"views\": 3}\n").unwrap();
    let out = viewcast(d, &["ingest", "--events", d.join("bad.ndjson").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}
