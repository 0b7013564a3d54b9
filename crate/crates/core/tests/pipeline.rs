use viewcast::eval::rmse;
use viewcast::events::{assemble_corpus, read_events};
use viewcast::features::{FeatureExtractor, FeatureSpec};
use viewcast::harness::{run_experiment, ExperimentConfig};
use viewcast::learn::{fit_gbdt, GbdtParams, Model};
use viewcast::lim::{train_bank, LimConfig};
use viewcast::synth::{generate_corpus, SynthConfig};
use viewcast::timeline::target_value;
use viewcast::{Target, TargetKind};

fn small() -> SynthConfig {
    SynthConfig { n_videos: 400, n_hosts: 40, seed: 17, ..SynthConfig::default() }
}

#[test]
fn event_log_round_trip_gives_same_features() {
    let cfg = small();
    let (corpus, _) = generate_corpus(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.ndjson");
    corpus.write_events(&path).unwrap();
    let reread = assemble_corpus(read_events(&[&path]).unwrap(), cfg.grid()).unwrap();
    assert_eq!(reread.len(), corpus.len());

    let configs: Vec<LimConfig> =
        LimConfig::default_bank([20, 27]).into_iter().map(|c| LimConfig { host_count: 20, ..c }).collect();
    let bank = train_bank(&corpus, &configs).unwrap();
    let spec = FeatureSpec::parse("ALL").unwrap();
    for t_c in [1, 6, 14] {
        let a = FeatureExtractor::for_corpus(&corpus, Some(&bank)).build(&corpus, &spec, t_c).unwrap();
        let b = FeatureExtractor::for_corpus(&reread, Some(&bank)).build(&reread, &spec, t_c).unwrap();
        assert_eq!(a.columns(), b.columns());
        assert_eq!(a.videos(), b.videos());
        for i in 0..a.n_rows() {
            assert_eq!(a.row(i), b.row(i), "t_c {t_c} row {i}");
        }
    }
}

#[test]
fn saved_model_predicts_like_the_original() {
    let (corpus, _) = generate_corpus(&small()).unwrap();
    let x = FeatureExtractor::for_corpus(&corpus, None)
        .build(&corpus, &FeatureSpec::parse("API∪LOG").unwrap(), 7)
        .unwrap();
    let target = Target::new(TargetKind::ViewsCumulative, true);
    let y: Vec<f64> = corpus.videos().iter().map(|v| target_value(&v.timeline, target, 7).unwrap()).collect();
    let model = fit_gbdt(&x, &y, &GbdtParams { n_trees: 20, max_depth: 3, ..GbdtParams::default() }).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let loaded = Model::load(&path).unwrap();
    let a = model.predict(&x).unwrap();
    let b = loaded.predict(&x).unwrap();
    assert_eq!(a, b);

    let mean = y.iter().sum::<f64>() / y.len() as f64;
    assert!(rmse(&a, &y).unwrap() < rmse(&vec![mean; y.len()], &y).unwrap());
}

#[test]
fn experiment_from_json_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.json");
    let json = r#"{
        "experiment": "feature_sets",
        "corpus": {"synthetic": {"n_videos": 300, "n_hosts": 30, "seed": 5}},
        "feature_sets": ["API", "API∪LOG"],
        "targets": ["log(Views[c])"],
        "split": {"seed": 3, "repeats": 3},
        "gbdt": {"n_trees": 10, "max_depth": 3}
    }"#;
    std::fs::write(&path, json).unwrap();
    let cfg = ExperimentConfig::from_json_file(&path).unwrap();
    let out = run_experiment(&cfg).unwrap();
    let rows: Vec<&str> = out.report.results.iter().map(|r| r.row.as_str()).collect();
    assert_eq!(rows, ["API", "API∪LOG"]);
    for r in &out.report.results {
        assert_eq!(r.values.len(), 3);
        assert!(r.mean.is_finite() && r.mean > 0.0);
    }
    assert!(out.report.results[1].p_value.is_some());

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"experiment": "feature_sets", "corpus": {"synthetic": {}}, "colour": 1}"#).unwrap();
    assert!(ExperimentConfig::from_json_file(&bad).is_err());
}
