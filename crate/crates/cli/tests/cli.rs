use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mlgad_core::pipeline::{Dataset, History, MetricsReport, TrainedModel};
use mlgad_core::sampler::OracleCheckReport;
use mlgad_core::stitch::Level;

fn mlgad(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlgad"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn mlgad")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = mlgad(dir, args);
    assert_eq!(
        code(&out),
        0,
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn help_lists_precedence_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("later sources winning"));
    for cmd in ["synth", "sample", "train", "eval", "transfer", "oracle-check"] {
        assert!(text.contains(cmd), "{cmd}");
    }
    let out = ok(dir.path(), &["train", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--lr", "--mask-levels", "--gamma-mode", "--eval-every", "--config", "--threads"] {
        assert!(text.contains(flag), "{flag}");
    }
}

#[test]
fn oracle_check_passes_all_trials() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &["oracle-check", "--trials", "200", "--max-nodes", "12", "--seed", "7", "--out", "oracle.json"],
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("200/200"));
    let report: OracleCheckReport =
        serde_json::from_slice(&fs::read(dir.path().join("oracle.json")).unwrap()).unwrap();
    assert_eq!((report.trials, report.matches), (200, 200));
    assert!(report.mismatches.is_empty());
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&mlgad(d, &["train", "--input", "missing", "--out", "m.json"])), 2);
    assert_eq!(code(&mlgad(d, &["sample", "--input", "missing"])), 2);
    assert_eq!(code(&mlgad(d, &["frobnicate"])), 2);
    assert_eq!(code(&mlgad(d, &["sample", "--input", ".", "--depth", "4"])), 2);
    assert_eq!(code(&mlgad(d, &["oracle-check", "--max-nodes", "30"])), 2);
    assert_eq!(code(&mlgad(d, &["synth", "--nodes", "100"])), 2, "missing --out");

    ok(d, &["synth", "--kind", "multi", "--graphs", "30", "--out", "g.jsonl"]);
    assert_eq!(code(&mlgad(d, &["train", "--input", "g.jsonl", "--out", "m.json", "--lr", "fast"])), 2);
    assert_eq!(code(&mlgad(d, &["train", "--input", "g.jsonl", "--out", "m.json", "--levels", "pixel"])), 2);
    fs::write(d.join("bad.cfg"), "learning_rate = 0.1\n").unwrap();
    let out = mlgad(d, &["train", "--input", "g.jsonl", "--out", "m.json", "--config", "bad.cfg"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
    assert!(!d.join("m.json").exists());
}

#[test]
fn malformed_input_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.jsonl"), "{\"nodes\": 3, \"oops\": 1}\n").unwrap();
    let out = mlgad(dir.path(), &["sample", "--input", "bad.jsonl"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn sample_writes_one_line_per_target() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--nodes", "120", "--anomaly-rate", "0.1", "--seed", "2", "--out", "g"]);
    let ds = Dataset::load(&d.join("g")).unwrap();
    let g = &ds.graphs[0];
    ok(d, &["sample", "--input", "g", "--targets", "all", "--depth", "1", "--decay", "0.25", "--out", "s.jsonl"]);
    let text = fs::read_to_string(d.join("s.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), g.node_count() + g.edge_count());
    for line in &lines {
        let nodes = line["nodes"].as_array().unwrap();
        let hops = line["hops"].as_array().unwrap();
        let weights: Vec<f64> = line["weights"].as_array().unwrap().iter().map(|w| w.as_f64().unwrap()).collect();
        assert_eq!(nodes.len(), hops.len());
        assert_eq!(nodes.len(), weights.len());
        assert!(hops.iter().all(|h| h.as_u64().unwrap() <= 1));
        assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(line["rq_num"].as_f64().unwrap() >= 0.0);
        assert!(line["rq_den"].as_f64().unwrap() >= 0.0);
    }
    assert_eq!(lines[0]["target"]["node"], 0);
    assert!(lines[g.node_count()]["target"]["edge"].is_array());

    let stdout = ok(d, &["sample", "--input", "g", "--targets", "nodes"]).stdout;
    assert_eq!(String::from_utf8(stdout).unwrap().lines().count(), g.node_count());
}

#[test]
fn train_eval_round_trip_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--kind", "multi", "--graphs", "40", "--seed", "5", "--out", "g.jsonl"]);
    fs::write(d.join("run.cfg"), "epochs = 40\nhidden_dim = 12\nlr = 0.5\n").unwrap();
    let train = ["train", "--input", "g.jsonl", "--config", "run.cfg", "--lr", "0.002", "--out"];
    ok(d, &[&train[..], &["a.json"]].concat());
    ok(d, &[&train[..], &["b.json", "--history", "b.hist.json"]].concat());
    assert_eq!(fs::read(d.join("a.json")).unwrap(), fs::read(d.join("b.json")).unwrap());
    assert_eq!(
        fs::read(d.join("a.history.json")).unwrap(),
        fs::read(d.join("b.hist.json")).unwrap()
    );

    let trained = TrainedModel::load(&d.join("a.json")).unwrap();
    assert_eq!(trained.config.epochs, 40, "config file value");
    assert_eq!(trained.config.hidden_dim, 12);
    assert_eq!(trained.config.lr, 0.002, "flag beats config file");
    let history: History = serde_json::from_slice(&fs::read(d.join("a.history.json")).unwrap()).unwrap();
    assert_eq!(history.epochs.len(), 40);

    ok(d, &["eval", "--input", "g.jsonl", "--model", "a.json", "--out", "r1.json"]);
    ok(d, &["eval", "--input", "g.jsonl", "--model", "a.json", "--out", "r2.json"]);
    let r1: MetricsReport = serde_json::from_slice(&fs::read(d.join("r1.json")).unwrap()).unwrap();
    let mut r2: MetricsReport = serde_json::from_slice(&fs::read(d.join("r2.json")).unwrap()).unwrap();
    r2.wall_time_secs = r1.wall_time_secs;
    assert_eq!(r1, r2);
    assert!(r1.auroc(Level::Node).is_some());
    assert!(r1.auroc(Level::Graph).is_some());
}

#[test]
fn undefined_metric_needs_allow_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // No anomalous graph: every level is single-class.
    ok(
        d,
        &["synth", "--kind", "multi", "--graphs", "20", "--graph-anomaly-rate", "0", "--out", "g.jsonl"],
    );
    ok(d, &["train", "--input", "g.jsonl", "--epochs", "2", "--out", "m.json"]);
    let out = mlgad(d, &["eval", "--input", "g.jsonl", "--model", "m.json", "--out", "r.json"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--allow-degenerate"));
    let report: MetricsReport = serde_json::from_slice(&fs::read(d.join("r.json")).unwrap()).unwrap();
    assert!(!report.undefined_levels().is_empty());
    ok(d, &["eval", "--input", "g.jsonl", "--model", "m.json", "--allow-degenerate"]);
}

#[test]
fn transfer_scores_masked_level() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--kind", "multi", "--graphs", "40", "--seed", "1", "--out", "g.jsonl"]);
    ok(
        d,
        &[
            "transfer", "--input", "g.jsonl", "--source", "node", "--mask-level", "graph", "--epochs", "30",
            "--model-out", "t.json", "--out", "r.json",
        ],
    );
    let report: MetricsReport = serde_json::from_slice(&fs::read(d.join("r.json")).unwrap()).unwrap();
    let graph = &report.levels[&Level::Graph];
    assert!(!graph.trained);
    assert!(graph.auroc.is_some());
    assert!(report.levels[&Level::Node].trained);
    assert!(d.join("t.history.json").exists());
    let trained = TrainedModel::load(&d.join("t.json")).unwrap();
    assert!(trained.model.missing().contains(Level::Graph));
}
