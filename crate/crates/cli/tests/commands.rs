mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use avparse::formats::write_document;
use avparse::{load_ground_truth, EngineConfig, MetricsReport, PredictionDoc, ReportDoc};
use avparse_cli::commands::ablate::{AblationDoc, ROWS};
use avparse_cli::commands::sweep::SweepDoc;
use common::*;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_avparse"))
}

fn synth_corpus(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", path_str(dir), "--videos", "6"];
    args.extend_from_slice(extra);
    run(&args).unwrap();
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn read_report(dir: &Path) -> ReportDoc {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn assert_perfect(report: &MetricsReport) {
    for key in MetricsReport::KEYS {
        assert_eq!(report.get(key), Some(100.0), "{key}");
    }
}

// parse

#[test]
fn parse_without_inputs_is_a_usage_error() {
    let out = bin().arg("parse").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn malformed_bundle_does_not_stop_valid_ones() {
    let tmp = TempDir::new().unwrap();
    synth_corpus(tmp.path(), &[]);
    let bundles = tmp.path().join("bundles");
    fs::write(bundles.join("broken.json"), "{\"video_id\": ").unwrap();
    let preds = tmp.path().join("preds");
    let out = bin().args(["parse", path_str(&bundles), "--out", path_str(&preds)]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.json"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("wrote 6 prediction file(s)"));
    assert_eq!(fs::read_dir(&preds).unwrap().count(), 6);
}

#[test]
fn parse_writes_traces_on_request() {
    let tmp = TempDir::new().unwrap();
    let preds = tmp.path().join("p");
    let bundles = drift_dir().join("bundles");
    run(&["parse", path_str(&bundles), "--trace", "--out", path_str(&preds)]).unwrap();
    let trace: serde_json::Value = serde_json::from_str(&fs::read_to_string(preds.join("traces/drift.json")).unwrap()).unwrap();
    assert!(trace.to_string().contains("w_hat"));
}

#[test]
fn parse_output_is_independent_of_thread_count() {
    let tmp = TempDir::new().unwrap();
    synth_corpus(tmp.path(), &["--seed", "11"]);
    let bundles = tmp.path().join("bundles");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&["parse", path_str(&bundles), "--jobs", "1", "--trace", "--out", path_str(&a)]).unwrap();
    run(&["parse", path_str(&bundles), "--jobs", "4", "--trace", "--out", path_str(&b)]).unwrap();
    assert_eq!(tree(&a), tree(&b));
}

#[test]
fn preset_and_config_conflict() {
    let out = bin().args(["--preset", "clip-clap", "--config", "x.json", "verify"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_override_is_rejected() {
    let bundles = drift_dir().join("bundles");
    let err = run(&["parse", path_str(&bundles), "--alpha", "1.5", "--out", "/nonexistent/never"]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

// eval

#[test]
fn ground_truth_as_prediction_scores_100() {
    let tmp = TempDir::new().unwrap();
    synth_corpus(tmp.path(), &[]);
    let preds = tmp.path().join("preds");
    fs::create_dir_all(&preds).unwrap();
    for entry in fs::read_dir(tmp.path().join("gt")).unwrap() {
        let gt = load_ground_truth(&entry.unwrap().path()).unwrap();
        write_document(&preds.join(format!("{}.json", gt.video_id())), &PredictionDoc::from_ground_truth(&gt)).unwrap();
    }
    let csv = tmp.path().join("m.csv");
    let gt = tmp.path().join("gt");
    let printed = run(&["eval", "--pred", path_str(&preds), "--gt", path_str(&gt), "--csv", path_str(&csv), "--out", path_str(tmp.path())]).unwrap();
    assert!(printed.contains("audio-visual"));
    assert_perfect(&read_report(tmp.path()).report);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 12);
}

#[test]
fn disjoint_ids_are_listed() {
    let tmp = TempDir::new().unwrap();
    synth_corpus(tmp.path(), &[]);
    let preds = drift_dir().join("predictions");
    let gt = tmp.path().join("gt");
    let out = bin().args(["eval", "--pred", path_str(&preds), "--gt", path_str(&gt)]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("drift") && err.contains("synth_0000"), "{err}");
}

// sweep

fn write_grid(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("grid.json");
    fs::write(&path, body).unwrap();
    path
}

fn sweep_doc(grid: &Path, out: &Path) -> SweepDoc {
    let (bundles, gt) = (drift_dir().join("bundles"), drift_dir().join("gt"));
    run(&["sweep", "--grid", path_str(grid), "--bundles", path_str(&bundles), "--gt", path_str(&gt), "--out", path_str(out)]).unwrap();
    serde_json::from_str(&fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap()
}

#[test]
fn singleton_grid_gives_one_row() {
    let tmp = TempDir::new().unwrap();
    let grid = write_grid(
        tmp.path(),
        r#"{"alpha":[0.5],"tau0":[0.75],"tau_f":[0.55],"tau_r":[0.75],"lambda":[2.5],"objective":"audio_visual_segment"}"#,
    );
    let doc = sweep_doc(&grid, tmp.path());
    assert_eq!(doc.rows.len(), 1);
    assert_eq!(doc.rows[0].objective, doc.rows[0].report.audio_visual.segment);
}

#[test]
fn preset_grid_contains_the_defaults() {
    let tmp = TempDir::new().unwrap();
    let grid = write_grid(
        tmp.path(),
        r#"{"alpha":[0.5,0.45],"tau0":[0.75],"tau_f":[0.55,0.5],"tau_r":[0.75],"lambda":[2.5,1.0],"objective":"event_at_av_segment"}"#,
    );
    let doc = sweep_doc(&grid, tmp.path());
    assert_eq!(doc.rows.len(), 8);
    for pair in doc.rows.windows(2) {
        assert!(pair[0].objective >= pair[1].objective);
    }
    let d = EngineConfig::default();
    let row = doc
        .rows
        .iter()
        .find(|r| [r.alpha, r.tau0, r.tau_f, r.tau_r, r.lambda] == [d.alpha, d.tau0, d.tau_f, d.tau_r, d.lambda])
        .expect("default row");
    let committed: ReportDoc = serde_json::from_str(&fs::read_to_string(drift_dir().join("report.json")).unwrap()).unwrap();
    assert_eq!(row.report, committed.report);
}

#[test]
fn dominant_config_ranks_first() {
    let (bundle, gt) = drift_video();
    let high = EngineConfig { tau0: 0.95, ..EngineConfig::default() };
    let good = oracle_outcome(&bundle, &gt, &EngineConfig::default()).metrics[4];
    let bad = oracle_outcome(&bundle, &gt, &high).metrics[4];
    assert!(good > bad);

    let tmp = TempDir::new().unwrap();
    let grid = write_grid(
        tmp.path(),
        r#"{"alpha":[0.5],"tau0":[0.95,0.75],"tau_f":[0.55],"tau_r":[0.75],"lambda":[2.5],"objective":"audio_visual_segment"}"#,
    );
    let doc = sweep_doc(&grid, tmp.path());
    assert_eq!((doc.rows[0].tau0, doc.rows[1].tau0), (0.75, 0.95));
    assert!((doc.rows[0].objective - good).abs() < 1e-9);
    assert!((doc.rows[1].objective - bad).abs() < 1e-9);
}

#[test]
fn malformed_grid_is_invalid_input() {
    let tmp = TempDir::new().unwrap();
    let grid = write_grid(tmp.path(), r#"{"alpha":[0.5],"objective":"audio_visual_segment"}"#);
    let (bundles, gt) = (drift_dir().join("bundles"), drift_dir().join("gt"));
    let err = run(&["sweep", "--grid", path_str(&grid), "--bundles", path_str(&bundles), "--gt", path_str(&gt)]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

// synth

#[test]
fn same_seed_gives_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    synth_corpus(&a, &["--seed", "5", "--drift", "linear-decay:0.05", "--drift", "step:0.3"]);
    synth_corpus(&b, &["--seed", "5", "--drift", "linear-decay:0.05", "--drift", "step:0.3"]);
    synth_corpus(&c, &["--seed", "6", "--drift", "linear-decay:0.05", "--drift", "step:0.3"]);
    assert_eq!(tree(&a), tree(&b));
    assert_ne!(tree(&a), tree(&c));
    assert_eq!(tree(&a).len(), 12);
}

#[test]
fn separable_corpus_parses_perfectly() {
    let tmp = TempDir::new().unwrap();
    let spec = tmp.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"num_videos": 40, "events_per_video": [1, 1], "modality_weights": [0, 0, 1], "mean_shift": 60.0, "noise_std": 0.0}"#,
    )
    .unwrap();
    let corpus = tmp.path().join("corpus");
    run(&["synth", "--spec", path_str(&spec), "--out", path_str(&corpus)]).unwrap();
    let (bundles, gt, preds) = (corpus.join("bundles"), corpus.join("gt"), tmp.path().join("preds"));
    run(&["verify", path_str(&bundles), "--gt", path_str(&gt)]).unwrap();
    run(&["parse", path_str(&bundles), "--out", path_str(&preds)]).unwrap();
    run(&["eval", "--pred", path_str(&preds), "--gt", path_str(&gt), "--out", path_str(tmp.path())]).unwrap();
    assert_perfect(&read_report(tmp.path()).report);
}

#[test]
fn unknown_spec_field_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let spec = tmp.path().join("spec.json");
    fs::write(&spec, r#"{"num_vids": 3}"#).unwrap();
    let err = run(&["synth", "--spec", path_str(&spec), "--out", path_str(tmp.path())]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

// ablate

#[test]
fn full_ablation_row_equals_default_eval() {
    let tmp = TempDir::new().unwrap();
    synth_corpus(tmp.path(), &["--seed", "3", "--drift", "linear-decay:0.05"]);
    let (bundles, gt, preds) = (tmp.path().join("bundles"), tmp.path().join("gt"), tmp.path().join("preds"));
    let csv = tmp.path().join("ablation.csv");
    run(&["ablate", "--bundles", path_str(&bundles), "--gt", path_str(&gt), "--csv", path_str(&csv), "--out", path_str(tmp.path())])
        .unwrap();
    let doc: AblationDoc = serde_json::from_str(&fs::read_to_string(tmp.path().join("ablation.json")).unwrap()).unwrap();
    let names: Vec<&str> = doc.rows.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ROWS);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 6);

    run(&["parse", path_str(&bundles), "--out", path_str(&preds)]).unwrap();
    run(&["eval", "--pred", path_str(&preds), "--gt", path_str(&gt), "--out", path_str(tmp.path())]).unwrap();
    assert_eq!(doc.rows[0].report, read_report(tmp.path()).report);
}

// verify

#[test]
fn verify_passes_on_synthetic_corpus() {
    let tmp = TempDir::new().unwrap();
    synth_corpus(tmp.path(), &["--seed", "9", "--drift", "step:0.4"]);
    let (bundles, gt) = (tmp.path().join("bundles"), tmp.path().join("gt"));
    let out = bin().args(["verify", path_str(&bundles), "--gt", path_str(&gt), "--preset", "clip-clap"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("6 video(s)"));
    assert!(String::from_utf8_lossy(&out.stdout).ends_with("PASS\n"));
}

#[test]
fn verify_of_empty_corpus_passes() {
    let tmp = TempDir::new().unwrap();
    let printed = run(&["verify", path_str(tmp.path())]).unwrap();
    assert!(printed.starts_with("0 video(s)"));
}
