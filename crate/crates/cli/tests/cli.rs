use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn gazeperc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gazeperc")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: &Output) {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(o));
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

const TINY_SYNTH: &[&str] = &["--n-images", "12", "--raters", "3", "--n-subjects", "10", "--seed", "3"];
const TINY_MODEL: &[&str] =
    &["--epochs", "2", "--layers", "1", "--heads", "2", "--d-model", "8", "--n-seeds", "1", "--batch-size", "16"];

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn run(args: Vec<String>, cwd: &Path) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    gazeperc(&refs, cwd)
}

#[test]
fn help_exits_zero_and_lists_subcommands() {
    let tmp = TempDir::new().unwrap();
    let o = gazeperc(&["--help"], tmp.path());
    ok(&o);
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in [
        "detect", "features", "aoi", "stats", "tokenize", "train", "eval", "baseline", "ablate", "attribute", "synth",
        "sample", "pipeline",
    ] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
    ok(&gazeperc(&["train", "--help"], tmp.path()));
}

#[test]
fn unknown_flag_prints_usage_and_exits_one() {
    let tmp = TempDir::new().unwrap();
    let o = gazeperc(&["synth", "--out", "x", "--no-such-flag"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(gazeperc(&["frobnicate"], tmp.path()).status.code(), Some(1));
    assert_eq!(gazeperc(&[], tmp.path()).status.code(), Some(1));
}

#[test]
fn missing_input_exits_two_with_path() {
    let tmp = TempDir::new().unwrap();
    let o = gazeperc(&["detect", "--out", "run", "--gaze", "nowhere/gaze.csv"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere/gaze.csv"), "{}", stderr(&o));
    let o = gazeperc(&["synth", "--out", "run2", "--config", "absent.json"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.json"));
}

#[test]
fn validation_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    // raters above subjects is an invalid generator config
    let o = gazeperc(&["synth", "--out", "a", "--raters", "9", "--n-subjects", "3"], tmp.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    fs::write(tmp.path().join("bad.json"), r#"{"train": {"epochs": 3, "nonsense": 1}}"#).unwrap();
    let o = gazeperc(&["synth", "--out", "b", "--config", "bad.json"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("train.nonsense"), "{}", stderr(&o));
    let o = gazeperc(&["ablate", "--out", "c", "--data", "."], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_directory_must_be_empty() {
    let tmp = TempDir::new().unwrap();
    fs::create_dir(tmp.path().join("full")).unwrap();
    fs::write(tmp.path().join("full/keep.txt"), "x").unwrap();
    let o = run(with(&["synth", "--out", "full"], TINY_SYNTH), tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read_to_string(tmp.path().join("full/keep.txt")).unwrap(), "x");
}

#[test]
fn config_precedence_flags_over_file_over_defaults() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"train": {"epochs": 3, "peak_lr": 0.002}, "synth": {"n_images": 11}}"#)
        .unwrap();
    let args = with(&["synth", "--out", "run", "--config", "c.json", "--epochs", "7", "--raters", "2"], &[]);
    ok(&run(args, tmp.path()));
    let m = manifest(&tmp.path().join("run"));
    let cfg = &m["config"];
    assert_eq!(cfg["train"]["epochs"], 7);
    assert_eq!(cfg["train"]["peak_lr"], 0.002);
    assert_eq!(cfg["train"]["batch_size"], 128);
    assert_eq!(cfg["synth"]["n_images"], 11);
    assert_eq!(cfg["synth"]["raters_per_image"], 2);
    let digest = hex::encode(Sha256::digest(fs::read(tmp.path().join("c.json")).unwrap()));
    assert_eq!(m["inputs"]["c.json"], digest.as_str());
    assert_eq!(m["subcommand"], "synth");
}

#[test]
fn writes_stay_inside_the_run_directory() {
    let tmp = TempDir::new().unwrap();
    ok(&run(with(&["synth", "--out", "data"], TINY_SYNTH), tmp.path()));
    let before: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    ok(&run(with(&["stats", "--out", "stats", "--data", "data", "--n-boot", "10"], &[]), tmp.path()));
    let mut after: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    after.retain(|n| !before.contains(n));
    assert_eq!(after, vec![std::ffi::OsString::from("stats")]);
}

/// Generates a tiny dataset and runs every data subcommand on it.
#[test]
fn every_subcommand_on_a_tiny_dataset() {
    let tmp = TempDir::new().unwrap();
    let cwd = tmp.path();
    ok(&run(with(&["synth", "--out", "data"], TINY_SYNTH), cwd));
    for f in ["gaze.csv", "ratings.jsonl", "ground_truth.jsonl", "synth_config.json", "manifest.json"] {
        assert!(cwd.join("data").join(f).is_file(), "{f}");
    }

    ok(&run(with(&["detect", "--out", "det", "--gaze", "data/gaze.csv"], &[]), cwd));
    let events = fs::read_to_string(cwd.join("det/events.csv")).unwrap();
    assert!(events.starts_with("image_id,subject_id,kind,onset_ms,offset_ms,cx,cy,duration_ms,next_saccade_len_px"));
    assert!(events.contains(",fixation,") && events.contains(",saccade,"));
    let m = manifest(&cwd.join("det"));
    let digest = hex::encode(Sha256::digest(fs::read(cwd.join("data/gaze.csv")).unwrap()));
    assert_eq!(m["inputs"]["data/gaze.csv"], digest.as_str());

    ok(&run(with(&["features", "--out", "feat", "--data", "data"], &[]), cwd));
    let feats = fs::read_to_string(cwd.join("feat/features.csv")).unwrap();
    let n = feats.lines().count() - 1;
    assert!(n > 30 && n <= 36, "{n}");
    assert_eq!(fs::read_dir(cwd.join("feat/heatmaps")).unwrap().count(), n);

    ok(&run(with(&["aoi", "--out", "aoi", "--data", "data"], &[]), cwd));
    let aoi = fs::read_to_string(cwd.join("aoi/aoi.csv")).unwrap();
    assert!(aoi.lines().next().unwrap().contains("vegetation"));

    ok(&run(with(&["stats", "--out", "stats", "--data", "data", "--n-boot", "10"], &[]), cwd));
    for f in ["stats.csv", "plot.json", "report.json"] {
        assert!(cwd.join("stats").join(f).is_file(), "{f}");
    }

    ok(&run(with(&["tokenize", "--out", "tok", "--data", "data", "--variant", "gaze_aoi", "--repr", "xy+dur"], &[]), cwd));
    let first = fs::read_to_string(cwd.join("tok/tokens.jsonl")).unwrap();
    let line: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert_eq!(line["gaze_width"], 3);
    assert_eq!(line["width"], 4);

    ok(&run(with(&["train", "--out", "train", "--data", "data"], TINY_MODEL), cwd));
    for f in ["config.json", "metrics.json", "checkpoint.gpnn", "log.csv", "manifest.json"] {
        assert!(cwd.join("train").join(f).is_file(), "{f}");
    }
    let log = fs::read_to_string(cwd.join("train/log.csv")).unwrap();
    assert!(log.starts_with("seed,epoch,step,lr,loss,val_macro_f1"));

    ok(&run(with(&["eval", "--out", "eval", "--data", "data", "--checkpoint", "train/checkpoint.gpnn"], &[]), cwd));
    let train_m: serde_json::Value = serde_json::from_slice(&fs::read(cwd.join("train/metrics.json")).unwrap()).unwrap();
    let eval_m: serde_json::Value = serde_json::from_slice(&fs::read(cwd.join("eval/metrics.json")).unwrap()).unwrap();
    assert_eq!(eval_m["macro_f1"], train_m["seeds"][0]["test_macro_f1"]);
    assert_eq!(eval_m["confusion"], train_m["seeds"][0]["confusion"]);

    let args = with(&["attribute", "--out", "attr", "--data", "data", "--checkpoint", "train/checkpoint.gpnn"], &[]);
    ok(&run(with(&args.iter().map(String::as_str).collect::<Vec<_>>(), &["--steps", "32", "--max-trials", "3"]), cwd));
    let attr: serde_json::Value = serde_json::from_slice(&fs::read(cwd.join("attr/attribution.json")).unwrap()).unwrap();
    assert_eq!(attr["n_sequences"], 3);

    ok(&run(with(&["baseline", "--out", "base", "--data", "data", "--kind", "aoi_composition"], TINY_MODEL), cwd));
    let base: serde_json::Value = serde_json::from_slice(&fs::read(cwd.join("base/metrics.json")).unwrap()).unwrap();
    assert_eq!(base["variant"], "aoi_composition");

    ok(&run(with(&["ablate", "--out", "abl", "--data", "data", "--ablation", "zero_gaze"], TINY_MODEL), cwd));
    let abl: serde_json::Value = serde_json::from_slice(&fs::read(cwd.join("abl/metrics.json")).unwrap()).unwrap();
    assert_eq!(abl["ablation"], "zero_gaze");
}

#[test]
fn sample_reads_a_score_table() {
    let tmp = TempDir::new().unwrap();
    let mut csv = String::from("image_id,wealthy,safe,boring\n");
    for i in 0..50 {
        let missing = if i == 7 { "" } else { "0.5" };
        csv.push_str(&format!("im{i},{},{},{missing}\n", i as f64 / 50.0, (i * 7 % 50) as f64));
    }
    fs::write(tmp.path().join("scores.csv"), csv).unwrap();
    let args = ["sample", "--out", "s", "--scores", "scores.csv", "--bins", "5", "--per-bin", "2", "--seed", "1"];
    ok(&gazeperc(&args, tmp.path()));
    let s: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("s/sample.json")).unwrap()).unwrap();
    let ids = s["image_ids"].as_array().unwrap();
    assert!(!ids.is_empty() && ids.len() <= 30);
    assert!(!ids.iter().any(|v| v == "im7"));
    fs::write(tmp.path().join("bad.csv"), "image_id,a\nx,notanumber\n").unwrap();
    assert_eq!(gazeperc(&["sample", "--out", "t", "--scores", "bad.csv"], tmp.path()).status.code(), Some(1));
}

#[test]
fn pipeline_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let flags = with(
        &["--synth-default", "--seed", "7", "--n-images", "20", "--n-boot", "20", "--steps", "16", "--max-trials", "4"],
        TINY_MODEL,
    );
    for dir in ["a", "b"] {
        let mut args = vec!["pipeline".to_string(), "--out".into(), dir.into()];
        args.extend(flags.iter().cloned());
        ok(&run(args, tmp.path()));
    }
    for f in ["metrics.json", "checkpoint.gpnn", "eval.json", "attribution.json", "stats.csv", "features.csv", "log.csv"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between identical runs");
    }
    let m = manifest(&tmp.path().join("a"));
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["synth"]["seed"], 7);
    assert_eq!(m["config"]["train"]["seed"], 7);
}

#[test]
fn pipeline_needs_an_input() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(gazeperc(&["pipeline", "--out", "p"], tmp.path()).status.code(), Some(1));
}
