use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn seqtensor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqtensor")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let file = dir.join(name);
    let mut args = vec!["synth", "--out", path(&file)];
    args.extend_from_slice(extra);
    report(&seqtensor(&args));
    file
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let small = ["--set", "synth.per_class=3", "--seed", "7"];
    let a = synth(dir.path(), "a.jsonl", &small);
    let b = synth(dir.path(), "b.jsonl", &small);
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    assert_eq!(ta.iter().filter(|&&c| c == b'\n').count(), 12);
    let c = synth(dir.path(), "c.jsonl", &["--set", "synth.per_class=3", "--seed", "8"]);
    assert_ne!(std::fs::read(c).unwrap(), ta);
}

#[test]
fn weights_not_summing_to_one_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.jsonl");
    let run = seqtensor(&["synth", "--out", path(&out), "--set", "sck.beta1=0.9"]);
    assert_eq!(run.status.code(), Some(2));
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("beta1") && err.contains("sck"), "{err}");

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[sck_plus]\nbeta4 = 0.5\n").unwrap();
    let run = seqtensor(&["synth", "--out", path(&out), "--config", path(&cfg)]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("beta4"));

    let run = seqtensor(&["verify", "--set", "sck.time_grid.sigma=0"]);
    assert_eq!(run.status.code(), Some(2));
    let run = seqtensor(&["verify", "--set", "unknown_key=1"]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn encode_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let seqs = synth(dir.path(), "s.jsonl", &["--set", "synth.per_class=2", "--set", "synth.joints=15"]);
    let encode = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let r = report(&seqtensor(&["encode", path(&seqs), "--out", path(&out), "--workers", workers]));
        (r, std::fs::read(out).unwrap())
    };
    let (r1, d1) = encode("d1.takd", "1");
    let (_, d2) = encode("d2.takd", "2");
    assert_eq!(d1, d2);
    assert_eq!(r1["sequences"], 8);
    assert_eq!(r1["length"], 26_565);
}

#[test]
fn corrupt_line_exit_1_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let seqs = synth(dir.path(), "s.jsonl", &["--set", "synth.per_class=1"]);
    let mut text = std::fs::read_to_string(&seqs).unwrap();
    text.push_str("{\"version\":1,\"label\":0\n");
    std::fs::write(&seqs, text).unwrap();
    let out = dir.path().join("d.takd");
    let run = seqtensor(&["encode", path(&seqs), "--out", path(&out)]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("line 5"));
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let seqs = synth(dir.path(), "s.jsonl", &["--set", "synth.per_class=10"]);
    let desc = dir.path().join("d.takd");
    report(&seqtensor(&["encode", path(&seqs), "--out", path(&desc)]));
    let model = dir.path().join("m.takm");
    let t = report(&seqtensor(&["train", path(&desc), "--out", path(&model)]));
    assert_eq!(t["train_samples"].as_u64().unwrap() + t["test_samples"].as_u64().unwrap(), 40);
    let e = report(&seqtensor(&["eval", path(&desc), "--model", path(&model), "--map"]));
    assert!(e["test_accuracy"].as_f64().unwrap() >= 0.9, "{e}");
    assert_eq!(e["per_class"].as_array().unwrap().len(), 4);
    assert!(e["map"].as_f64().is_some());

    let run = seqtensor(&["eval", path(&desc), "--model", path(&dir.path().join("missing.takm"))]);
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn verify_passes() {
    let r = report(&seqtensor(&["verify"]));
    assert_eq!(r["pass"], true);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn bench_reports_parse() {
    let run = seqtensor(&["bench", "--set", "bench.sequences=10"]);
    assert_eq!(run.status.code(), Some(2));
    if std::env::var_os("SEQTENSOR_SKIP_BENCH").is_some() {
        return;
    }
    let r = report(&seqtensor(&["bench", "--set", "bench.sequences=50", "--set", "bench.frames=20"]));
    let reports = r["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    for rep in reports {
        assert!(rep["speedup"].as_f64().unwrap() > 0.0);
        assert!(rep["max_rel_gap"].as_f64().unwrap().is_finite());
    }
}
