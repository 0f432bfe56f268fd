use std::fs;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::thread;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn hk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hearingkit"))
        .current_dir(dir)
        .env_remove("HEARINGKIT_CACHE")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = hk(dir, args);
    assert!(
        out.status.success(),
        "hearingkit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fx(rel: &str) -> String {
    fixtures().join(rel).to_string_lossy().into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["fetch", "segment", "classify-qa", "pair", "features", "kstest", "train", "evaluate", "prompts", "verify-sample"] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
    ok(dir.path(), &["--version"]);
    ok(dir.path(), &["classify-qa", "train", "--help"]);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["segment", "--bogus"][..], &["no-such-command"], &[]] {
        let out = hk(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = hk(dir.path(), &["segment", "--input", "does/not/exist", "--out", "seg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does/not/exist"));
}

#[test]
fn bad_config_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "seed = [").unwrap();
    let out = hk(dir.path(), &["--config", "c.toml", "synth", "qa", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("c.toml"));
}

#[test]
fn config_values_apply_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("c.toml"), "seed = 4\n[synth.qa]\nrows = 10\nsource = \"ukparl\"\n").unwrap();
    ok(d, &["--config", "c.toml", "synth", "qa", "--out", "a"]);
    let a = fs::read_to_string(d.join("a/ukparl.csv")).unwrap();
    assert_eq!(a.lines().count(), 11);

    ok(d, &["--config", "c.toml", "synth", "qa", "--rows", "4", "--out", "b"]);
    assert_eq!(fs::read_to_string(d.join("b/ukparl.csv")).unwrap().lines().count(), 5);

    // Same seed from the file and from the flag give the same rows.
    ok(d, &["--seed", "4", "synth", "qa", "--source", "ukparl", "--rows", "10", "--out", "c"]);
    assert_eq!(fs::read_to_string(d.join("c/ukparl.csv")).unwrap(), a);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("a/run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 4);
}

#[test]
fn default_seed_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "qa", "--source", "ama", "--rows", "20", "--out", "a"]);
    ok(d, &["synth", "qa", "--source", "ama", "--rows", "20", "--out", "b"]);
    ok(d, &["--seed", "1", "synth", "qa", "--source", "ama", "--rows", "20", "--out", "c"]);
    let read = |p: &str| fs::read_to_string(d.join(p).join("ama.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

/// Full pipeline with every output under one working directory; checks
/// that nothing lands outside the declared output directories and that
/// the worker count does not change results.
#[test]
fn pipeline_writes_only_declared_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gov = fx("smoke/raw/government.json");
    ok(d, &["segment", "--input", &fx("smoke/raw"), "--out", "seg"]);
    ok(d, &["classify-qa", "train", "--ama", &fx("qa/ama.csv"), "--ukparl", &fx("qa/ukparl.csv"), "--epochs", "100", "--out", "qa"]);
    ok(d, &["classify-qa", "evaluate", "--model", "qa/qa_model.json", "--test", &fx("qa/hand_test.csv"), "--out", "qa-eval"]);
    ok(d, &["classify-qa", "apply", "--model", "qa/qa_model.json", "--corpus", "seg", "--out", "lab"]);
    ok(d, &["pair", "--corpus", "lab", "--out", "pairs"]);
    ok(d, &["--jobs", "1", "features", "--corpus", "lab", "--out", "f1"]);
    ok(d, &["--jobs", "4", "features", "--corpus", "lab", "--out", "f4"]);
    ok(d, &["--jobs", "1", "kstest", "--corpus", "lab", "--pairs", "pairs/pairs.jsonl", "--features", "f1/features.csv", "--government", &gov, "--out", "ks1"]);
    ok(d, &["--jobs", "4", "kstest", "--corpus", "lab", "--pairs", "pairs/pairs.jsonl", "--features", "f1/features.csv", "--government", &gov, "--out", "ks4"]);
    ok(d, &["train", "--experiment", &fx("experiment.toml"), "--corpus", "lab", "--pairs", "pairs/pairs.jsonl", "--government", &gov, "--out", "run"]);
    ok(d, &["--jobs", "1", "evaluate", "--run", "run", "--out", "e1"]);
    ok(d, &["--jobs", "3", "evaluate", "--run", "run", "--out", "e3"]);
    ok(d, &["prompts", "--corpus", "lab", "--pairs", "pairs/pairs.jsonl", "--kind", "question", "--out", "prompts"]);
    ok(d, &["verify-sample", "sample", "--corpus", "seg", "--utterances-per-hearing", "4", "--out", "vs"]);

    let mut top: Vec<String> = fs::read_dir(d)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    top.sort();
    assert_eq!(
        top,
        ["e1", "e3", "f1", "f4", "ks1", "ks4", "lab", "pairs", "prompts", "qa", "qa-eval", "run", "seg", "vs"]
    );
    let same = |a: &str, b: &str| assert_eq!(fs::read(d.join(a)).unwrap(), fs::read(d.join(b)).unwrap(), "{a} vs {b}");
    same("f1/features.csv", "f4/features.csv");
    same("ks1/ks_question.csv", "ks4/ks_question.csv");
    same("ks1/heatmap_answer.csv", "ks4/heatmap_answer.csv");
    same("e1/split_accuracy.csv", "e3/split_accuracy.csv");
    same("e1/feature_importance.csv", "e3/feature_importance.csv");

    let table = fs::read_to_string(d.join("qa-eval/qa_table.csv")).unwrap();
    assert!(table.starts_with("row,"));
    assert!(table.lines().any(|l| l.starts_with("accuracy_display,")));

    // Prompts carry no roster names unless asked to.
    let prompts = fs::read_to_string(d.join("prompts/prompts.jsonl")).unwrap();
    assert!(prompts.lines().count() > 0);
    let roster: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(d.join("seg/CHRG-114hhrg10000/roster.json")).unwrap(),
    )
    .unwrap();
    for p in roster["people"].as_array().unwrap() {
        let surname = p["surname"].as_str().unwrap();
        assert!(!prompts.contains(&format!(" {surname} ")), "{surname} leaked");
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("ks1/run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "kstest");
    assert!(manifest["input_checksums"].as_object().unwrap().len() >= 4);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

fn serve_status(status: u16) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut s) = stream else { break };
            let mut buf = [0u8; 4096];
            let _ = s.read(&mut buf);
            let body = "    Mr. SMITH. Hello.";
            let _ = write!(s, "HTTP/1.1 {status} X\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len());
        }
    });
    base
}

#[test]
fn fetch_uses_the_cache_env_and_maps_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = serve_status(200);
    let out = Command::new(env!("CARGO_BIN_EXE_hearingkit"))
        .current_dir(d)
        .env("HEARINGKIT_CACHE", d.join("cache"))
        .args(["fetch", "--ids", "CHRG-117hhrg1,CHRG-117hhrg2", "--endpoint", &base, "--min-delay-ms", "0", "--out", "raw"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(d.join("raw/CHRG-117hhrg2/transcript.txt")).unwrap(), "    Mr. SMITH. Hello.");
    assert!(d.join("cache/CHRG-117hhrg1.txt").is_file());

    let missing = serve_status(404);
    let out = hk(d, &["fetch", "--ids", "CHRG-117hhrg3", "--endpoint", &missing, "--cache-dir", "c2", "--out", "r2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));

    let failing = serve_status(500);
    let out = hk(d, &["fetch", "--ids", "CHRG-117hhrg4", "--endpoint", &failing, "--cache-dir", "c3", "--min-delay-ms", "0", "--out", "r3"]);
    assert_eq!(out.status.code(), Some(2));
}
