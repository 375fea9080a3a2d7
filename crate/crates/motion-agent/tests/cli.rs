use std::path::Path;
use std::process::{Command, Output};

mod common;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motion-agent"))
        .arg("--dir")
        .arg(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn failed(out: &Output) -> String {
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert!(err.starts_with("error: "), "{err}");
    err
}

#[test]
fn tiny_pipeline_chat_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.json");
    std::fs::write(&cfg, common::TINY).unwrap();
    let c = cfg.to_str().unwrap();
    let work = dir.path().join("work");
    ok(&run(&work, &["synth", "--config", c]));
    ok(&run(&work, &["train-codec", "--config", c]));
    ok(&run(&work, &["train-base", "--config", c, "--seed", "11"]));
    ok(&run(&work, &["finetune", "--task", "generate", "--config", c]));
    ok(&run(&work, &["finetune", "--task", "caption", "--config", c]));

    let script = dir.path().join("script.txt");
    std::fs::write(&script, "# comment\na person walks forward then turns left\n\nkeep walking\ndescribe m1\n").unwrap();
    let s = script.to_str().unwrap();
    let a = ok(&run(&work, &["chat", "--config", c, "--script", s]));
    let b = ok(&run(&work, &["chat", "--config", c, "--script", s, "--planner", "rule-based"]));
    assert_eq!(a, b);
    let t: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(t["turns"].as_array().unwrap().len(), 3);
    assert_eq!(t["turns"][1]["plan"]["calls"][0]["motion_ref"], "chat-m1");

    let out = Command::new(env!("CARGO_BIN_EXE_motion-agent"))
        .args(["--dir", work.to_str().unwrap(), "--config", c, "chat"])
        .stdin(std::fs::File::open(&script).unwrap())
        .output()
        .unwrap();
    let text = ok(&out);
    assert!(text.contains("session s1") && text.contains("motion s1-m1"), "{text}");

    let svg = dir.path().join("m.svg");
    ok(&run(&work, &["export-plot", "s1-m1", "--out", svg.to_str().unwrap(), "--config", c]));
    let body = std::fs::read_to_string(&svg).unwrap();
    assert!(body.starts_with("<svg") && body.contains("stroke-dasharray"));
    failed(&run(&work, &["export-plot", "s1-m9", "--out", svg.to_str().unwrap()]));
}

#[test]
fn ground_truth_eval_reports_zero_fid() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run(dir.path(), &["synth", "--seed", "3"]));
    let out = ok(&run(dir.path(), &["eval", "--ground-truth", "--seed", "3"]));
    let fid = out.lines().find(|l| l.trim_start().starts_with("fid:")).unwrap();
    let v: f64 = fid.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(v <= 1e-6, "{fid}");
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["generation"]["repeats"], 20);
}

#[test]
fn failures_exit_nonzero_with_typed_messages() {
    let dir = tempfile::tempdir().unwrap();
    let err = failed(&run(dir.path(), &["train-codec"]));
    assert!(err.contains("manifest") || err.contains("No such file"), "{err}");
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{ "lm": { "hiden": 3 } }"#).unwrap();
    let err = failed(&run(dir.path(), &["synth", "--config", bad.to_str().unwrap()]));
    assert!(err.contains("unknown config key 'lm.hiden'"), "{err}");
    failed(&run(dir.path(), &["serve"]));
    failed(&run(dir.path(), &["chat", "--script", "/nonexistent"]));
    let out = run(dir.path(), &["finetune", "--task", "dance"]);
    assert!(!out.status.success());
}
