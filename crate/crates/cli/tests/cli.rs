use std::path::Path;
use std::process::Command;

use evireg_cli::run;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evireg"))
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

fn generate_small(dir: &Path) {
    let code = run(["evireg", "generate", "--out", &s(dir), "--n-items", "60", "--dim", "3", "--seed", "4"]);
    assert_eq!(code, 0);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(["evireg", "--help"]), 0);
    assert_eq!(run(["evireg", "frobnicate"]), 1);
    let out = s(&tmp.path().join("g"));
    assert_eq!(run(["evireg", "generate", "--out", &out, "--m-min", "5", "--m-max", "2"]), 1);
    let missing = s(&tmp.path().join("nope.jsonl"));
    assert_eq!(run(["evireg", "train", "--train", &missing, "--out", &out]), 2);

    let status = bin().args(["generate", "--n-items", "0", "--out", &out]).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn lambda_arity_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    generate_small(tmp.path());
    let train = s(&tmp.path().join("train.jsonl"));
    let out = s(&tmp.path().join("m"));
    let code = run(["evireg", "train", "--train", &train, "--out", &out, "--lambda", "0.1,0.2", "--epochs", "1"]);
    assert_eq!(code, 1);
}

#[test]
fn config_file_and_echo_reproduce_the_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let cfg = tmp.path().join("gen.toml");
    std::fs::write(&cfg, format!("[generate]\nout = {:?}\nn_items = 40\ndim = 2\nseed = 9\n", s(&a))).unwrap();
    assert_eq!(run(["evireg", "generate", "--config", &s(&cfg)]), 0);

    // The echo is a complete config; rerunning it with another output dir
    // must give the same files.
    let b = tmp.path().join("b");
    let echo = a.join("generate.config.toml");
    assert_eq!(run(["evireg", "generate", "--config", &s(&echo), "--out", &s(&b)]), 0);
    for f in ["train.jsonl", "val.jsonl", "test.jsonl", "truth.tsv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }

    std::fs::write(&cfg, "[generate]\nbogus_key = 1\n").unwrap();
    assert_eq!(run(["evireg", "generate", "--config", &s(&cfg)]), 1);
}

#[test]
fn train_eval_reject_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    generate_small(d);
    let model = d.join("m");
    let code = run([
        "evireg", "train", "--train", &s(&d.join("train.jsonl")), "--val", &s(&d.join("val.jsonl")),
        "--out", &s(&model), "--hidden", "8", "--epochs", "3", "--batch-size", "8",
    ]);
    assert_eq!(code, 0);
    assert!(model.join("model.json").is_file());
    let trace = std::fs::read_to_string(model.join("trace.tsv")).unwrap();
    assert_eq!(trace.lines().count(), 4);

    let ev = d.join("e");
    let code = run([
        "evireg", "eval", "--model", &s(&model.join("model.json")), "--data", &s(&d.join("test.jsonl")),
        "--truth", &s(&d.join("truth.tsv")), "--out", &s(&ev),
    ]);
    assert_eq!(code, 0);
    for f in ["summary.tsv", "predictions.tsv", "calibration.tsv"] {
        assert!(ev.join(f).is_file(), "{f}");
    }

    let rj = d.join("r");
    let code = run([
        "evireg", "reject", "--predictions", &s(&ev.join("predictions.tsv")), "--out", &s(&rj),
        "--fractions", "0,0.5",
    ]);
    assert_eq!(code, 0);
    let curves: Vec<_> = std::fs::read_dir(&rj)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("reject_"))
        .collect();
    assert_eq!(curves.len(), 3);
    for c in curves {
        let text = std::fs::read_to_string(c.path()).unwrap();
        assert_eq!(text.lines().count(), 3);
    }

    let code = run([
        "evireg", "reject", "--predictions", &s(&ev.join("predictions.tsv")), "--out", &s(&rj),
        "--fractions", "0.5,0.2",
    ]);
    assert_eq!(code, 1);
}
