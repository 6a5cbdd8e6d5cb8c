use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use silkforge_cli::config::{ModelSpec, RunConfig};
use tempfile::TempDir;

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_silkforge")).args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = bin(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Tiny models and a handful of steps so every stage finishes in seconds.
fn tiny_config(dir: &Path) {
    let mut c = RunConfig::desk("runs");
    c.data.corpus = Some("general.fasta".into());
    c.data.repeats = Some("repeats.fasta".into());
    c.data.properties = Some("props.tsv".into());
    c.model.student = ModelSpec::Preset("desk-tiny".into());
    c.model.teacher = ModelSpec::Preset("desk-tiny".into());
    c.tokenizer.max_len = 64;
    for t in [&mut c.distill.train, &mut c.distill.teacher_train, &mut c.level1.train, &mut c.level2.train] {
        t.max_steps = Some(6);
        t.max_epochs = 1;
    }
    c.level2.folds = 16;
    c.level2.select = 5;
    c.eval.n_samples = 4;
    c.sampling.max_new = 40;
    std::fs::write(dir.join("run.json"), c.to_json()).unwrap();
    ok(dir, &["make-synthetic", "--kind", "general", "--n", "40", "--seed", "1", "--out", "general.fasta"]);
    ok(dir, &["make-synthetic", "--kind", "repeats", "--n", "30", "--seed", "2", "--out", "repeats.fasta"]);
    ok(dir, &["make-synthetic", "--kind", "properties", "--n", "592", "--seed", "3", "--out", "props.tsv"]);
}

#[test]
fn trend_of_identical_tables_is_perfect() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["make-synthetic", "--kind", "properties", "--n", "20", "--seed", "4", "--out", "p.tsv"]);
    let report: serde_json::Value = serde_json::from_str(&ok(d, &["trend", "--pred", "p.tsv", "--ref", "p.tsv"])).unwrap();
    let o = &report["overall"];
    for k in ["pearson", "spearman", "cosine", "r2"] {
        assert!((o[k].as_f64().unwrap() - 1.0).abs() < 1e-12, "{k}");
    }
    assert_eq!(o["mae"].as_f64(), Some(0.0));
    assert_eq!(report["per_property"].as_array().unwrap().len(), 4);
}

#[test]
fn pipeline_commands() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    tiny_config(d);
    ok(d, &["distill", "--config", "run.json"]);
    ok(d, &["finetune-repeats", "--config", "run.json"]);
    let summary: serde_json::Value = serde_json::from_str(&ok(d, &["finetune-properties", "--config", "run.json"])).unwrap();
    let runs = summary.as_array().unwrap();
    assert_eq!(runs.len(), 5);
    let mut seen = BTreeSet::new();
    for r in runs {
        assert_eq!((r["train_records"].as_u64(), r["val_records"].as_u64()), (Some(555), Some(37)));
        let name = format!("runs/level2/fold{:02}", r["fold"].as_u64().unwrap());
        assert!(d.join(format!("{name}.ck")).exists());
        let val = std::fs::read_to_string(d.join(format!("{name}.val.tsv"))).unwrap();
        let ids: Vec<String> = val.lines().skip(1).map(|l| l.split('\t').next().unwrap().to_string()).collect();
        assert_eq!(ids.len(), 37);
        for id in ids {
            assert!(seen.insert(id), "validation sets overlap");
        }
    }

    let fold = format!("runs/level2/fold{:02}.ck", runs[0]["fold"].as_u64().unwrap());
    let gen = |seed: &str| {
        ok(d, &["generate", "--model", &fold, "--properties", "120,10,1.2,0.1,10,1,0.5,0.05", "--n", "3", "--seed", seed, "--temperature", "0", "--max-new", "40"])
    };
    let a = gen("7");
    assert_eq!(a, gen("7"));
    assert_eq!(a.matches('>').count(), 3);

    let pred = ok(d, &["predict", "--model", &fold, "--fasta", "repeats.fasta"]);
    assert_eq!(pred.lines().count(), 31);
    assert!(pred.starts_with("id\ttoughness"));

    let eval = ok(d, &["evaluate", "--fasta", "repeats.fasta", "--reference", "general.fasta", "--format", "json"]);
    let eval: serde_json::Value = serde_json::from_str(&eval).unwrap();
    assert_eq!(eval["summary"]["n"].as_u64(), Some(30));
    assert_eq!(eval["reference"]["coverage_ks"].as_array().unwrap().len(), 7);

    let corr = ok(d, &["correlate", "--data", "props.tsv"]);
    assert_eq!(corr.lines().count(), 15);
}

#[test]
fn errors_are_single_line_json_with_exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let check = |args: &[&str], code: i32, tag: &str| {
        let out = bin(d, args);
        assert_eq!(out.status.code(), Some(code), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        let v: serde_json::Value = serde_json::from_str(&err).unwrap();
        assert_eq!(v["error"], tag);
    };
    check(&["generate", "--model", "m.ck"], 1, "UsageError");
    check(&["no-such-command"], 1, "UsageError");
    check(&["generate", "--model", "missing.ck", "--seed", "1"], 2, "IoError");
    std::fs::write(d.join("bad.fasta"), ">x\nACDXZ\n").unwrap();
    check(&["evaluate", "--fasta", "bad.fasta"], 2, "ValidationError");
    std::fs::write(d.join("run.json"), r#"{"data":{"out_dir":"x"},"bogus":1}"#).unwrap();
    check(&["distill", "--config", "run.json"], 1, "ConfigError");
    assert!(bin(d, &["--help"]).status.success());
}
