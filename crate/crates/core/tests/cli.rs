use std::path::Path;
use std::process::Command;

use emtc::data::{generate_synthetic, write_ts_file, SyntheticSpec};
use serde_json::Value;

fn emtc(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_emtc"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "emtc {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_results_traces_masks_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let stdout = emtc(&["run", "--quick", "--epochs", "4", "--seeds", "0,1", "--export-masks", "--out", out]);
    assert!(stdout.contains("ACC"));

    let results = json(&dir.path().join("results.json"));
    assert_eq!(results["schema_version"], 1);
    assert_eq!(results["dataset"]["name"], "synthetic");
    assert_eq!(results["seeds"].as_array().unwrap().len(), 2);
    for metric in ["acc", "f1", "nmi", "ari"] {
        assert!(results["mean"][metric].is_f64(), "mean.{metric}");
        assert!(results["std"][metric].is_f64(), "std.{metric}");
        let text = results["formatted"][metric].as_str().unwrap();
        assert!(text.contains(" ± "), "{text}");
    }

    for seed in ["seed_0", "seed_1"] {
        let trace = std::fs::read_to_string(dir.path().join(seed).join("trace.csv")).unwrap();
        let mut lines = trace.lines();
        assert_eq!(
            lines.next().unwrap(),
            "epoch,l_total,l_contra,l_intra,l_inter,acc,nmi,ari,mask_change,seconds"
        );
        assert_eq!(lines.count(), 4);
        assert!(dir.path().join(seed).join("checkpoint.json").exists());
        let masks = std::fs::read_to_string(dir.path().join(seed).join("masks.csv")).unwrap();
        let mut rows = masks.lines();
        assert_eq!(rows.next().unwrap(), "epoch,view,sample,mask");
        let first: Vec<&str> = rows.next().unwrap().split(',').collect();
        assert_eq!(first[3].len(), 64);
        assert!(first[3].chars().all(|c| c == '0' || c == '1'));
        assert_eq!(rows.count() + 1, 4 * 3 * 30);
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"embed_dim": 8, "key_dim": 4, "epochs": 50, "seeds": [7]}"#).unwrap();
    let out = dir.path().join("out");
    emtc(&["run", "--config", cfg.to_str().unwrap(), "--epochs", "3", "--no-inter", "--out", out.to_str().unwrap()]);
    let results = json(&out.join("results.json"));
    assert_eq!(results["config"]["embed_dim"], 8);
    assert_eq!(results["config"]["epochs"], 3);
    assert_eq!(results["config"]["ablation"]["use_inter"], false);
    assert_eq!(results["seeds"][0]["seed"], 7);
    assert_eq!(results["seeds"][0]["epochs"], 3);
}

#[test]
fn ts_file_dataset_and_embedding_export() {
    let dir = tempfile::tempdir().unwrap();
    let ts = dir.path().join("Toy_TRAIN.ts");
    let spec = SyntheticSpec { n_per_cluster: 5, length: 40, ..SyntheticSpec::default() };
    write_ts_file(&generate_synthetic(&spec).unwrap(), &ts).unwrap();
    let out = dir.path().join("emb");
    emtc(&[
        "export-embedding",
        "--dataset",
        ts.to_str().unwrap(),
        "--quick",
        "--epochs",
        "3",
        "--max-length",
        "20",
        "--projection",
        "tsne",
        "--out",
        out.to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(out.join("embedding.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x,y,cluster,label");
    assert_eq!(lines.count(), 15);
}

#[test]
fn compare_masks_ablation_and_scaling_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let quick = ["--quick", "--epochs", "2", "--seeds", "0", "--out", out];

    emtc(&[&["compare-masks"][..], &quick].concat());
    let cmp = json(&dir.path().join("compare_masks.json"));
    let policies: Vec<&str> = cmp["rows"].as_array().unwrap().iter().map(|r| r["policy"].as_str().unwrap()).collect();
    assert_eq!(policies, ["evolving", "random", "uniform", "variance", "frequency"]);

    emtc(&[&["ablation", "--loss-terms"][..], &quick].concat());
    let table = std::fs::read_to_string(dir.path().join("ablation.csv")).unwrap();
    assert!(table.starts_with("variant,IVM,MEV,acc,f1,nmi,ari"));
    assert_eq!(table.lines().count(), 1 + 7);
    assert!(table.lines().nth(1).unwrap().starts_with("full,✓,✓,"));

    emtc(&["scaling", "--epochs", "2", "--repeats", "1", "--n", "12", "--t", "16,32", "--d", "2", "--out", out]);
    let timing = std::fs::read_to_string(dir.path().join("timing.csv")).unwrap();
    let mut lines = timing.lines();
    assert_eq!(lines.next().unwrap(), "axis,n,t,d,epochs,total_seconds,seconds_per_epoch");
    assert_eq!(lines.count(), 4);
}

#[test]
fn missing_uea_dataset_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_emtc"))
        .args(["run", "--dataset", "BasicMotions", "--data-dir", dir.path().to_str().unwrap(), "--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("BasicMotions"), "{err}");
}
