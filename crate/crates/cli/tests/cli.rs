use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use stged::graph::{save_dataset, Dataset, EdgeRecord, NodeState, Snapshot};

fn stged(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stged"))
        .current_dir(dir)
        .env_remove("STGED_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

const SMALL: &str = r#"{
  "model": {"spatial_hidden": 8, "attention_heads": 2, "embedding_size": 8, "temporal_hidden": 8,
            "temporal_layers": 1, "mlp_hidden": [8], "window": 2},
  "train": {"epochs": 1, "seed": 3},
  "split": {"ratios": [80, 10, 10], "seed": 1}
}"#;

fn small_dataset(dir: &Path) {
    ok(&stged(
        dir,
        &["simulate", "--mobility", "grouped", "--nodes", "6", "--steps", "40", "--seed", "2", "--out", "d.tcn"],
    ));
    fs::write(dir.join("small.json"), SMALL).unwrap();
}

#[test]
fn simulate_is_deterministic_and_records_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--mobility", "rwp", "--nodes", "24", "--steps", "60", "--seed", "7", "--out"];
    ok(&stged(dir.path(), &[&args[..], &["a.tcn"]].concat()));
    ok(&stged(dir.path(), &[&args[..], &["b.tcn"]].concat()));
    let a = fs::read(dir.path().join("a.tcn")).unwrap();
    let b = fs::read(dir.path().join("b.tcn")).unwrap();
    // the command lines differ only in the output name
    let strip = |v: &[u8]| String::from_utf8_lossy(v).replace("a.tcn", "X").replace("b.tcn", "X");
    assert_eq!(strip(&a), strip(&b));
    let ds = stged::graph::load_dataset(dir.path().join("a.tcn")).unwrap();
    ds.validate().unwrap();
    assert_eq!(ds.snapshots.len(), 60);
    let prov = ds.header.provenance.unwrap();
    assert!(prov.contains("--seed 7") && prov.contains("seed: 7"), "{prov}");
}

#[test]
fn out_dir_environment_variable_redirects_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_stged"))
        .current_dir(dir.path())
        .env("STGED_OUT_DIR", "runs")
        .args(["simulate", "--nodes", "4", "--steps", "5", "--out", "x.tcn"])
        .output()
        .unwrap();
    ok(&o);
    assert!(dir.path().join("runs/x.tcn").exists());
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &["simulate", "--out", "x.tcn", "--bogus"],
        &["simulate", "--config", "missing.json", "--out", "x.tcn"],
        &["eval", "--data", "missing.tcn", "--checkpoint", "missing.ckpt", "--out", "m.csv"],
        &["analyze", "--data", "missing.tcn", "--out", "an"],
    ];
    for args in cases {
        let o = stged(dir.path(), args);
        assert!(!o.status.success(), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let o = stged(dir.path(), &["simulate", "--nodes", "1", "--out", "x.tcn"]);
    assert!(!o.status.success());
}

#[test]
fn analyze_path_graph_hops() {
    let dir = tempfile::tempdir().unwrap();
    let node = |id| NodeState {
        id,
        position: [id as f64 * 1000.0, 0.0],
        velocity: [0.0, 0.0],
    };
    let rec = |src, dst| EdgeRecord {
        src,
        dst,
        distance: 1000.0,
        path_loss: 113.0,
        prop_delay: 1000.0 / 2.998e8,
        timestamp: 0.25,
    };
    let snaps = (0..3)
        .map(|t| Snapshot {
            t,
            nodes: (0..3).map(node).collect(),
            edges: vec![rec(0, 1), rec(1, 0), rec(1, 2), rec(2, 1)],
        })
        .collect();
    save_dataset(dir.path().join("path.tcn"), &Dataset::new(3, snaps)).unwrap();
    let o = stged(dir.path(), &["analyze", "--data", "path.tcn", "--hops", "--steps", "0,2", "--svg", "--out", "an"]);
    ok(&o);
    assert!(String::from_utf8_lossy(&o.stdout).contains("step 0: max hops 2"));
    let hops = fs::read_to_string(dir.path().join("an/hops_t2.csv")).unwrap();
    let rows: Vec<&str> = hops.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows, ["n0,n1,n2", "0,1,2", "1,0,1", "2,1,0"]);
    let conn = fs::read_to_string(dir.path().join("an/connectivity.csv")).unwrap();
    assert!(conn.lines().any(|l| l == "0,4,0.666667,1.000000,1.333333,2"), "{conn}");
    assert!(fs::read_to_string(dir.path().join("an/hops_t0.svg")).unwrap().starts_with("<svg"));
    assert!(dir.path().join("an/connectivity.svg").exists());
    assert!(!stged(dir.path(), &["analyze", "--data", "path.tcn", "--hops", "--steps", "9", "--out", "an"]).status.success());
}

#[test]
fn train_then_eval_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let train = ["train", "--config", "small.json", "--data", "d.tcn", "--model", "gtc-lstm", "--window", "2"];
    ok(&stged(dir.path(), &[&train[..], &["--out", "m.ckpt"]].concat()));
    for f in ["m.ckpt", "m.ckpt.json", "m.ckpt.run.json", "m.ckpt.loss.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let loss = fs::read_to_string(dir.path().join("m.ckpt.loss.csv")).unwrap();
    assert!(loss.starts_with("# command: "));
    assert!(loss.contains("\n# seed: 3\nepoch,train_loss,val_loss,skipped_batches\n0,"));
    ok(&stged(dir.path(), &["eval", "--data", "d.tcn", "--checkpoint", "m.ckpt", "--out", "m.csv"]));
    let csv = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines[0], "model,window,tp,fp,fn,tn,accuracy,precision,recall,f1,flags");
    assert!(lines[1].starts_with("gtc-lstm,2,"));
    let fields: Vec<&str> = lines[1].split(',').collect();
    let counts: u64 = fields[2..6].iter().map(|f| f.parse::<u64>().unwrap()).sum();
    // 38 windows of width 2 → floor(10%) = 3 test windows, 30 ordered pairs each
    assert_eq!(counts, 3 * 30);

    // same command in a fresh directory: every artifact is byte-identical
    let again = tempfile::tempdir().unwrap();
    small_dataset(again.path());
    ok(&stged(again.path(), &[&train[..], &["--out", "m.ckpt"]].concat()));
    for f in ["m.ckpt", "m.ckpt.json", "m.ckpt.run.json", "m.ckpt.loss.csv"] {
        assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(again.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn ablate_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let o = stged(
        dir.path(),
        &["ablate", "--config", "small.json", "--data", "d.tcn", "--threads", "2", "--out", "grid.csv"],
    );
    ok(&o);
    let csv = fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 13);
    let table = fs::read_to_string(dir.path().join("grid.csv.txt")).unwrap();
    assert!(table.contains("gtc") && table.contains("lstm"));
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = stged(dir.path(), &["gradcheck", "--per-param", "2"]);
    ok(&o);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().count() >= 11, "{out}");
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
}
