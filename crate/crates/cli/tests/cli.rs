use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;
use vht_core::datagen::{DenseGenConfig, DenseGenerator};
use vht_core::tree::codec;
use vht_core::{HoeffdingParams, HoeffdingTree};

fn vht(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vht")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    vht(args).status.code().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = vht(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&["run", "--algo", "sequential", "--bogus"]), 2);
    assert_eq!(code(&["run", "--algo", "sharding", "-z", "5"]), 2);
    assert_eq!(code(&["run", "--algo", "sequential", "--gen", "dense", "--dataset", "x.csv"]), 2);
    assert_eq!(code(&["run", "--algo", "sequential", "--repetitions", "0"]), 2);
    assert_eq!(code(&["gen", "--dataset", "x.csv"]), 2);
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = vht(&["run", "--algo", "sequential", "--dataset", "/nonexistent/elec.arff", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/elec.arff"));
}

#[test]
fn local_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        ok(&[
            "run", "--algo", "vht-local", "-p", "3", "-n", "20000", "--report-every", "5000", "--repetitions", "2",
            "--no-timing", "--out", path(dir.path()),
        ]);
    }
    for name in ["vht-local-seed1.csv", "vht-local-seed2.csv", "vht-local-aggregate.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn aggregate_is_the_mean_of_the_runs() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "run", "--algo", "sequential", "-n", "4000", "--report-every", "1000", "--repetitions", "10", "--out",
        path(dir.path()),
    ]);
    let runs: Vec<_> = (1..=10)
        .map(|s| vht_core::eval::read_csv(&dir.path().join(format!("sequential-seed{s}.csv"))).unwrap())
        .collect();
    let mut agg = csv::Reader::from_path(dir.path().join("sequential-aggregate.csv")).unwrap();
    let header = agg.headers().unwrap().clone();
    let col = header.iter().position(|h| h == "accuracy_cum_mean").unwrap();
    let rows: Vec<csv::StringRecord> = agg.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    for (i, rec) in rows.iter().enumerate() {
        let want = runs.iter().map(|r| r[i].accuracy_cum).sum::<f64>() / 10.0;
        let got: f64 = rec[col].parse().unwrap();
        assert!((got - want).abs() < 1e-9, "row {i}: {got} vs {want}");
        assert_eq!(&rec[1], "10");
    }
}

#[test]
fn untrained_model_dumps_as_one_leaf() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("tree.txt");
    ok(&["run", "--algo", "sequential", "-n", "0", "--out", path(dir.path()), "--dump-model", path(&dump)]);
    let text = fs::read_to_string(dump).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("Leaf(0)"));
}

#[test]
fn saved_model_predicts_like_the_trained_tree() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("tree.txt");
    let saved = dir.path().join("tree.bin");
    ok(&[
        "run", "--algo", "sequential", "-n", "20000", "--seeds", "4", "--out", path(dir.path()), "--dump-model",
        path(&dump), "--save-model", path(&saved),
    ]);
    let loaded = codec::from_bytes(&fs::read(saved).unwrap()).unwrap();
    assert_eq!(loaded.dump(), fs::read_to_string(dump).unwrap());
    assert!(loaded.num_splits() > 0);

    let g = DenseGenerator::new(DenseGenConfig::new(10, 10, 4)).unwrap();
    let mut tree = HoeffdingTree::new(Arc::clone(g.schema()), HoeffdingParams::default()).unwrap();
    for inst in g.stream(20_000) {
        tree.train(&inst).unwrap();
    }
    let probes = DenseGenerator::new(DenseGenConfig::new(10, 10, 99)).unwrap();
    for i in 0..1000 {
        let p = probes.instance(i);
        assert_eq!(loaded.predict(&p), tree.predict(&p));
    }
}

#[test]
fn generated_csv_reproduces_the_generator_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("dense.csv");
    ok(&["gen", "--gen", "dense", "--categorical", "3", "--numerical", "2", "-n", "3000", "--seed", "5", "-o", path(&csv)]);
    let from_gen = dir.path().join("gen");
    let from_file = dir.path().join("file");
    let common = ["run", "--algo", "sequential", "--report-every", "1000", "--no-timing", "--seeds", "5"];
    ok(&[&common[..], &["--categorical", "3", "--numerical", "2", "-n", "3000", "--out", path(&from_gen)]].concat());
    ok(&[&common[..], &["--dataset", path(&csv), "--out", path(&from_file)]].concat());
    assert_eq!(
        fs::read(from_gen.join("sequential-seed5.csv")).unwrap(),
        fs::read(from_file.join("sequential-seed5.csv")).unwrap()
    );
}

#[test]
fn plot_renders_runs() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("run.svg");
    ok(&[
        "run", "--algo", "sharding", "-p", "2", "-n", "3000", "--report-every", "500", "--out", path(dir.path()),
        "--svg", path(&svg),
    ]);
    assert!(fs::read_to_string(&svg).unwrap().contains("<svg"));
    let replot = dir.path().join("again.svg");
    ok(&["plot", path(&dir.path().join("sharding-seed1.csv")), "-o", path(&replot)]);
    assert!(fs::read_to_string(&replot).unwrap().contains("sharding-seed1"));
}

#[test]
fn sweep_writes_speedups() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["run", "--algo", "vht-wok", "-n", "3000", "--report-every", "1000", "--sweep", "1,2", "--out", path(dir.path())]);
    let table = fs::read_to_string(dir.path().join("speedup.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "algorithm,p,seed,baseline_seconds,seconds,speedup,accuracy");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("vht-wok,2,1,"));
}

#[test]
fn wk_and_sparse_runs_complete() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "run", "--algo", "vht-wk", "-z", "50", "-p", "2", "--gen", "sparse", "--vocabulary", "200", "-n", "5000",
        "--report-every", "1000", "--out", path(dir.path()),
    ]);
    assert!(out.contains("vht-wk seed 1: 5000 instances"), "{out}");
}
