use std::path::Path;
use std::process::{Command, Output};

fn tsdetect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsdetect")).args(args).output().expect("spawn tsdetect")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = r#"{
    "classes": [{ "length": 3, "variance": 2.0, "load": 0.3 }],
    "esn0_db": [5],
    "detectors": [{ "kind": "genie" }, { "kind": "map_full" }, { "kind": "const_var" }],
    "trials": 30,
    "seed": 4
}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn states_prints_known_counts() {
    let o = tsdetect(&["states", "--li", "6"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("sorted states: 64"), "{s}");
    assert!(s.contains("unsorted states: 13327"), "{s}");
}

#[test]
fn complexity_prints_table_values() {
    let o = tsdetect(&["complexity", "--example", "1"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for v in ["4.53e8", "5.60e5", "3.89e3"] {
        assert!(s.contains(v), "{v} missing from\n{s}");
    }
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = tsdetect(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    assert_eq!(String::from_utf8(ta).unwrap().lines().count(), 4);
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", SMALL);
    let o = tsdetect(&["simulate", "--config", &cfg, "--trials", "5", "--esn0-db", "2,-1", "--detector", "genie"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    let rows: Vec<&str> = s.lines().skip(1).collect();
    assert_eq!(rows.len(), 2, "{s}");
    assert!(rows[0].starts_with("genie,2.0,") && rows[1].starts_with("genie,-1.0,"), "{s}");
    assert!(rows.iter().all(|r| r.split(',').nth(5) == Some("5")));
}

#[test]
fn mismatch_labels_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", SMALL);
    let o = tsdetect(&["mismatch", "--config", &cfg, "--trials", "4", "--fraction", "0.2", "--detector", "map_full"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("map_full@0.2,5.0,"));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{ "detectors": [{ "kind": "genie" }], "bogus": 1 }"#);
    assert_eq!(tsdetect(&["simulate", "--config", &bad]).status.code(), Some(1));
    let cfg = write(dir.path(), "s.json", SMALL);
    assert_eq!(tsdetect(&["simulate", "--config", &cfg, "--detector", "nope"]).status.code(), Some(1));
    assert_eq!(tsdetect(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(tsdetect(&["--help"]).status.code(), Some(0));
}

#[test]
fn train_scalable_writes_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", SMALL);
    let out = dir.path().join("m.json");
    let o = tsdetect(&[
        "train-scalable", "--config", &cfg, "--partitions", "3", "--train-length", "5000", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model = tsdetect::scalable::PartitionModel::load(&out).unwrap();
    assert_eq!(model.partitions(), 3);
}
