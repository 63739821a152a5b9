use std::path::Path;
use std::process::{Command, Output};

fn neuroedge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neuroedge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn run_writes_artifacts_and_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "wb.json", r#"{"scenario": "workbench", "horizon": 2.0}"#);
    let out = dir.path().join("run");
    let res = neuroedge(&["run", "--config", &cfg, "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(summary["seed"], 3);
    assert_eq!(summary["steps"], 200);
    for f in ["run.csv", "spikes.csv", "summary.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let on_disk: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, summary);
}

#[test]
fn tcp_link_gives_the_same_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "wb.json", r#"{"scenario": "workbench", "horizon": 3.0}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(neuroedge(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    let res = neuroedge(&[
        "run",
        "--config",
        &cfg,
        "--out",
        b.to_str().unwrap(),
        "--link",
        "tcp://127.0.0.1:0",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["run.csv", "spikes.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn validation_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"scenario": "workbench", "dt": 0.0}"#);
    assert_eq!(neuroedge(&["run", "--config", &bad]).status.code(), Some(2));
    let unknown = write(dir.path(), "unknown.json", r#"{"scenario": "workbench", "gain": 1}"#);
    assert_eq!(neuroedge(&["run", "--config", &unknown]).status.code(), Some(2));
    let ok = write(dir.path(), "ok.json", r#"{"scenario": "workbench"}"#);
    assert_eq!(neuroedge(&["run", "--config", &ok, "--link", "udp://x"]).status.code(), Some(2));
}

#[test]
fn collision_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "hit.json",
        r#"{"scenario": "rendezvous", "horizon": 10.0,
            "obstacles": [{"center": [100.0, 30.0, -5.0], "velocity": [-20.0, 0.0, 0.0], "radius": 3.0}]}"#,
    );
    let out = dir.path().join("o");
    let res = neuroedge(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("obstacle"));
}

#[test]
fn sweep_writes_one_row_per_size_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "wb.json", r#"{"scenario": "workbench", "horizon": 2.0, "seed": 4}"#);
    let out = dir.path().join("s");
    let res = neuroedge(&["sweep", "--config", &cfg, "--n", "5,15", "--seeds", "2", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let mut reader = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_owned).collect();
    assert_eq!(header[..2], ["N".to_owned(), "seed".to_owned()]);
    let keys: Vec<(String, String)> = reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_owned(), r[1].to_owned())
        })
        .collect();
    let expect: Vec<(String, String)> = [("5", "4"), ("5", "5"), ("15", "4"), ("15", "5")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    assert_eq!(keys, expect);
}
