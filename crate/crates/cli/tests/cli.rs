use std::path::Path;
use std::process::{Command, Output};

use stabclust::{box_example, Dataset};

fn stabclust(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stabclust"))
        .args(args)
        .current_dir(dir)
        .env("STABCLUST_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_example(dir: &Path) {
    std::fs::write(dir.join("example.json"), box_example().to_json().unwrap()).unwrap();
}

#[test]
fn gen_synthetic_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen", "synthetic", "--n", "2", "--m", "6", "--K", "4", "--seed", "7", "-o"];
    for name in ["a.json", "b.json"] {
        let mut a = args.to_vec();
        a.push(name);
        ok(&stabclust(&a, dir.path()));
    }
    let a = std::fs::read_to_string(dir.path().join("a.json")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
    let ds = Dataset::from_json(&a).unwrap();
    assert_eq!((ds.k(), ds.n), (4, 2));
    let manifest = json(&dir.path().join("a.json.manifest.json"));
    assert_eq!(manifest["seeds"], serde_json::json!([7]));
    assert_eq!(manifest["outputs"][0], "a.json");
}

#[test]
fn gen_shared_and_diet() {
    let dir = tempfile::tempdir().unwrap();
    ok(&stabclust(
        &["gen", "synthetic", "--shared", "--n", "5", "--m", "15", "--K", "20", "-o", "s.json"],
        dir.path(),
    ));
    let ds = Dataset::from_json(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(ds.k(), 20);
    assert!(ds.items.iter().all(|it| it.dmp == ds.items[0].dmp));

    ok(&stabclust(&["gen", "diet", "--K", "10", "--seed", "3", "-o", "d.json"], dir.path()));
    let ds = Dataset::from_json(&std::fs::read_to_string(dir.path().join("d.json")).unwrap()).unwrap();
    assert_eq!((ds.k(), ds.n), (10, 9));
}

#[test]
fn solve_example_reaches_known_optimum() {
    let dir = tempfile::tempdir().unwrap();
    write_example(dir.path());
    ok(&stabclust(&["solve", "sc", "example.json", "--L", "2", "-o", "res"], dir.path()));
    let res = json(&dir.path().join("res.json"));
    for key in ["lb_objective", "ub_objective"] {
        assert!((res[key].as_f64().unwrap() - 0.4).abs() < 1e-6, "{key}: {}", res[key]);
    }
    assert_eq!(res["optimal"], true);
    assert!((res["instability"]["overall"].as_f64().unwrap() - 0.4).abs() < 1e-6);
    assert_eq!(res["manifest"], "res.manifest.json");
    let a = res["solution"]["assignment"].as_array().unwrap();
    assert_eq!(a[0], a[1]);
    assert_ne!(a[0], a[2]);
    let csv = std::fs::read_to_string(dir.path().join("res.csv")).unwrap();
    assert!(csv.starts_with("k,cluster,instability\n"));
    assert_eq!(csv.lines().count(), 4);

    let out = stabclust(&["evaluate", "example.json", "res.json"], dir.path());
    ok(&out);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["overall"].as_f64().unwrap() - 0.4).abs() < 1e-6);
}

#[test]
fn single_cluster_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    ok(&stabclust(
        &["gen", "synthetic", "--n", "2", "--m", "6", "--K", "4", "--seed", "1", "-o", "ds.json"],
        dir.path(),
    ));
    let mut overall = Vec::new();
    for method in ["ci", "sc"] {
        ok(&stabclust(&["solve", method, "ds.json", "--L", "1", "-o", method], dir.path()));
        overall.push(json(&dir.path().join(format!("{method}.json")))["instability"]["overall"].as_f64().unwrap());
    }
    assert!((overall[0] - overall[1]).abs() < 1e-6, "{overall:?}");
}

#[test]
fn bench_writes_rows_and_means() {
    let dir = tempfile::tempdir().unwrap();
    ok(&stabclust(
        &["bench", "--n", "2", "--m", "6", "--K", "4,6", "--L", "1,2", "--seeds", "0", "-o", "b.csv"],
        dir.path(),
    ));
    let text = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,m,K,L,seed,ic,ci,ub,lb,ic_s,ci_s,ub_s,lb_s,status");
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let ub: f64 = r[7].parse().unwrap();
        let lb: f64 = r[8].parse().unwrap();
        assert!(lb <= ub + 1e-6, "{r:?}");
        assert!(!r[13].starts_with("failed") && !r[13].starts_with("partial"), "{r:?}");
    }
    let means = std::fs::read_to_string(dir.path().join("b.csv.mean.csv")).unwrap();
    assert!(means.starts_with("n,m,K,seed,n_l,ic,ci,ub,lb,"));
    assert_eq!(means.lines().count(), 3);
    assert!(dir.path().join("b.csv.manifest.json").exists());
}

#[test]
fn verify_passes_and_flags_small_m3() {
    let dir = tempfile::tempdir().unwrap();
    let out = stabclust(&["verify", "--instances", "2", "--seed", "5"], dir.path());
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));

    let out = stabclust(&["verify", "--instances", "0", "--inject-m3", "0.01"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("MISMATCH") && text.contains("M3"), "{text}");
}

#[test]
fn failures_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = stabclust(&["solve", "sc", "missing.json", "--L", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    write_example(dir.path());
    let out = stabclust(&["solve", "sc", "example.json", "--L", "2", "--alpha", "1.5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = stabclust(&["gen", "synthetic", "--n", "3", "--m", "4", "--K", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
