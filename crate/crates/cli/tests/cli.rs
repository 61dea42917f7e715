use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn workshare(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_workshare"))
        .args(args)
        .env("WORKSHARE_OUT", root)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn sampling_table_row() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let o = workshare(&["sampling", "--out", out.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&out, "samples.csv");
    assert!(csv.lines().any(|l| l == "0.85,0.03,0.1,6020,6000,480000,468.75"), "{csv}");
    let manifest: serde_json::Value = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "sampling");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn mdp_eval_at_low_power_is_fair() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("m");
    let o = workshare(
        &["mdp-eval", "--alpha-grid", "0.1", "--mechanism", "bitcoin", "--max-fork", "8", "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&out, "ic.csv");
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "bitcoin");
    let v: f64 = row[6].parse().unwrap();
    assert!((v - 0.1).abs() < 1e-4);
    assert!(out.join("ic_bitcoin.dat").exists());
}

#[test]
fn malformed_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[mdp]\nomgea = 3\n").unwrap();
    let root = tmp.path().join("runs");
    let o = workshare(&["mdp-eval", "--config", cfg.to_str().unwrap()], &root);
    assert_eq!(o.status.code(), Some(1));
    assert!(!root.exists());
    let o = workshare(&["sampling", "--set", "sampling.epsilon=2"], &root);
    assert_eq!(o.status.code(), Some(1));
    assert!(!root.exists());
}

#[test]
fn refuses_non_empty_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("keep"), "x").unwrap();
    let o = workshare(&["sampling", "--out", tmp.path().to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(read(tmp.path(), "keep"), "x");
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 1);
}

#[test]
fn sim_is_deterministic_under_default_root() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = ["sim", "--rounds", "1500", "--seed", "3,4", "--trace"];
    for root in [&a, &b] {
        let o = workshare(&args, root);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let dirs: Vec<_> = [&a, &b]
        .iter()
        .map(|r| {
            let entries: Vec<_> = fs::read_dir(r).unwrap().map(|e| e.unwrap().path()).collect();
            assert_eq!(entries.len(), 1);
            entries[0].clone()
        })
        .collect();
    assert_eq!(dirs[0].file_name(), dirs[1].file_name());
    assert!(dirs[0].file_name().unwrap().to_str().unwrap().starts_with("sim-"));
    for f in ["reports.json", "summary.csv", "trace_3.jsonl", "trace_4.jsonl", "manifest.json"] {
        assert_eq!(read(&dirs[0], f), read(&dirs[1], f), "{f}");
    }
}

#[test]
fn rewards_demo_conserves() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let o = workshare(&["rewards-demo", "--out", out.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s: serde_json::Value = serde_json::from_str(&read(&out, "summary.json")).unwrap();
    let d = s["distributed"].as_f64().unwrap();
    let a = s["allocated"].as_f64().unwrap();
    assert!(d > 0.0 && (d - a).abs() <= 1e-9 * d);
    assert!(read(&out, "allocation.csv").starts_with("height,party,kind,work,payout\n"));
}

#[test]
fn unknown_subcommand_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = workshare(&["frobnicate"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}
