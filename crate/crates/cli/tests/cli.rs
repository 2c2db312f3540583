use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qec-zne"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: [&str; 4] = ["--set", "N_total=100", "--set", "S=20"];

fn run_small(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run"];
    args.extend(SMALL);
    args.extend(extra);
    args.extend(["--out", dir.to_str().unwrap()]);
    qec(&args)
}

#[test]
fn run_writes_points_scans_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_small(dir.path(), &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["points.csv", "zne_scan.csv", "zne_scan_uncorrected.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let listed = String::from_utf8(o.stdout).unwrap();
    assert_eq!(listed.lines().count(), 4);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(code(&run_small(a.path(), &["--set", "d=5"])), 0);
    let mut args = vec!["--threads", "2"];
    args.extend(["run"]);
    args.extend(SMALL);
    args.extend(["--set", "d=5", "--out", b.path().to_str().unwrap()]);
    assert_eq!(code(&qec(&args)), 0);
    for f in ["points.csv", "zne_scan.csv", "zne_scan_uncorrected.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"experiment": "fig2", "N_total": 50, "S": 10, "r_grid": [1, 2, 3]}"#).unwrap();
    let out = dir.path().join("out");
    let o = qec(&["run", cfg.to_str().unwrap(), "--set", "seed=4", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["experiment"], "fig2");
    assert_eq!(manifest["config"]["seed"], 4);
    assert_eq!(fs::read_to_string(out.join("points.csv")).unwrap().lines().count(), 4);
}

#[test]
fn bad_configs_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for set in ["r_grid=[2,3]", "p=1.5", "bogus=1", "noise_preset=nowhere", "d=4"] {
        let o = run_small(dir.path(), &["--set", set]);
        assert_eq!(code(&o), 2, "{set}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error: "));
    }
    let o = qec(&["run", "/nonexistent/cfg.json"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn capacity_exits_with_3() {
    let o = qec(&["decode-check", "--set", "d=7", "--set", "M=4", "--t", "6"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("capacity"));
}

#[test]
fn failed_checks_exit_with_4() {
    let o = qec(&["decode-check", "--set", "d=5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("PASS"));
    // weight two defeats distance three
    let o = qec(&["decode-check", "--t", "2"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("FAIL"));
}

#[test]
fn verify_prints_one_line_per_check() {
    let o = qec(&["verify"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn scan_rereads_a_points_file() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_small(dir.path(), &[])), 0);
    let points = dir.path().join("points.csv");
    let out = dir.path().join("rescan.csv");
    let o = qec(&["scan", points.to_str().unwrap(), "-d", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    // points are stored at 12 significant digits, so only the subsets must line up exactly
    let keys = |text: String| -> Vec<String> {
        text.lines().map(|l| l.splitn(4, ',').take(3).collect::<Vec<_>>().join(",")).collect()
    };
    assert_eq!(
        keys(fs::read_to_string(&out).unwrap()),
        keys(fs::read_to_string(dir.path().join("zne_scan.csv")).unwrap())
    );
    let o = qec(&["scan", points.to_str().unwrap(), "-d", "1", "--uncorrected", "--K", "1"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("d,K,r_subset,delta,eta,delta0\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn scaling_prints_or_writes_the_sweep() {
    let o = qec(&["scaling", "--set", "K=[1]"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("p,d,N,K,delta_ratio,eta,delta0,delta_tilde_1\n"));
    assert_eq!(text.lines().count(), 6);
    let dir = tempfile::tempdir().unwrap();
    let o = qec(&["scaling", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("scaling.csv").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn export_circuit_writes_all_views() {
    let dir = tempfile::tempdir().unwrap();
    let o = qec(&["export-circuit", "--set", "experiment=surface", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["circuit.circ", "uncorrected.circ", "detectors.txt", "code.json", "decoder_graph.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let circ = fs::read_to_string(dir.path().join("circuit.circ")).unwrap();
    assert!(circ.lines().any(|l| l.starts_with("QUBITS 17")), "{circ}");
}

#[test]
fn multiround_writes_one_directory_per_round_count() {
    let dir = tempfile::tempdir().unwrap();
    let o = qec(&["multiround", "--set", "S=10", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for m in 1..=4 {
        assert!(dir.path().join(format!("M{m}/points.csv")).exists());
    }
    let summary = fs::read_to_string(dir.path().join("multiround.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
}
