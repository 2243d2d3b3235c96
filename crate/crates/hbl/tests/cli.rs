use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn hbl(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run hbl")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn telegraph_check_holds() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("telegraph.json");
    let o = hbl(dir.path(), &["check", arg(&f)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for cond in ["H", "RH", "K", "D1", "D2", "D3"] {
        let v = read_json(&dir.path().join(format!("{cond}.json")));
        assert_eq!(v["result"]["verdict"], "holds", "{cond}");
        assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(v["input_sha256"].as_str().unwrap().len(), 64);
        assert!(v["config"]["tolerances"].is_object());
        assert!(v["config"]["radial"].is_array());
    }
    assert!(dir.path().join("summary.csv").exists());
    assert!(dir.path().join("D1_curve.csv").exists());
}

#[test]
fn large_frequency_failure_has_a_large_witness() {
    let dir = tempfile::tempdir().unwrap();
    let o = hbl(dir.path(), &["check", arg(&fixture("jinxin_k1_8.json"))]);
    assert_eq!(code(&o), 2);
    let d3 = read_json(&dir.path().join("D3.json"));
    assert_eq!(d3["result"]["verdict"], "fails");
    assert!(!d3["result"]["witnesses"].as_array().unwrap().is_empty());
    assert_eq!(read_json(&dir.path().join("D3_2.json"))["result"]["verdict"], "fails");
    assert_eq!(read_json(&dir.path().join("D2.json"))["result"]["verdict"], "holds");

    let o = hbl(dir.path(), &["certify", arg(&fixture("jinxin_k1_8.json"))]);
    assert_eq!(code(&o), 2);
    let cert = read_json(&dir.path().join("certificate.json"));
    assert_eq!(cert["result"]["pass"], false);
    assert_eq!(cert["result"]["witness"]["regime"], "large");
    assert!(cert["result"]["witness"]["max_re"].as_f64().unwrap() >= -1e-6);
}

#[test]
fn small_frequency_failure_has_a_small_witness() {
    let dir = tempfile::tempdir().unwrap();
    let o = hbl(dir.path(), &["check", arg(&fixture("jinxin_k2_6.json"))]);
    assert_eq!(code(&o), 2);
    assert_eq!(read_json(&dir.path().join("D2.json"))["result"]["verdict"], "fails");
    assert_eq!(read_json(&dir.path().join("D3.json"))["result"]["verdict"], "holds");
    let o = hbl(dir.path(), &["certify", arg(&fixture("jinxin_k2_6.json"))]);
    assert_eq!(code(&o), 2);
    let cert = read_json(&dir.path().join("certificate.json"));
    assert_eq!(cert["result"]["witness"]["regime"], "small");
}

#[test]
fn only_selects_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("jinxin_k1_8.json");
    assert_eq!(code(&hbl(dir.path(), &["check", arg(&f), "--only", "D1,D2"])), 0);
    assert_eq!(code(&hbl(dir.path(), &["check", arg(&f), "--only", "D2_2"])), 0);
    assert_eq!(code(&hbl(dir.path(), &["check", arg(&f), "--only", "D3_2"])), 2);
    assert_eq!(code(&hbl(dir.path(), &["check", arg(&f), "--only", "D9"])), 1);
}

#[test]
fn certify_passes_on_dissipative_systems() {
    let dir = tempfile::tempdir().unwrap();
    for (name, c_min) in [("telegraph.json", 0.0), ("jinxin_k3_6.json", 0.0), ("scalar_d1.json", 0.89)] {
        let o = hbl(dir.path(), &["certify", arg(&fixture(name)), "--format", "csv"]);
        assert_eq!(code(&o), 0, "{name}");
        let cert = read_json(&dir.path().join("certificate.json"));
        let r = &cert["result"];
        assert_eq!(r["pass"], true);
        assert!(r["c"].as_f64().unwrap() > c_min);
        assert!(r["worst"]["ratio"].as_f64().unwrap() <= r["C"].as_f64().unwrap());
        assert!(dir.path().join("envelope.csv").exists());
    }
    let cert = read_json(&dir.path().join("certificate.json"));
    assert!((cert["result"]["C"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn malformed_input_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = hbl(dir.path(), &["check", arg(&fixture("malformed_row.json"))]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 1 has length 1"), "{err}");
}

#[test]
fn unknown_keys_and_non_finite_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let extra = dir.path().join("extra.json");
    std::fs::write(&extra, r#"{"dim": 1, "n": 1, "m": 1, "A": [[[1.0]]], "DQ": [[0.0]], "colour": 3}"#).unwrap();
    let o = hbl(dir.path(), &["check", arg(&extra)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    let nan = dir.path().join("nan.json");
    std::fs::write(&nan, "{\"dim\": 1, \"n\": 1, \"m\": 1,\n \"A\": [[[NaN]]], \"DQ\": [[0.0]]}").unwrap();
    let o = hbl(dir.path(), &["check", arg(&nan)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nan.json:2:"));
}

#[test]
fn scalar_model_is_not_checkable() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hbl(dir.path(), &["check", arg(&fixture("scalar_d1.json"))])), 1);
}

#[test]
fn expand_agrees_on_a_dissipative_jinxin() {
    let dir = tempfile::tempdir().unwrap();
    let o = hbl(dir.path(), &["expand", arg(&fixture("jinxin_k3_6.json")), "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("expansions.json").exists());
    assert!(dir.path().join("expansions.csv").exists());
}

#[test]
fn sweep_matches_the_known_regions() {
    let dir = tempfile::tempdir().unwrap();
    let o = hbl(dir.path(), &["sweep-jinxin", "--k1", "1", "3", "1", "--k2", "6", "8", "2"]);
    assert_eq!(code(&o), 0);
    let mut rdr = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    let find = |a: f64, b: f64| {
        rows.iter()
            .find(|r| r[0].parse::<f64>().unwrap() == a && r[1].parse::<f64>().unwrap() == b)
            .unwrap()
            .clone()
    };
    let r = find(1.0, 8.0);
    assert_eq!((&r[3], &r[4]), ("holds", "fails"));
    let r = find(2.0, 6.0);
    assert_eq!((&r[3], &r[4]), ("fails", "holds"));
    let r = find(3.0, 6.0);
    assert_eq!((&r[3], &r[4]), ("holds", "holds"));
    assert!(dir.path().join("sweep.json").exists());
}

#[test]
fn simulate_writes_series_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let m = fixture("telegraph_linear.json");
    assert_eq!(code(&hbl(a.path(), &["simulate", arg(&m)])), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_hbl"))
        .args(["simulate", arg(&m), "--out", arg(b.path())])
        .env("HBL_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    for f in ["timeseries.csv", "envelope_check.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let fit = read_json(&a.path().join("fit.json"));
    assert_eq!(fit["result"]["manifest_sha256"].as_str().unwrap().len(), 64);
    let checks = std::fs::read_to_string(a.path().join("envelope_check.csv")).unwrap();
    assert!(!checks.contains("false"));
}

#[test]
fn jinxin_simulation_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let o = hbl(dir.path(), &["simulate", arg(&fixture("jinxin_small_data.json"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let snaps: Vec<_> = std::fs::read_dir(dir.path().join("snapshots")).unwrap().collect();
    assert!(!snaps.is_empty());
    let first = dir.path().join("snapshots/snap_0000.hbl");
    let (d, n, l, t, field) = hbl::sim::snapshot::decode(&std::fs::read(first).unwrap()).unwrap();
    assert_eq!((d, n, l, t), (1, 256, 100.0, 0.0));
    assert_eq!(field.len(), 2);
}

#[test]
fn seeds_drive_noise_initial_data() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("noise.json");
    let system = fixture("telegraph.json");
    std::fs::write(
        &manifest,
        serde_json::json!({
            "system": system,
            "mode": "linear",
            "grid": { "points": 64, "length": 20.0 },
            "T": 5.0,
            "init": { "kind": "noise", "seed": 11, "amplitude": 0.5 },
            "outputs": { "count": 8 }
        })
        .to_string(),
    )
    .unwrap();
    let run = |seed: &str, out: &str| {
        let out = dir.path().join(out);
        let o = hbl(&out, &["simulate", arg(&manifest), "--seed", seed]);
        assert_eq!(code(&o), 0);
        std::fs::read(out.join("timeseries.csv")).unwrap()
    };
    assert_eq!(run("3", "a"), run("3", "b"));
    assert_ne!(run("3", "a"), run("4", "c"));
}

#[test]
fn cfl_violation_exits_with_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = hbl(dir.path(), &["simulate", arg(&fixture("cfl_violation.json"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("CFL"));
}

#[test]
fn report_summarizes_a_check_directory() {
    let dir = tempfile::tempdir().unwrap();
    let checked = dir.path().join("checked");
    assert_eq!(code(&hbl(&checked, &["check", arg(&fixture("jinxin_k2_6.json"))])), 2);
    let o = hbl(dir.path(), &["report", arg(&checked)]);
    assert_eq!(code(&o), 2);
    let text = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("D2,fails")));
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(code(&hbl(dir.path(), &["report", arg(&empty)])), 1);
}

#[test]
fn tolerance_files_reject_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let tol = dir.path().join("tol.json");
    std::fs::write(&tol, r#"{"compat": 1e-9, "bogus": 1}"#).unwrap();
    let o = hbl(dir.path(), &["check", arg(&fixture("telegraph.json")), "--tolerances", arg(&tol)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn in_process_entry_point_matches_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap().to_string();
    let f = fixture("jinxin_k3_6.json");
    assert_eq!(hbl::cli::main_with_args(["hbl", "check", arg(&f), "--out", &out]), 0);
    assert_eq!(hbl::cli::main_with_args(["hbl", "check"]), 1);
}
