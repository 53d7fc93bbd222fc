use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use starkmbl::model::FieldProfile;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_starkmbl"));
    for (k, _) in std::env::vars() {
        if k.starts_with("STARKMBL_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(dir: &Path, sub: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    bin()
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn sorted_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn two_site_levels_match_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        r#"{"chain": {"n": 2, "alpha": 1.0, "field": {"kind": "linear", "bias": 0.7, "g": 0.5}}}"#;
    let out = run(dir.path(), "levels", cfg, &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc = read_json(&dir.path().join("out/levels.json"));
    let eigs: Vec<f64> = doc["result"]["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let f = FieldProfile::linear(2, 0.7, 0.5).unwrap();
    let (b1, b2) = (f.values()[0], f.values()[1]);
    let (s, d) = (
        (1.0 + (b1 + b2).powi(2)).sqrt(),
        (1.0 + (b1 - b2).powi(2)).sqrt(),
    );
    let mut expected = vec![-s, -d, d, s];
    expected.sort_by(f64::total_cmp);
    assert_eq!(eigs.len(), 4);
    for (a, b) in eigs.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12, "{eigs:?} vs {expected:?}");
    }
    let s = read_json(&dir.path().join("out/summary.json"));
    assert_eq!(s["result"]["n_blocks"], 2);
    assert!(s["result"]["mean_r_within_blocks"].is_null());
    let hist = fs::read_to_string(dir.path().join("out/r_histogram.csv")).unwrap();
    assert!(hist.starts_with("# command: levels\n# seed: 0\n"));
    assert!(hist.contains("# config: {"));
    assert!(hist.contains("\nbin_lo,bin_hi,density\n"));
}

const NOISY: &str = r#"{
  "chain": {"n": 6, "field": {"kind": "linear", "g": 1.0}},
  "quench": {"grid": {"t_max": 2.0, "n_points": 9}, "window": [1.0, 2.0],
             "noise": {"n_samples": 4}}
}"#;

#[test]
fn same_seed_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for (d, seed) in [(&a, "11"), (&b, "11"), (&c, "12")] {
        let out = run(
            d.path(),
            "quench",
            NOISY,
            &["--seed", seed, "--workers", "2"],
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let fa = sorted_files(&a.path().join("out"));
    assert_eq!(fa, sorted_files(&b.path().join("out")));
    assert_ne!(fa, sorted_files(&c.path().join("out")));
    assert!(fa.iter().any(|(n, _)| n == "quench_010101.csv"));
}

#[test]
fn env_overrides_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run(a.path(), "quench", NOISY, &["--seed", "5"])
        .status
        .success());
    let cfg = b.path().join("config.json");
    fs::write(&cfg, NOISY).unwrap();
    let out = bin()
        .arg("quench")
        .env("STARKMBL_CONFIG", &cfg)
        .env("STARKMBL_SEED", "5")
        .env("STARKMBL_OUT", b.path().join("out"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        sorted_files(&a.path().join("out")),
        sorted_files(&b.path().join("out"))
    );
    let summary = read_json(&b.path().join("out/summary.json"));
    assert_eq!(summary["seed"], 5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = "{\n  \"chain\": {\"n\": 4, \"field\": {\"kind\": \"linear\", \"g\": 1}},\n  \"typo\": 3\n}";
    let out = run(dir.path(), "quench", bad, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let big = r#"{"chain": {"n": 15, "field": {"kind": "linear", "g": 1}}}"#;
    assert_eq!(run(dir.path(), "levels", big, &[]).status.code(), Some(3));

    let quad_on_linear = r#"{"chain": {"n": 5, "field": {"kind": "linear", "g": 1}}}"#;
    assert_eq!(
        run(dir.path(), "quad", quad_on_linear, &[]).status.code(),
        Some(2)
    );
}

#[test]
fn sweff_writes_terms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"chain": {"n": 6, "field": {"kind": "linear", "g": 4.0}}}"#;
    let out = run(dir.path(), "sweff", cfg, &[]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("out/sweff_terms.csv")).unwrap();
    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "i,j,k,l,amplitude_j0cubed_over_g2");
    assert_eq!(body.len(), 1 + 7);
    let s = read_json(&dir.path().join("out/summary.json"));
    assert_eq!(s["result"]["g"], 4.0);
}

#[test]
fn sweep_keeps_successes_and_lists_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
      "chain": {"n": 4, "field": {"kind": "linear", "g": 1.0}},
      "sweep": {"command": "levels", "axes": {"/chain/n": [4, 15], "/chain/field/g": [0.5, 1.5]}}
    }"#;
    let out = run(dir.path(), "sweep", cfg, &["--workers", "3"]);
    assert_eq!(out.status.code(), Some(3));
    let rep = read_json(&dir.path().join("out/sweep.json"));
    let points = rep["result"]["points"].as_array().unwrap();
    assert_eq!(points.len(), 4);
    let failed: Vec<u64> = rep["result"]["failed"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(failed, vec![1, 3]);
    for (i, p) in points.iter().enumerate() {
        assert_eq!(p["index"], i);
    }
    assert_eq!(points[2]["params"]["/chain/field/g"], 1.5);
    assert_eq!(points[2]["params"]["/chain/n"], 4);
    assert!(dir.path().join("out/point_0/levels.json").exists());
    assert!(dir.path().join("out/point_2/levels.json").exists());
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert!(csv.contains("index,status,/chain/field/g,/chain/n\n0,ok,0.5,4\n"));
}

#[test]
fn trotter_quench_in_microseconds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
      "chain": {"n": 6, "field": {"kind": "linear", "g": 1.0}},
      "quench": {"grid": {"t_max": 1.0, "n_points": 5}, "window": [0.5, 1.0],
                 "evolution": {"mode": "trotter", "dt1_us": 18, "dt2_us": 18}}
    }"#;
    let out = run(dir.path(), "quench", cfg, &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = read_json(&dir.path().join("out/summary.json"));
    let i = s["result"]["runs"][0]["late_time_imbalance"]
        .as_f64()
        .unwrap();
    assert!(i > 0.0 && i <= 2.0);
}

#[test]
fn sweep_output_independent_of_workers() {
    let cfg = r#"{
      "chain": {"n": 5, "field": {"kind": "linear", "g": 1.0}},
      "sweff": {},
      "sweep": {"command": "sweff", "axes": {"/chain/alpha": [1.0, 1.3, 2.0], "/chain/field/g": [2.0, 4.0]}}
    }"#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run(a.path(), "sweep", cfg, &["--workers", "1"])
        .status
        .success());
    assert!(run(b.path(), "sweep", cfg, &["--workers", "4"])
        .status
        .success());
    for name in ["sweep.json", "sweep.csv"] {
        let read =
            |d: &tempfile::TempDir| fs::read_to_string(d.path().join("out").join(name)).unwrap();
        assert_eq!(read(&a), read(&b));
    }
    for i in 0..6 {
        let p = format!("out/point_{i}");
        assert_eq!(
            sorted_files(&a.path().join(&p)),
            sorted_files(&b.path().join(&p))
        );
    }
}
