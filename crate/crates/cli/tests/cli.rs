use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn roughtrap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roughtrap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{
    "model": {"kind": "fbm", "H": 0.35},
    "d": 2,
    "T": 1.0,
    "function": "sin-mix",
    "levels": [8, 16, 32],
    "fine_ratio": 8,
    "seeds": [1, 2, 3],
    "rules": ["trapezoid", "midpoint", "rough"]
}"#;

#[test]
fn empty_seed_list_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"seeds": []}"#);
    let out = roughtrap(&[
        "converge",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));

    let out = roughtrap(&["converge", "--seeds", "", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn schema_violations_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for body in [
        r#"{"levels": [32, 16]}"#,
        r#"{"fine_ratio": 1}"#,
        r#"{"model": {"kind": "fbm", "H": 0.1}}"#,
        r#"{"unknown_field": true}"#,
        "not json",
    ] {
        let cfg = write_config(dir.path(), body);
        let out = roughtrap(&["converge", "--config", &cfg, "--out", d]);
        assert_eq!(out.status.code(), Some(2), "{body}");
    }
    let out = roughtrap(&["converge", "--config", "/no/such/file.json", "--out", d]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn converge_csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = roughtrap(&["converge", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ca = fs::read(a.join("converge.csv")).unwrap();
    let cb = fs::read(b.join("converge.csv")).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    assert!(text.starts_with("# config_sha256="));
    assert_eq!(text.lines().count(), 2 + 3 * 3 * 3);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let d = dir.path().to_str().unwrap();
    let o = roughtrap(&[
        "converge", "--config", &cfg, "--out", d, "--seeds", "0..2", "--levels", "4,8,16", "--H", "0.5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("converge.csv")).unwrap();
    assert_eq!(text.lines().count(), 2 + 2 * 3 * 3);
    assert!(text.lines().nth(2).unwrap().starts_with("0,fbm(H=0.5),4,"));
}

#[test]
fn rhovar_brownian() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"model": {"kind": "fbm", "H": 0.5}, "rho": 1.0, "levels": [8, 16, 32]}"#,
    );
    let o = roughtrap(&["rhovar", "--config", &cfg, "--out", d]);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("rhovar.csv")).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "model,n,rho,value");
    for line in text.lines().skip(2) {
        let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((value - 1.0).abs() < 1e-10, "{line}");
    }
}

#[test]
fn simulate_lift_integrate_moments_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for sub in ["simulate", "lift", "integrate"] {
        let o = roughtrap(&[sub, "--config", &cfg, "--out", d]);
        assert!(
            o.status.success(),
            "{sub}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    for name in ["path_seed1.csv", "lift_seed2.csv", "integrate.csv"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("# config_sha256="), "{name}");
    }
    let o = roughtrap(&[
        "moments",
        "--model",
        "fbm",
        "--H",
        "0.5",
        "--levels",
        "16",
        "--samples",
        "2000",
        "--out",
        d,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("moments.csv")).unwrap();
    assert_eq!(
        text.lines().nth(1).unwrap(),
        "model,statistic,n,analytic,mc_mean,mc_stderr,verdict"
    );
    assert_eq!(text.lines().count(), 2 + 3);
}
