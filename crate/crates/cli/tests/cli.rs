use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

fn jumpwass(args: &[&str], cache: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_jumpwass"));
    cmd.args(args).env_remove("JUMPWASS_CACHE_DIR");
    if let Some(c) = cache {
        cmd.env("JUMPWASS_CACHE_DIR", c);
    }
    cmd.output().unwrap()
}

fn small(sub: &str, name: &str, out: &Path) -> Vec<String> {
    [
        sub,
        "--scenario",
        scenario(name).to_str().unwrap(),
        "--paths",
        "300",
        "--steps",
        "40",
        "--out",
        out.to_str().unwrap(),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn run(args: &[String], cache: Option<&Path>) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    jumpwass(&refs, cache)
}

#[test]
fn verify_identical_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&small("verify", "identical", dir.path()), None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["lhs"]["w1"], 0.0);
    assert_eq!(report["verdicts"]["thm33"], "pass");
    assert_eq!(report["metadata"]["n_paths"], 300);
    assert_eq!(report["metadata"]["scenario_hash"].as_str().unwrap().len(), 64);
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("scenario,scenario_hash,seed,n_paths,n_steps,theta_u,"));
}

#[test]
fn verify_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let oa = run(&small("verify", "jump_size_gap", a.path()), None);
    let ob = run(&small("verify", "jump_size_gap", b.path()), None);
    assert!(oa.status.success() && ob.status.success());
    assert_eq!(oa.stdout, ob.stdout);
    for f in ["report.json", "report.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn csv_format_on_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = small("verify", "drift_gap", dir.path());
    args.extend(["--format".into(), "csv".into(), "--seed".into(), "5".into()]);
    let out = run(&args, None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("drift_gap,") && lines[1].contains(",5,300,40,"));
}

#[test]
fn bad_scenario_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("drift_gap")).unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, text.replacen("\"n_steps\"", "\"n_stepz\"", 1)).unwrap();
    let out = jumpwass(&["verify", "--scenario", bad.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("n_stepz") && err.contains("line"), "{err}");
}

#[test]
fn constants_cache_hit_is_byte_identical() {
    let cache = tempfile::tempdir().unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let oa = run(&small("constants", "sigma_gap", a.path()), Some(cache.path()));
    assert!(oa.status.success(), "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(std::fs::read_dir(cache.path()).unwrap().count(), 1);
    let ob = run(&small("constants", "sigma_gap", b.path()), Some(cache.path()));
    assert!(ob.status.success());
    assert_eq!(
        std::fs::read(a.path().join("constants.json")).unwrap(),
        std::fs::read(b.path().join("constants.json")).unwrap()
    );
    let c: serde_json::Value = serde_json::from_slice(&oa.stdout).unwrap();
    assert_eq!(c["a1"], 0.0);
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = small("sweep", "jump_size_gap", dir.path());
    args.extend([
        "--parameter".into(),
        "xstar.jump.slope".into(),
        "--values".into(),
        "0.1,0.11,0.12".into(),
        "--format".into(),
        "csv".into(),
    ]);
    let out = run(&args, None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "value,theta_u,theta_sigma,theta_nu,theta,rhs_thm31,rhs_prop32,rhs_thm33,w1,dw3_lower");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("0.1,0,0,0,0,"));
    let bad = run(
        &[small("sweep", "jump_size_gap", dir.path()), vec!["--parameter".into(), "xstar.nope".into(), "--values".into(), "1".into()]].concat(),
        None,
    );
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn distances_report_gamma_tv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&small("distances", "gamma_gap", dir.path()), None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let d: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("distances.json")).unwrap()).unwrap();
    let tv = d["compensator_tv"].as_f64().unwrap();
    assert!((tv - 2f64.ln()).abs() < 1e-15);
    assert!(d["lhs"]["w1"].as_f64().unwrap() > 0.0);
}
