use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mpsaqc::circuit::GateList;
use mpsaqc::pipeline::{RunConfig, RunReport, RunStatus};
use mpsaqc::Mps;

fn mpsaqc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpsaqc"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn small(out: &Path) -> Vec<String> {
    [
        "--n",
        "4",
        "--layers",
        "2",
        "--time",
        "1.0",
        "--max-iter",
        "5",
        "--out",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([out.display().to_string()])
    .collect()
}

fn args<'a>(cmd: &'a str, rest: &'a [String]) -> Vec<&'a str> {
    std::iter::once(cmd)
        .chain(rest.iter().map(String::as_str))
        .collect()
}

#[test]
fn run_writes_a_valid_report_and_circuit() {
    let dir = tempfile::tempdir().unwrap();
    let rest = small(dir.path());
    let out = mpsaqc(&args("run", &rest));
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let report =
        RunReport::from_json(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    report.validate().unwrap();
    assert_eq!(
        RunReport::from_json(&report.to_json().unwrap()).unwrap(),
        report
    );
    assert_eq!(report.status, RunStatus::Ok);
    assert_eq!(report.config.n, 4);

    let echoed = RunConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(echoed.layers, 2);
    let manifest = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("trace.csv"));

    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,cost,infidelity,grad_norm,alpha1,seconds"));

    let circuit =
        GateList::parse(&fs::read_to_string(dir.path().join("circuit.txt")).unwrap()).unwrap();
    assert_eq!(circuit, report.circuit().unwrap());

    let exp = mpsaqc(&args("export-circuit", &rest));
    assert!(
        exp.status.success(),
        "{}",
        String::from_utf8_lossy(&exp.stderr)
    );
    let mut rest_t = rest.clone();
    rest_t.push("--trotter".into());
    let exp = mpsaqc(&args("export-circuit", &rest_t));
    assert!(exp.status.success());
    let trot =
        GateList::parse(&fs::read_to_string(dir.path().join("trotter_circuit.txt")).unwrap())
            .unwrap();
    assert_eq!(trot.n, 4);
}

#[test]
fn evolve_writes_a_loadable_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpsaqc(&args("evolve", &small(dir.path())));
    assert!(out.status.success());
    let data =
        serde_json::from_str(&fs::read_to_string(dir.path().join("state.json")).unwrap()).unwrap();
    let psi = Mps::from_data(&data).unwrap();
    assert_eq!(psi.n(), 4);
    assert!((psi.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpsaqc(&["verify", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(
        text.lines().filter(|l| l.contains(" PASS ")).count(),
        3,
        "{text}"
    );
}

#[test]
fn bad_config_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "n = 4\nunknown_key = 3\n").unwrap();
    let out = mpsaqc(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[usage/"), "{err}");
    assert_eq!(err.lines().count(), 1);

    let out = mpsaqc(&["run", "--n", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_report_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpsaqc(&["export-circuit", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
