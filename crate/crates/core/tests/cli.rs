use std::fs;
use std::process::Command;

use capacitary::cli::{self, Format, LevelRow, ModelSpec, PSpec, RunConfig, ScenarioName};
use capacitary::rigidity::Status;
use serde_json::Value;

fn config(model: ModelSpec, scenario: ScenarioName) -> RunConfig {
    RunConfig::new(model, PSpec::Value(1.5), scenario)
}

fn keys_sorted(v: &Value) -> bool {
    match v {
        Value::Object(map) => {
            let keys: Vec<&String> = map.keys().collect();
            keys.windows(2).all(|w| w[0] < w[1]) && map.values().all(keys_sorted)
        }
        Value::Array(items) => items.iter().all(keys_sorted),
        _ => true,
    }
}

#[test]
fn flat_identities_all_pass() {
    let report = cli::run(&config(ModelSpec::Flat, ScenarioName::CheckIdentities)).unwrap();
    assert!(report.all_pass(), "{:#?}", report.verdicts);
    for key in ["gauss_equation", "gauss_bonnet", "capacity_law", "div_x", "div_y", "f_expansion", "holder_equality"] {
        assert_eq!(report.verdicts[key].status, Status::Pass, "{key}");
    }
}

#[test]
fn cone_contradiction_names_pinching() {
    let report = cli::run(&config(ModelSpec::Cone { a: 0.8, r_min: None }, ScenarioName::Contradict)).unwrap();
    assert_eq!(report.failed_hypothesis.as_deref(), Some("pinching"));
    assert!(!report.rows.is_empty());
}

#[test]
fn cap_willmore_expansion() {
    let report = cli::run(&config(ModelSpec::PositiveCap { k: 1.0 }, ScenarioName::WillmoreExpansion)).unwrap();
    let (c, e) = (report.constants["coefficient"], report.constants["expected"]);
    assert!(((c - e) / e).abs() < 0.02, "{c} vs {e}");
    assert_eq!(report.verdicts["small_sphere_coefficient"].status, Status::Pass);
}

#[test]
fn csv_and_sidecar_format() {
    let report = cli::run(&config(ModelSpec::Flat, ScenarioName::Monotone)).unwrap();
    let csv = cli::render_csv(&report).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), LevelRow::HEADER.join(","));
    assert_eq!(lines.count(), report.rows.len());
    assert!(!csv.contains('\r'));

    let sidecar: Value = serde_json::from_str(&cli::render_sidecar(&report).unwrap()).unwrap();
    assert!(keys_sorted(&sidecar));
    assert!(sidecar.get("rows").is_none());
    let full: Value = serde_json::from_str(&cli::render_json(&report).unwrap()).unwrap();
    assert!(keys_sorted(&full));
    assert_eq!(full["rows"].as_array().unwrap().len(), report.rows.len());
}

#[test]
fn emit_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(ModelSpec::PowerWarp { alpha: 1.5 }, ScenarioName::CheckIdentities);
    c.seed = 7;
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let report = cli::run(&c).unwrap();
        let written = cli::emit(&report, Format::Csv, &dir.path().join(name)).unwrap();
        assert_eq!(written.len(), 2);
        outputs.push(written.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn binary_runs_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"model":{"kind":"cone","a":0.8},"p":1.5,"r0":1.0,"scenario":"contradict","format":"json"}"#,
    )
    .unwrap();
    let out = dir.path().join("run.json.out");
    let bin = env!("CARGO_BIN_EXE_capacitary");
    let status = Command::new(bin)
        .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "contradict"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["failed_hypothesis"], "pinching");

    let bad = Command::new(bin).args(["--model", "flat", "--p", "2.5", "solve"]).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("(1, 2)"));
}

#[test]
fn binary_stdout_csv() {
    let out = Command::new(env!("CARGO_BIN_EXE_capacitary"))
        .args(["--model", "flat", "--p", "1.5", "monotone"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(&LevelRow::HEADER.join(",")));
}
