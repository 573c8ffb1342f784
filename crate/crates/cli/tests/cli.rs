use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn hsc(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsc"))
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_three_files() {
    let dir = TempDir::new().unwrap();
    let out = hsc(dir.path(), &["run", "fig3_cooperative"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for ext in ["csv", "json", "metrics.json"] {
        assert!(dir.path().join(format!("fig3_cooperative.{ext}")).is_file(), "{ext}");
    }
    let csv = fs::read_to_string(dir.path().join("fig3_cooperative.csv")).unwrap();
    assert_eq!(csv.lines().count(), 302);
    let doc = json(&dir.path().join("fig3_cooperative.json"));
    assert_eq!(doc["meta"]["scenario"], "fig3_cooperative");
    assert_eq!(doc["meta"]["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 301);
    let metrics = json(&dir.path().join("fig3_cooperative.metrics.json"));
    assert!(metrics["steady_state_tau_diff"].as_f64().unwrap() >= 0.0);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&hsc(dir.path(), &["run", "fig4_noncooperative"])), 0);
    let first = fs::read(dir.path().join("fig4_noncooperative.json")).unwrap();
    assert_eq!(code(&hsc(dir.path(), &["run", "fig4_noncooperative"])), 0);
    assert_eq!(first, fs::read(dir.path().join("fig4_noncooperative.json")).unwrap());
}

#[test]
fn missing_scenario_exits_1() {
    let dir = TempDir::new().unwrap();
    let out = hsc(dir.path(), &["run", "missing.scn"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("missing.scn"));
}

#[test]
fn malformed_file_exits_1_and_invalid_values_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "duration = [\n").unwrap();
    assert_eq!(code(&hsc(dir.path(), &["run", bad.to_str().unwrap()])), 1);

    let out = hsc(dir.path(), &["run", "fig3_cooperative", "--set", "controller.ts=-1"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert_eq!(
        code(&hsc(dir.path(), &["run", "fig3_cooperative", "--set", "no.such.key=1"])),
        2
    );
}

#[test]
fn scenario_file_takes_its_stem_as_name() {
    let dir = TempDir::new().unwrap();
    let source =
        fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios/fig6_adaptive_vs_fixed.toml"))
            .unwrap();
    let unnamed: String = source
        .lines()
        .filter(|l| !l.starts_with("name ="))
        .collect::<Vec<_>>()
        .join("\n");
    let path = dir.path().join("mine.toml");
    fs::write(&path, unnamed + "\n").unwrap();
    let out = hsc(dir.path(), &["run", path.to_str().unwrap(), "--set", "duration=2.0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("mine.csv").is_file());
}

#[test]
fn override_is_recorded_in_meta() {
    let dir = TempDir::new().unwrap();
    let out = hsc(
        dir.path(),
        &["run", "fig4_noncooperative", "--set", "controller.epsilon=0.2"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc = json(&dir.path().join("fig4_noncooperative.json"));
    assert_eq!(doc["meta"]["overrides"][0], "controller.epsilon=0.2");
    assert_eq!(doc["meta"]["config"]["controller"]["epsilon"], 0.2);
    assert_eq!(doc["rows"][0]["epsilon"], 0.2);
}

#[test]
fn sweep_writes_runs_and_sorted_summary() {
    let dir = TempDir::new().unwrap();
    let out = hsc(
        dir.path(),
        &[
            "sweep",
            "fig5_epsilon_sweep",
            "--values",
            "0.4,0.05,0.2,0.1",
            "--set",
            "duration=3",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(dir.path().join("fig5_epsilon_sweep_sweep.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("value,steady_state_tau_diff,max_abs_theta_s"));
    let values: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(values, vec![0.05, 0.1, 0.2, 0.4]);
    for v in ["0.05", "0.1", "0.2", "0.4"] {
        assert!(dir.path().join(format!("fig5_epsilon_sweep_epsilon_{v}.csv")).is_file());
    }
}

#[test]
fn sweep_defaults_to_scenario_values() {
    let dir = TempDir::new().unwrap();
    let out = hsc(dir.path(), &["sweep", "fig5_epsilon_sweep", "--set", "duration=1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(dir.path().join("fig5_epsilon_sweep_sweep.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
}

#[test]
fn empty_sweep_exits_2_and_bad_value_exits_1() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&hsc(dir.path(), &["sweep", "fig5_epsilon_sweep", "--values", ""])),
        2
    );
    assert_eq!(code(&hsc(dir.path(), &["sweep", "fig3_cooperative"])), 2);
    assert_eq!(
        code(&hsc(
            dir.path(),
            &["sweep", "fig5_epsilon_sweep", "--values", "0.1,abc"]
        )),
        1
    );
}

#[test]
fn compare_writes_report() {
    let dir = TempDir::new().unwrap();
    let out = hsc(dir.path(), &["compare", "fig6_adaptive_vs_fixed"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("fig6_adaptive_vs_fixed_adaptive.csv").is_file());
    assert!(dir.path().join("fig6_adaptive_vs_fixed_fixed.csv").is_file());
    let report = json(&dir.path().join("comparison.json"));
    assert!(report["disagreement_ratio"].as_f64().unwrap() < 1.0);
    assert_eq!(report["identical_modes"], false);
}

#[test]
fn compare_flags_identical_modes_and_still_exits_0() {
    let dir = TempDir::new().unwrap();
    let out = hsc(
        dir.path(),
        &[
            "compare",
            "fig4_noncooperative",
            "--baseline",
            "fig4_noncooperative",
            "--set",
            "duration=2",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("same controller mode"));
    let report = json(&dir.path().join("comparison.json"));
    assert_eq!(report["identical_modes"], true);
    assert_eq!(report["disagreement_ratio"], 1.0);
}

#[test]
fn plot_emits_well_formed_svg() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&hsc(dir.path(), &["run", "fig3_cooperative"])), 0);
    let log = dir.path().join("fig3_cooperative.csv");
    let out = hsc(
        dir.path(),
        &[
            "plot",
            log.to_str().unwrap(),
            "--panel",
            "theta_s",
            "--panel",
            "k_h,k_a",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let svg = fs::read_to_string(dir.path().join("fig3_cooperative.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).expect("well-formed XML");
    let panels = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("panel"))
        .count();
    assert_eq!(panels, 2);
    let legend: Vec<&str> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("legend"))
        .filter_map(|n| n.descendants().find(|c| c.has_tag_name("text")).and_then(|t| t.text()))
        .collect();
    assert_eq!(legend, vec!["theta_s", "k_h", "k_a"]);
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 3);
    assert!(!svg.contains("href"));
}

#[test]
fn plot_missing_column_exits_1_with_name() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&hsc(dir.path(), &["run", "fig3_cooperative"])), 0);
    let log = dir.path().join("fig3_cooperative.csv");
    let out = hsc(
        dir.path(),
        &["plot", log.to_str().unwrap(), "--panel", "k_a,warp_factor"],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("warp_factor"));
}

#[test]
fn plot_empty_log_exits_2() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("empty.csv");
    fs::write(&log, "t,theta_s,k_a\n").unwrap();
    assert_eq!(
        code(&hsc(dir.path(), &["plot", log.to_str().unwrap(), "--panel", "k_a"])),
        2
    );
}

#[test]
fn list_names_builtins() {
    let out = Command::new(env!("CARGO_BIN_EXE_hsc")).arg("list").output().unwrap();
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "fig3_cooperative",
        "fig4_noncooperative",
        "fig5_epsilon_sweep",
        "fig6_adaptive_vs_fixed",
    ] {
        assert!(text.contains(name));
    }
}
