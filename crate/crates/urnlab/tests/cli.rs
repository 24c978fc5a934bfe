use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn urnlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_urnlab"))
        .args(args)
        .env_remove("URNLAB_SEED")
        .output()
        .expect("binary runs")
}

fn urnlab_env(args: &[&str], seed: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_urnlab"))
        .args(args)
        .env("URNLAB_SEED", seed)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is valid JSON")
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn find<'a>(rows: &'a [Vec<String>], quantity: &str, r: &str) -> &'a Vec<String> {
    rows.iter()
        .find(|row| row[0] == quantity && row[1] == r)
        .unwrap_or_else(|| panic!("row {quantity},{r} missing"))
}

#[test]
fn moments_csv_has_expected_rows() {
    let out = urnlab(&["moments", "--model", "zipf:s=2", "--n", "1000", "--rmax", "5", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(!text.contains('\r'));
    assert!(text.starts_with("# config: {"));
    let rows = csv_rows(&text);
    find(&rows, "EK", "");
    for r in 1..=5 {
        find(&rows, "EK_r", &r.to_string());
    }
    for q in ["v_minus", "v_plus", "w_n"] {
        let row = find(&rows, q, "");
        let mantissa = row[2].split('e').next().unwrap();
        assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17, "{row:?}");
    }
}

#[test]
fn poisson_uniform_two_variance() {
    let report = json(&urnlab(&["moments", "--model", "uniform:k=2", "--t", "2", "--poisson"]));
    let var_k = report["report"]["variance"]["var_k"]["value"].as_f64().unwrap();
    let e = (-1.0f64).exp();
    assert!((var_k - 2.0 * e * (1.0 - e)).abs() < 1e-12);
    assert!((var_k - 0.465088).abs() < 1e-6);
}

#[test]
fn unknown_family_exits_two_with_grammar() {
    let out = urnlab(&["moments", "--model", "zapf:s=2", "--n", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model grammar"), "{err}");
    assert!(err.contains("zipf:s=2.0"));
}

#[test]
fn malformed_spec_exits_two() {
    assert_eq!(urnlab(&["sample", "--model", "zipf:s=0.5", "--n", "10"]).status.code(), Some(2));
    assert_eq!(urnlab(&["sample", "--model", "geom:p=0.5", "--n", "10"]).status.code(), Some(2));
}

#[test]
fn missing_setting_is_usage_error() {
    assert_eq!(urnlab(&["moments", "--model", "zipf:s=2"]).status.code(), Some(2));
    assert_eq!(urnlab(&["moments", "--model", "zipf:s=2", "--n", "5", "--t", "5"]).status.code(), Some(2));
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn estimate_good_turing_from_csv_profile() {
    let dir = tempfile::tempdir().unwrap();
    let profile = write(dir.path(), "p.csv", "j,count\n1,7\n2,1\n3,1\n4,1\n");
    let report = json(&urnlab(&["estimate", "--profile", &profile]));
    let g = &report["report"]["good_turing"];
    assert_eq!(g[0]["r"], 0);
    assert!((g[0]["value"].as_f64().unwrap() - 0.3).abs() < 1e-15);
    assert!(report["report"]["interval"].is_null());
}

#[test]
fn estimate_ci_requires_delta() {
    let dir = tempfile::tempdir().unwrap();
    let profile = write(dir.path(), "p.csv", "1,7\n2,1\n3,1\n4,1\n");
    let out = urnlab(&["estimate", "--profile", &profile, "--ci", "--t", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let ok = json(&urnlab(&["estimate", "--profile", &profile, "--ci", "--t", "10", "--delta", "0.05"]));
    let ci = &ok["report"]["interval"];
    assert_eq!(ci["coverage_target"].as_f64().unwrap(), 0.8);
    assert!(ci["lower"].as_f64().unwrap() >= 0.0 && ci["upper"].as_f64().unwrap() <= 1.0);
}

#[test]
fn word_count_profile_gives_masses_in_unit_interval() {
    let text = "the cat sat on the mat and the dog sat on the log while a bird sang in a tree by the pond \
                the fish swam near the reeds and a frog watched the fish from a lily pad";
    let mut counts = std::collections::BTreeMap::<&str, u64>::new();
    for w in text.split_whitespace() {
        *counts.entry(w).or_default() += 1;
    }
    let mut csv = String::from("j,count\n");
    for (j, c) in counts.values().enumerate() {
        csv.push_str(&format!("{},{c}\n", j + 1));
    }
    let dir = tempfile::tempdir().unwrap();
    let profile = write(dir.path(), "words.csv", &csv);
    let n = text.split_whitespace().count() as f64;
    let report = json(&urnlab(&["estimate", "--profile", &profile, "--t", &n.to_string()]));
    for g in report["report"]["good_turing"].as_array().unwrap() {
        let v = g["value"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v), "{g}");
    }
    let ci = &report["report"]["interval"];
    assert!(ci["lower"].as_f64().unwrap() >= 0.0 && ci["upper"].as_f64().unwrap() <= 1.0);
    let out = urnlab(&["estimate", "--profile", &profile, "--format", "csv"]);
    assert!(csv_rows(&stdout(&out)).iter().any(|row| row[0] == "alpha_hat" && row[1] == "3"));
}

#[test]
fn sampled_profiles_feed_estimate_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("s.json");
    let csv_path = dir.path().join("s.csv");
    let base = ["sample", "--model", "zipf:s=2", "--n", "500", "--seed", "11"];
    assert!(urnlab(&[&base[..], &["--output", json_path.to_str().unwrap()]].concat()).status.success());
    assert!(urnlab(&[&base[..], &["--format", "csv", "--output", csv_path.to_str().unwrap()]].concat()).status.success());
    let a = json(&urnlab(&["estimate", "--profile", json_path.to_str().unwrap()]));
    let b = json(&urnlab(&["estimate", "--profile", csv_path.to_str().unwrap()]));
    assert_eq!(a["report"]["good_turing"], b["report"]["good_turing"]);
    assert_eq!(a["report"]["n"], 500);
}

#[test]
fn seed_precedence_flag_env_config_default() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"model": "zipf:s=2", "n": 100, "seed": 3}"#);
    let seed_of = |out: &Output| json(out)["config"]["seed"].as_u64().unwrap();
    assert_eq!(seed_of(&urnlab(&["sample", "--model", "zipf:s=2", "--n", "100"])), 0);
    assert_eq!(seed_of(&urnlab(&["sample", "--config", &cfg])), 3);
    assert_eq!(seed_of(&urnlab_env(&["sample", "--config", &cfg], "5")), 5);
    assert_eq!(seed_of(&urnlab_env(&["sample", "--config", &cfg, "--seed", "9"], "5")), 9);
}

#[test]
fn runs_replay_from_recorded_config() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let out = urnlab(&[
        "verify", "--experiment", "tail-bounds", "--model", "zipf:s=2", "--n", "200", "--replicates", "300", "--seed", "4",
        "--output", first.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let recorded: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    assert!(recorded["config"].get("output").is_none());
    let replay = json(&urnlab(&["verify", "--config", first.to_str().unwrap()]));
    assert_eq!(replay, recorded);
}

#[test]
fn worker_count_does_not_change_results() {
    let args = ["experiment", "replicates", "--model", "geom:q=0.3", "--n", "300", "--replicates", "400", "--seed", "2"];
    let one = json(&urnlab(&[&args[..], &["--jobs", "1"]].concat()));
    let four = json(&urnlab(&[&args[..], &["--jobs", "4"]].concat()));
    assert_eq!(one, four);
}

#[test]
fn verify_exit_code_tracks_required_checks() {
    let args = ["--experiment", "lighttail", "--q", "0.5", "--n-grid", "50", "--two-point-n", "200", "--replicates", "300"];
    let verify = urnlab(&[&["verify"][..], &args].concat());
    let report: Value = serde_json::from_slice(&verify.stdout).unwrap();
    let two_point_pass = report["report"]["two_point"]["verdict"] == "PASS";
    let gap_pass = report["report"]["max_gap"].as_array().unwrap().iter().all(|r| r["verdict"] == "PASS");
    let blind = report["report"]["blind_spot"].as_array().unwrap().iter().any(|r| r["count"].as_u64().unwrap() > 0);
    assert_eq!(verify.status.success(), two_point_pass && gap_pass && blind);
    let experiment = urnlab(&["experiment", "lighttail", "--q", "0.5", "--n-grid", "50", "--two-point-n", "200", "--replicates", "300"]);
    assert!(experiment.status.success());
    assert_eq!(serde_json::from_slice::<Value>(&experiment.stdout).unwrap()["report"], report["report"]);
}

#[test]
fn verify_asymptotics_reports_ratios() {
    let report = json(&urnlab(&["verify", "--experiment", "asymptotics", "--model", "zipf:s=2", "--n-grid", "100000"]));
    let rows = report["report"]["rows"].as_array().unwrap();
    let ek = rows.iter().find(|r| r["quantity"] == "EK").unwrap();
    assert!((ek["ratio"].as_f64().unwrap() - 1.0).abs() < 0.01);
}

#[test]
fn verify_needs_a_target() {
    assert_eq!(urnlab(&["verify"]).status.code(), Some(2));
    assert_eq!(urnlab(&["verify", "--suite", "acceptance", "--experiment", "clt"]).status.code(), Some(2));
    assert_eq!(urnlab(&["verify", "--experiment", "nonsense"]).status.code(), Some(2));
}

#[test]
fn help_lists_every_experiment() {
    let help = stdout(&urnlab(&["--help"]));
    for name in ["replicates", "tail-bounds", "n0-search", "coverage", "clt", "lighttail", "asymptotics", "acceptance"] {
        let line = help.lines().find(|l| l.trim_start().starts_with(name)).unwrap_or_else(|| panic!("{name} missing"));
        assert!(line.contains("[anchor:"), "{line}");
    }
}
