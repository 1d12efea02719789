//! End-to-end tests of the `famsim` binary: output shape, determinism,
//! config-file merging and exit codes.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

fn famsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_famsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

#[test]
fn analyze_emits_manifest_and_theta() {
    let out = famsim(&["analyze", "--rho", "2"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("valid json");
    assert_eq!(json["manifest"]["rho"], 2.0);
    assert_eq!(json["manifest"]["mode"], "reduced");
    assert_eq!(json["dof_count"], 1);
    assert_eq!(json["classification"][0], "second");
    // theta = hbar / (alpha rho B) = 1/2 for rho = 2.
    let theta = json["theta"].as_f64().expect("theta present");
    assert!((theta - 0.5).abs() < 1e-12);
}

#[test]
fn analyze_rejects_full_mode() {
    let out = famsim(&["analyze", "--mode", "full"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spectrum_rows_match_closed_form() {
    let out = famsim(&["spectrum", "--n", "32"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut rows = 0;
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with('n') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 4);
        let err: f64 = fields[3].parse().expect("numeric absError");
        assert!(err < 1e-6, "row {line} deviates");
        rows += 1;
    }
    // trusted_fraction defaults to 0.5, so half the levels are reported.
    assert_eq!(rows, 16);
}

#[test]
fn spectrum_is_deterministic() {
    let a = famsim(&["spectrum", "--n", "24", "--seed", "7"]);
    let b = famsim(&["spectrum", "--n", "24", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn full_mode_spectrum_is_integer() {
    let out = famsim(&["spectrum", "--mode", "full", "--n", "16", "--hbar", "2"]);
    assert!(out.status.success());
    for line in stdout(&out).lines().filter(|l| !l.starts_with(['#', 'n'])) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        // hbar = 2: every level is an even integer.
        assert!((v / 2.0 - (v / 2.0).round()).abs() < 1e-8, "level {v}");
    }
}

#[test]
fn evolve_conserves_invariants() {
    let out = famsim(&["evolve", "--steps", "200"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let drift_line = text
        .lines()
        .find(|l| l.contains("max_rel_drift_J"))
        .expect("drift summary");
    for part in drift_line.trim_start_matches("# ").split_whitespace() {
        let value: f64 = part.split('=').nth(1).unwrap().parse().unwrap();
        assert!(value < 1e-8, "drift too large: {part}");
    }
    // header + 201 samples + drift summary
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 202);
}

#[test]
fn evolve_mass_sweep_reports_monotone_probe() {
    let out = famsim(&["evolve", "--steps", "200", "--m-sweep", "1,10,100"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("valid json");
    assert_eq!(json["entries"].as_array().unwrap().len(), 3);
    assert_eq!(json["monotone"], true);
}

#[test]
fn config_file_loads_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    write_file(&path, "rho = 2.0\nk = 0.25\nselection = \"e2\"\n");
    let out = famsim(&["analyze", "--config", path.to_str().unwrap(), "--rho", "4"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["manifest"]["rho"], 4.0); // flag wins
    assert_eq!(json["manifest"]["k"], 0.25); // file value kept
    assert_eq!(json["manifest"]["selection"], "e2");
}

#[test]
fn json_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    write_file(&path, r#"{"B": 3.0, "mode": "reduced"}"#);
    let out = famsim(&["analyze", "--config", path.to_str().unwrap()]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["manifest"]["B"], 3.0);
}

#[test]
fn out_flag_writes_file_instead_of_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.csv");
    let out = famsim(&["spectrum", "--n", "16", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("n,eigenvalue,formulaValue,absError"));
}

#[test]
fn bad_flag_values_exit_2() {
    assert_eq!(famsim(&["spectrum", "--selection", "bogus"]).status.code(), Some(2));
    assert_eq!(famsim(&["spectrum", "--mode", "sideways"]).status.code(), Some(2));
    assert_eq!(
        famsim(&["analyze", "--config", "/no/such/file.toml"]).status.code(),
        Some(2)
    );
    assert_eq!(famsim(&["evolve", "--m-sweep", "1,x"]).status.code(), Some(2));
}

#[test]
fn verify_passes_and_fails_on_perturbed_theta() {
    let ok = famsim(&["verify"]);
    assert!(ok.status.success());
    let text = stdout(&ok);
    assert_eq!(text.matches("PASS").count(), 8);
    assert!(text.contains("RESULT: all criteria passed"));

    let bad = famsim(&["verify", "--perturb-theta", "0.05"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("FAIL"));
}

fn write_file(path: &Path, content: &str) {
    let mut f = std::fs::File::create(path).unwrap();
    f.write_all(content.as_bytes()).unwrap();
}
