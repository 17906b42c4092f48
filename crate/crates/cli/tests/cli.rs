use std::path::Path;
use std::process::{Command, Output};

fn rrmimo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrmimo")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn dimension_sweep_reruns_byte_identically_from_its_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let o = rrmimo(&["sweep", "--axis", "dimension", "--out", path(&a), "--threads", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(a.join("sweep_dimension.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "axis_name,axis_value,estimator,beam,d_total,mse_analytic,mse_analytic_db,mse_mc,mc_std,mi_nats,nmse_trace"
    );
    // 17 dimensions, two reduced-rank estimators on two beams plus the
    // interference-free benchmark.
    assert_eq!(lines.count(), 17 * 5);
    assert!(csv.contains("dimension,7,rrmmse_joint,geb,7,"));
    assert!(csv.contains("dimension,4,full_wiener_clean,identity,100,"));

    let b = dir.path().join("b");
    let snapshot = a.join("config.json");
    let o = rrmimo(&["--config", path(&snapshot), "--out", path(&b), "--threads", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(a.join("sweep_dimension.csv")).unwrap(), std::fs::read(b.join("sweep_dimension.csv")).unwrap());
}

#[test]
fn design_exports_the_beam_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let o = rrmimo(&["design", "--beam", "geb", "--dim", "6", "--export-pattern", "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("pattern_geb_d6.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "theta_deg,col_0,col_1,col_2,col_3,col_4,col_5,aggregate");
    assert_eq!(rows.len(), 1 + 1801);
    assert!(rows[1].starts_with("-90,"));
    assert!(rows[901].starts_with("0,"));
    assert!(rows[1801].starts_with("90,"));
    let design = std::fs::read_to_string(dir.path().join("design.csv")).unwrap();
    assert!(design.lines().nth(1).unwrap().starts_with("geb,noise_orthonormal,6,"));
    assert!(dir.path().join("pilots.csv").exists());
    assert!(dir.path().join("config.json").exists());
}

#[test]
fn identities_all_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = rrmimo(&["identities", "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("identities.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(rows.len() >= 10);
    assert!(rows.iter().all(|r| r.ends_with(",true")), "{text}");
    assert!(rows.iter().any(|r| r.contains(",error_volume,")));
}

#[test]
fn estimate_writes_one_realization() {
    let dir = tempfile::tempdir().unwrap();
    let o = rrmimo(&["estimate", "--estimator", "corr_general", "--dim", "7", "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = std::fs::read_to_string(dir.path().join("estimate_summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("corr_general,geb,7,effective,"));
    // Two users, three paths, seven beam columns.
    let rows = std::fs::read_to_string(dir.path().join("estimate.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 2 * 3 * 7);
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = rrmimo(&["sweep", "--axis", "diagonal", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("axis") && stderr(&o).contains("diagonal"));

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"command": "sweep", "sed": 3}"#).unwrap();
    let o = rrmimo(&["--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sed"), "{}", stderr(&o));

    let o = rrmimo(&["sweep", "--grid", "0:3", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn scenario_files_are_resolved_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = serde_json::json!({
        "array": {"num_elements": 8, "spacing": 0.5},
        "groups": [
            {"id": 0, "num_users": 2, "mpcs": [
                {"delay": 0, "power": 0.5, "sector": [-10.0, -8.0]},
                {"delay": 1, "power": 0.5, "sector": [20.0, 22.0]}
            ]},
            {"id": 1, "num_users": 2, "mpcs": [{"delay": 0, "power": 1.0, "sector": [40.0, 50.0]}]}
        ],
        "intended": 0,
        "training_length": 4,
        "pilots": {"kind": "kasami", "degree": 4},
        "snr_db": 10.0,
        "gamma": 0.5
    });
    std::fs::write(dir.path().join("scenario.json"), scenario.to_string()).unwrap();
    let cfg = serde_json::json!({
        "command": "sweep",
        "scenario_path": "scenario.json",
        "sweep": {"axis": "snr_db", "grid": [0, 10, 20], "estimators": ["rrmmse_joint", "full_wiener"],
                  "beams": ["geb", "dft"], "dim": 3, "target": "full", "mc_trials": 200}
    });
    let cfg_path = dir.path().join("run.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out = dir.path().join("out");
    let o = rrmimo(&["--config", path(&cfg_path), "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("sweep_snr_db.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 3);
    // Monte Carlo columns are filled.
    assert!(csv.lines().skip(1).all(|l| !l.contains(",,")));
    let snap: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert!(snap.get("scenario").is_some() && snap.get("scenario_path").is_none());
}

#[test]
fn unwritable_output_exits_with_code_four() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let o = rrmimo(&["identities", "--out", path(&file)]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("occupied"));
}
