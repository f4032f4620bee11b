use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bdcert(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bdcert"));
    cmd.args(args).env_remove("BDCERT_OUT");
    if let Some(dir) = out {
        cmd.arg("--out").arg(dir);
    }
    cmd.output().expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&o.stdout))
    })
}

#[test]
fn truncate_example4_reaches_target() {
    let o = bdcert(&["truncate", "--preset", "example4", "--target", "1e-5"], None);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!(v["level"].as_u64().unwrap() <= 220);
    assert!(v["met"].as_bool().unwrap());
    assert!(v["tv_bound"].as_f64().unwrap() <= 1e-5);
    assert!(v["min_window_start"].as_f64().unwrap() <= v["window"][0].as_f64().unwrap());
}

#[test]
fn published_constants_at_published_level() {
    let o = bdcert(&["truncate", "--preset", "example1", "--paper-constants"], None);
    let v = json(&o);
    assert_eq!(v["level"], 30);
    assert!(v["tv_bound"].as_f64().unwrap() <= 1e-7);
    assert!(v["mean_bound"].as_f64().unwrap() <= 3e-6);
}

#[test]
fn unmet_target_exits_one() {
    let o = bdcert(&["truncate", "--preset", "example1", "--paper-constants", "--target", "1e-12"], None);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)["met"], false);
}

#[test]
fn bad_input_prints_error_object() {
    let o = bdcert(&["bounds", "--preset", "example9"], None);
    assert_eq!(o.status.code(), Some(2));
    let v = json(&o);
    assert_eq!(v["error"], "invalid_argument");
    assert!(v["message"].is_string());

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.json");
    std::fs::write(&cfg, r#"{"model": {"period": -1.0}}"#).unwrap();
    let o = bdcert(&["bounds", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(json(&o)["error"].is_string());
}

#[test]
fn unit_weights_give_identical_rate_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = bdcert(&["bounds", "--preset", "example1", "--weights", "unit"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    let a = std::fs::read_to_string(dir.path().join("beta_star.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("beta_double_star.csv")).unwrap();
    let values = |s: &str| s.lines().skip(1).map(str::to_owned).collect::<Vec<_>>();
    assert_eq!(values(&a), values(&b));
}

#[test]
fn config_round_trip_reproduces_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = bdcert(&["config", "--preset", "example2"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    let cfg = dir.path().join("example2.json");
    assert!(cfg.exists());
    let from_preset = json(&bdcert(&["truncate", "--preset", "example2"], None));
    let from_config = json(&bdcert(&["truncate", "--config", cfg.to_str().unwrap()], None));
    assert_eq!(from_preset, from_config);
    let a = json(&bdcert(&["bounds", "--preset", "example2"], None));
    let b = json(&bdcert(&["bounds", "--config", cfg.to_str().unwrap()], None));
    assert_eq!(a, b);
}

#[test]
fn regime_writes_csv_and_meets_target() {
    let dir = tempfile::tempdir().unwrap();
    let o = bdcert(&["regime", "--preset", "example1", "--S", "3"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["window"], serde_json::json!([10.0, 11.0]));
    assert!(v["periodicity_ok"].as_bool().unwrap());
    let csv = std::fs::read_to_string(dir.path().join("regime.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,p0,p_le_s,mean,tv_bound,mean_bound");
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((10.0..=11.0 + 1e-9).contains(&f[0]));
        assert!((0.0..=1.0).contains(&f[1]) && f[1] <= f[2] + 1e-12);
        assert!(f[4] <= 5e-6 && f[5] <= 5e-6);
    }
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_bdcert"))
        .args(["simulate", "--preset", "example1", "--paths", "200", "--times", "0.5,1"])
        .env("BDCERT_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("simulation.csv")).unwrap();
    assert!(csv.starts_with("t,p0,p0_se,p_le_s,p_le_s_se,mean,mean_se"));
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("simulation.json").exists());
}

#[test]
fn solve_reports_mass_and_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bdcert(&["solve", "--preset", "example2", "--level", "40", "--until", "2"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!(v["error_estimate"].as_f64().unwrap() < 1e-8);
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let mass: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((mass - 1.0).abs() < 1e-10);
    }
}

#[test]
fn report_table_flags_example1() {
    let o = bdcert(&["report", "--preset", "example1"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("! beta** differs"));
}
