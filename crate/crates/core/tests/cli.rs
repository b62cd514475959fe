use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_wmlmc");

const CONFIG: &str = r#"{
  "model": {"family": "gbm", "params": {"mu": 0.05, "sigma": 0.2}, "s0": 100, "horizon": 1, "rate": 0.05},
  "scheme": {"kind": "euler", "M": 2, "J0": 1, "antithetic": true},
  "payoff": {"kind": "call", "strike": 100},
  "run": {"target_mse": 0.001, "pilot_n": 20, "seed": 3, "method": "wmlmc", "max_level": 8},
  "output": {"format": "both"}
}"#;

fn wmlmc(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN).args(args).current_dir(dir).env_remove("WMLMC_OUT_DIR").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn estimate_writes_json_and_csv() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", CONFIG);
    let out = wmlmc(&["estimate", "--config", &cfg, "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&read(&tmp.path().join("res"), "estimate.json")).unwrap();
    assert!(json["result"]["converged"].as_bool().unwrap());
    let value = json["result"]["value"].as_f64().unwrap();
    assert!((value - 10.4506).abs() < 0.5, "{value}");
    let csv = read(&tmp.path().join("res"), "levels.csv");
    assert!(csv.starts_with("level,n_samples,theta,big_theta,delta,eta,cost\n"));
    assert!(!csv.contains('\r'));
}

#[test]
fn output_directory_falls_back_to_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", CONFIG);
    let out = Command::new(BIN)
        .args(["estimate", "--config", &cfg])
        .current_dir(tmp.path())
        .env("WMLMC_OUT_DIR", tmp.path().join("env"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("env/levels.csv").exists());
}

#[test]
fn schema_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let missing = write(tmp.path(), "m.json", &CONFIG.replace(", \"strike\": 100", ""));
    let out = wmlmc(&["estimate", "--config", &missing], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strike"));
    let unknown = write(tmp.path(), "u.json", &CONFIG.replace("\"J0\": 1", "\"J0\": 1, \"J9\": 1"));
    let out = wmlmc(&["estimate", "--config", &unknown], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    assert_eq!(wmlmc(&["estimate"], tmp.path()).status.code(), Some(2));
    assert_eq!(wmlmc(&["bogus"], tmp.path()).status.code(), Some(2));
}

#[test]
fn bias_target_out_of_reach_exits_with_three() {
    let tmp = TempDir::new().unwrap();
    let text = CONFIG.replace("\"max_level\": 8", "\"max_level\": 1").replace("0.001", "0.0001");
    let cfg = write(tmp.path(), "c.json", &text);
    let out = wmlmc(&["estimate", "--config", &cfg, "--out", "."], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("estimate.json").exists());
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", CONFIG);
    for d in ["a", "b"] {
        assert_eq!(wmlmc(&["estimate", "--config", &cfg, "--seed", "11", "--out", d], tmp.path()).status.code(), Some(0));
    }
    assert_eq!(read(&tmp.path().join("a"), "levels.csv"), read(&tmp.path().join("b"), "levels.csv"));
    assert_eq!(read(&tmp.path().join("a"), "estimate.json"), read(&tmp.path().join("b"), "estimate.json"));
    assert_eq!(wmlmc(&["estimate", "--config", &cfg, "--seed", "12", "--out", "c"], tmp.path()).status.code(), Some(0));
    assert_ne!(read(&tmp.path().join("a"), "levels.csv"), read(&tmp.path().join("c"), "levels.csv"));
}

#[test]
fn plan_reports_the_two_level_ratio() {
    let tmp = TempDir::new().unwrap();
    let rho = std::f64::consts::FRAC_1_SQRT_2 + 0.25;
    let table = format!(
        r#"[{{"sigma_fine": 1, "eta": 1}}, {{"sigma_fine": 1, "sigma_coarse": 1, "rho": {rho}, "eta": {}}}]"#,
        2f64.sqrt()
    );
    let m = write(tmp.path(), "m.json", &table);
    let out = wmlmc(&["plan", "--moments", &m, "--v", "0.01", "--out", "p"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s: serde_json::Value = serde_json::from_str(&read(&tmp.path().join("p"), "plan_summary.json")).unwrap();
    assert!((s["ratio"].as_f64().unwrap() - 1.2865).abs() < 1e-3);
    assert!(read(&tmp.path().join("p"), "plan_wmlmc.csv").starts_with("level,theta,"));
}

#[test]
fn malformed_moment_table_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let m = write(tmp.path(), "m.json", r#"[{"sigma_fine": 1, "eta": 1}, {"sigma_fine": 1, "rho": 2, "sigma_coarse": 1, "eta": 2}]"#);
    assert_eq!(wmlmc(&["plan", "--moments", &m, "--v", "0.1"], tmp.path()).status.code(), Some(2));
    let m = write(tmp.path(), "n.json", "[{\"sigma_fine\": 1}]");
    assert_eq!(wmlmc(&["plan", "--moments", &m, "--v", "0.1"], tmp.path()).status.code(), Some(2));
    assert_eq!(wmlmc(&["plan", "--moments", &m], tmp.path()).status.code(), Some(2));
}

#[test]
fn mimc_plan_on_builtin_model() {
    let tmp = TempDir::new().unwrap();
    let out = wmlmc(&["mimc-plan", "--top", "2,2", "--v", "0.01", "--out", "m"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&tmp.path().join("m"), "mimc_nodes.csv");
    assert_eq!(csv.lines().count(), 10);
    assert!(csv.lines().nth(1).unwrap().starts_with("0:0,0,"));
    let out = wmlmc(&["mimc-plan", "--top", "2,x", "--v", "0.01"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analytic_figures_are_written() {
    let tmp = TempDir::new().unwrap();
    let out = wmlmc(&["figures", "--which", "fig1", "--which", "fig2", "--out", "f"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let fig1 = read(&tmp.path().join("f"), "fig1.csv");
    assert!(fig1.starts_with("rho,delta2_mlmc,delta2_wmlmc,ratio\n"));
    assert_eq!(fig1.lines().count(), 403);
}
