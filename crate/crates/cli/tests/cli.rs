use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

const WELL: &str = r#"potential={"family":"square_well","depth":3.5531,"width":1}"#;

struct Run {
    code: i32,
    dir: PathBuf,
    stdout: String,
}

impl Run {
    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&self.read(name)).unwrap()
    }

    fn csv_column(&self, name: &str, column: &str) -> Vec<String> {
        let text = self.read(name);
        let mut lines = text.lines();
        let idx = lines.next().unwrap().split(',').position(|h| h == column).expect("column");
        lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
    }
}

fn matscat(tmp: &TempDir, out: &str, args: &[&str]) -> Run {
    let dir = tmp.path().join(out);
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_matscat"));
    cmd.args(args).arg("--out").arg(&dir).current_dir(tmp.path());
    let o = cmd.output().unwrap();
    Run { code: o.status.code().unwrap(), dir, stdout: String::from_utf8_lossy(&o.stdout).into_owned() }
}

fn write_config(tmp: &TempDir, name: &str, body: &str) -> String {
    let p: &Path = tmp.path();
    std::fs::write(p.join(name), body).unwrap();
    p.join(name).to_string_lossy().into_owned()
}

#[test]
fn free_dirichlet_smatrix_is_minus_one() {
    let tmp = TempDir::new().unwrap();
    let r = matscat(&tmp, "s", &["smatrix", "--set", r#"k_grid={"min":0.1,"max":10,"count":100}"#]);
    assert_eq!(r.code, 0);
    let re = r.csv_column("smatrix.csv", "re_S_00");
    assert_eq!(re.len(), 100);
    assert!(re.iter().all(|v| v == "-1"));
    assert!(r.csv_column("smatrix.csv", "im_S_00").iter().all(|v| v == "0"));
    assert_eq!(r.json("smatrix.json")["max_unitarity_defect"], 0.0);
    assert!(r.read("summary.txt").starts_with("smatrix"));
    assert!(r.stdout.contains("k points"));
}

#[test]
fn free_neumann_levinson_report() {
    let tmp = TempDir::new().unwrap();
    let r = matscat(&tmp, "l", &["levinson", "--quiet", "--set", "bc=neumann"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.is_empty());
    let j = r.json("levinson.json");
    assert_eq!(j["mu"], 1);
    assert_eq!(j["N"], 0);
    assert_eq!(j["xi0_plus"].as_f64(), Some(0.0));
    assert_eq!(j["defect"].as_f64(), Some(0.0));
}

#[test]
fn free_dirichlet_ssf_is_one_half() {
    let tmp = TempDir::new().unwrap();
    let r = matscat(&tmp, "x", &["ssf", "--quiet", "--set", "e_grid.count=12"]);
    assert_eq!(r.code, 0);
    let xi = r.csv_column("ssf.csv", "xi");
    assert_eq!(xi.len(), 12);
    assert!(xi.iter().all(|v| v == "0.5"));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "c.json",
        r#"{"n": 2, "bc": "kirchhoff", "potential": {"family": "coupled_well"},
            "k_grid": {"min": 0.2, "max": 6, "count": 17, "spacing": "log"}}"#,
    );
    let a = matscat(&tmp, "a", &["smatrix", "--quiet", "--config", &cfg]);
    let b = matscat(&tmp, "b", &["smatrix", "--quiet", "--config", &cfg, "--threads", "1"]);
    assert_eq!((a.code, b.code), (0, 0));
    assert_eq!(a.read("smatrix.csv"), b.read("smatrix.csv"));
    assert_eq!(a.read("smatrix.json"), b.read("smatrix.json"));
    assert_eq!(a.csv_column("smatrix.csv", "re_S_11").len(), 17);
}

#[test]
fn set_overrides_config_file_values() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "c.json", r#"{"bc": "dirichlet", "k_grid": {"min": 1, "max": 2, "count": 3}}"#);
    let r = matscat(&tmp, "o", &["smatrix", "--quiet", "--config", &cfg, "--set", "bc=neumann", "--set", "k_grid.count=4"]);
    assert_eq!(r.code, 0);
    let re = r.csv_column("smatrix.csv", "re_S_00");
    assert_eq!(re, vec!["1"; 4]);
}

#[test]
fn one_bound_state_for_the_reference_well() {
    let tmp = TempDir::new().unwrap();
    let r = matscat(&tmp, "b", &["bound-states", "--quiet", "--set", WELL]);
    assert_eq!(r.code, 0);
    let j = r.json("bound-states.json");
    assert_eq!(j["count"], 1);
    let e = j["states"][0]["energy"].as_f64().unwrap();
    assert!((e + 0.224).abs() < 1e-3, "{e}");
}

#[test]
fn normal_form_of_kirchhoff_pair() {
    let tmp = TempDir::new().unwrap();
    let r = matscat(&tmp, "n", &["normal-form", "--quiet", "--set", "n=3", "--set", "bc=kirchhoff"]);
    assert_eq!(r.code, 0);
    let kinds = r.csv_column("normal-form.csv", "kind");
    assert_eq!(kinds.iter().filter(|k| *k == "dirichlet").count(), 2);
    assert_eq!(kinds.iter().filter(|k| *k == "neumann").count(), 1);
    assert_eq!(r.json("normal-form.json")["s_inf"].as_array().unwrap().len(), 3);
}

#[test]
fn asymptotic_slope_is_minus_two() {
    let tmp = TempDir::new().unwrap();
    let r = matscat(&tmp, "a", &["asymptotics", "--quiet", "--set", WELL]);
    assert_eq!(r.code, 0);
    let slope = r.json("asymptotics.json")["slope"].as_f64().unwrap();
    assert!((slope + 2.0).abs() < 0.3, "{slope}");
    // nothing to fit without a potential
    let r = matscat(&tmp, "z", &["asymptotics", "--quiet"]);
    assert_eq!(r.code, 0);
    assert!(r.json("asymptotics.json")["slope"].is_null());
}

#[test]
fn resolvent_kernel_dump_and_near_pole_failure() {
    let tmp = TempDir::new().unwrap();
    let r = matscat(&tmp, "r", &["resolvent", "--quiet", "--set", "bc=neumann", "--set", "x_grid.count=3"]);
    assert_eq!(r.code, 0);
    let csv = r.read("resolvent.csv");
    assert_eq!(csv.lines().next(), Some("x,y,re_K_00,im_K_00"));
    assert_eq!(csv.lines().count(), 10);

    let r = matscat(&tmp, "p", &["resolvent", "--quiet", "--set", WELL, "--set", r#"z={"off":{"re":-0.2237,"im":0}}"#]);
    assert_eq!(r.code, 3);
    let e = r.json("error.json");
    assert_eq!(e["error"], "NearSingularQ");
    assert_eq!(e["module"], "transforms");
    assert_eq!(e["kind"], "numerical");
}

#[test]
fn trace_and_transform_checks_run_on_small_grids() {
    let tmp = TempDir::new().unwrap();
    let r = matscat(
        &tmp,
        "t",
        &["trace-check", "--quiet", "--set", WELL, "--set", "tolerances.trace.h=4e-3", "--set", "tolerances.trace.x_max=100"],
    );
    assert_eq!(r.code, 0);
    assert!(r.json("trace-check.json")["report"]["defect"].as_f64().unwrap() < 0.05);

    let r = matscat(
        &tmp,
        "f",
        &[
            "transforms-check",
            "--quiet",
            "--set",
            "bc=neumann",
            "--set",
            r#"transforms={"x_max":12,"x_step":4e-3,"k_max":20,"k_panels":20}"#,
        ],
    );
    assert_eq!(r.code, 0, "{}", r.read("error.json"));
    let j = r.json("transforms-check.json");
    assert!(j["parseval_plus"]["defect"].as_f64().unwrap() < 1e-3);
    assert_eq!(r.csv_column("transforms-check.csv", "re_Fplus_0").len(), 160);
}

#[test]
fn invalid_boundary_pair_exits_with_validation_code() {
    let tmp = TempDir::new().unwrap();
    let bad = r#"bc={"kind":"matrices","a":[[1,0],[0,0]],"b":[[0,0],[0,0]]}"#;
    let r = matscat(&tmp, "v", &["validate-bc", "--quiet", "--set", bad]);
    assert_eq!(r.code, 2);
    assert_eq!(r.json("validate-bc.json")["report"]["ok"], false);
    let e = r.json("error.json");
    assert_eq!((e["module"].as_str(), e["error"].as_str()), (Some("bc"), Some("InvalidBC")));

    let r = matscat(&tmp, "s", &["smatrix", "--quiet", "--set", bad]);
    assert_eq!(r.code, 2);

    let r = matscat(&tmp, "ok", &["validate-bc", "--quiet", "--set", r#"bc={"kind":"diagonal","thetas":[0.3,2]}"#]);
    assert_eq!(r.code, 0);
}

#[test]
fn config_errors_carry_field_and_line() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "bad.json", "{\n  \"k_grid\": {\"min\": 1, \"max\": 2, \"count\": \"x\"}\n}");
    let r = matscat(&tmp, "e1", &["smatrix", "--quiet", "--config", &cfg]);
    assert_eq!(r.code, 2);
    let e = r.json("error.json");
    assert_eq!(e["error"], "ConfigError");
    assert_eq!(e["field"], "k_grid.count");
    assert_eq!(e["line"], 2);

    let cfg = write_config(&tmp, "syntax.json", "{\"bc\": \"dirichlet\",\n");
    let r = matscat(&tmp, "e2", &["smatrix", "--quiet", "--config", &cfg]);
    assert_eq!(r.code, 2);
    assert_eq!(r.json("error.json")["line"], 2);

    let r = matscat(&tmp, "e3", &["smatrix", "--quiet", "--set", "colour=blue"]);
    assert_eq!(r.code, 2);
    let r = matscat(&tmp, "e4", &["smatrix", "--quiet", "--set", "k_grid.min=30"]);
    assert_eq!(r.code, 2);
    assert_eq!(r.json("error.json")["field"], "k_grid");
    let r = matscat(&tmp, "e5", &["ssf", "--quiet", "--set", r#"e_grid={"min":-1,"max":1,"count":3,"spacing":"linear"}"#]);
    assert_eq!(r.code, 2, "E = 0 is not a valid sample");
    assert_eq!(r.json("error.json")["error"], "InvalidArgument");
}

#[test]
fn json_only_output_skips_csv() {
    let tmp = TempDir::new().unwrap();
    let r = matscat(&tmp, "j", &["smatrix", "--quiet", "--set", r#"output.formats=["json"]"#, "--set", "k_grid.count=3"]);
    assert_eq!(r.code, 0);
    assert!(r.dir.join("smatrix.json").exists());
    assert!(!r.dir.join("smatrix.csv").exists());
    assert!(r.dir.join("summary.txt").exists());
}
