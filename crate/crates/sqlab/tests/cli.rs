use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sqlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqlab")).args(args).output().expect("run sqlab")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn verify_is_green() {
    let o = sqlab(&["verify"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(tmp.path());
    assert_eq!(code(&sqlab(&["predict", "--x", "1e5", "--eta", "0.7", "--out", &out])), 2);
    assert_eq!(code(&sqlab(&["threshold", "--trials", "0", "--out", &out])), 2);
    assert_eq!(code(&sqlab(&["predict", "--x", "ten", "--out", &out])), 2);
    assert_eq!(code(&sqlab(&["avalanche", "--out", &out])), 2);
    assert_eq!(code(&sqlab(&["avalanche", "--m", "100", "--s", "2:55", "--out", &out])), 2);
    assert_eq!(code(&sqlab(&["predict", "--no-such-flag"])), 2);
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(code(&sqlab(&["predict", "--config", cfg.to_str().unwrap(), "--out", &out])), 2);
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "x = 1e5\neta = 0.3\ntrials = 3\nformat = json\n").unwrap();
    let out = tmp.path().join("out");
    let o = sqlab(&["predict", "--config", cfg.to_str().unwrap(), "--eta", "0.2", "--out", &out_arg(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["x"], 100_000);
    assert_eq!(manifest["config"]["eta"], 0.2);
    assert_eq!(manifest["derived"]["z0"], 24);
    let table: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("predict.json")).unwrap()).unwrap();
    assert!(table.as_array().unwrap().len() > 10);
}

#[test]
fn predict_columns_and_lambda_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sqlab(&["predict", "--x", "1e6", "--out", &out_arg(tmp.path())]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(tmp.path().join("predict.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "z,Lambda,alpha_center,m_lo,m_hi,ts_2,ts_3,ts_4,ts_5,ts_6,ts_7,ts_8");
    assert!(csv.lines().any(|l| l.starts_with("40,1,")));
}

#[test]
fn threshold_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = sqlab(&["threshold", "--x", "1e5", "--trials", "1", "--seed", "42", "--out", &out_arg(dir)]);
        assert_eq!(code(&o), 0);
    }
    let ta = fs::read(a.join("threshold.csv")).unwrap();
    assert_eq!(ta, fs::read(b.join("threshold.csv")).unwrap());
    let header = String::from_utf8(ta).unwrap();
    assert!(header.starts_with("trial,x,eta_max,T,J,ratio_T_over_J,certificate_size\n"));
}

#[test]
fn manifest_rerun_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let o = sqlab(&["trajectory", "--x", "1e5", "--trials", "4", "--seed", "3", "--workers", "1", "--out", &out_arg(&a)]);
    assert_eq!(code(&o), 0);
    let b = tmp.path().join("b");
    let manifest = a.join("manifest.json");
    let o = sqlab(&["trajectory", "--manifest", manifest.to_str().unwrap(), "--workers", "8", "--out", &out_arg(&b)]);
    assert_eq!(code(&o), 0);
    for f in ["m_traj.csv", "sk_traj.csv", "trajectory_summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let o = sqlab(&["threshold", "--manifest", manifest.to_str().unwrap(), "--out", &out_arg(&b)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn avalanche_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sqlab(&["avalanche", "--m", "1000", "--s", "2:150", "--trials", "500", "--out", &out_arg(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("avalanche.csv")).unwrap();
    assert!(csv.starts_with("trial,D,R1,delta2,delta3,delta_prime\n"));
    assert_eq!(csv.lines().count(), 501);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("avalanche_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["report"]["trials"], 500);
}
