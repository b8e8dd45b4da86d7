use std::path::PathBuf;
use std::process::{Command, Output};

fn out_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cfs-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn cfs_lab(args: &[&str], out: &PathBuf) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfs-lab")).args(args).arg("--out").arg(out).output().unwrap()
}

fn report(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn dirac_demo_exits_zero() {
    let out = out_dir("dirac");
    let o = cfs_lab(&["dirac-demo", "--k", "0", "--m", "1"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(out.join("dirac-demo.json"));
    assert_eq!(r["passed"], true);
    assert_eq!(r["data"]["config"]["momenta"], serde_json::json!([0.0]));
    assert!(out.join("dirac-modes.csv").exists());
    assert!(out.join("plane-wave-re.dat").exists());
}

#[test]
fn classify_reports_per_pair_classes_of_the_demo() {
    let out = out_dir("classify");
    let o = cfs_lab(&["classify", "--format", "json"], &out);
    assert_eq!(o.status.code(), Some(0));
    let r = report(out.join("classify.json"));
    let classes: Vec<&str> = r["data"]["pairs"].as_array().unwrap().iter().map(|p| p["class"].as_str().unwrap()).collect();
    assert_eq!(classes, ["timelike", "spacelike", "timelike"]);
    assert!(!out.join("classes.csv").exists());
}

#[test]
fn verify_all_example_passes() {
    let out = out_dir("verify");
    let o = cfs_lab(&["verify-all", "--seed", "7", "--n", "1", "--f", "4", "--points", "6"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(out.join("verify-all.json"));
    assert_eq!(r["seed"], 7);
    assert!(out.join("minimize").join("minimized-system.json").exists());
    assert!(out.join("kernel-asymptotics").join("t-abs.dat").exists());
}

#[test]
fn output_is_byte_identical_across_runs() {
    let (a, b) = (out_dir("det-a"), out_dir("det-b"));
    for dir in [&a, &b] {
        let o = cfs_lab(&["second-variation", "--points", "5", "--f", "3", "--seed", "3"], dir);
        assert_eq!(o.status.code(), Some(0));
    }
    for name in ["second-variation.json", "pairs.csv", "relative-error.dat"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn thread_cap_does_not_change_results() {
    let (a, b) = (out_dir("thr-a"), out_dir("thr-b"));
    let run = |dir: &PathBuf, threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_cfs-lab"))
            .args(["appendix-a", "--points", "6", "--f", "3", "--out"])
            .arg(dir)
            .env("CFS_LAB_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(run(&a, "1").status.code(), Some(0));
    assert_eq!(run(&b, "4").status.code(), Some(0));
    assert_eq!(std::fs::read(a.join("appendix-a.json")).unwrap(), std::fs::read(b.join("appendix-a.json")).unwrap());
}

#[test]
fn invalid_config_exits_two_with_json_diagnostic() {
    let out = out_dir("bad");
    let cfg = out_dir("bad-config").with_extension("json");
    std::fs::write(&cfg, r#"{"seed": 1, "bogus": true}"#).unwrap();
    let o = cfs_lab(&["action", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    let diag: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(diag["status"], "invalid-config");
    assert!(diag["error"].as_str().unwrap().contains("bogus"));

    let o = cfs_lab(&["action", "--tol", "nonsense=1"], &out);
    assert_eq!(o.status.code(), Some(2));
    let o = cfs_lab(&["action", "--system", "/nonexistent.json"], &out);
    assert_eq!(o.status.code(), Some(2));
    std::fs::remove_file(cfg).unwrap();
}

#[test]
fn failing_check_exits_one_and_names_it() {
    let out = out_dir("fail");
    let o = cfs_lab(&["second-variation", "--points", "4", "--f", "3", "--tol", "fd2_tol=0"], &out);
    assert_eq!(o.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("FAILED direction 0: decomposition vs oracle"), "{stderr}");
    assert_eq!(report(out.join("second-variation.json"))["passed"], false);
}

#[test]
fn config_file_and_flags_combine() {
    let out = out_dir("combo");
    let cfg = out_dir("combo-config").with_extension("json");
    std::fs::write(&cfg, r#"{"seed": 5, "generator": {"points": 3, "f": 3, "n": 1, "kappa": 0.3}}"#).unwrap();
    let o = cfs_lab(&["action", "--config", cfg.to_str().unwrap(), "--seed", "6", "--format", "json"], &out);
    assert_eq!(o.status.code(), Some(0));
    let r = report(out.join("action.json"));
    assert_eq!(r["seed"], 6);
    assert_eq!(r["data"]["points"], 3);
    std::fs::remove_file(cfg).unwrap();
}
