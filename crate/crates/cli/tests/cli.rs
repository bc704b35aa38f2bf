use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rocktype(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rocktype"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["a", "b"] {
        let o = rocktype(&["simulate", "--wells", "3", "--seed", "7", "--out", dir], tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout(&o).lines().count(), 1);
    }
    let (a, b) = (read_tree(&tmp.path().join("a")), read_tree(&tmp.path().join("b")));
    assert!(a.len() > 3);
    assert_eq!(a, b);
}

#[test]
fn default_simulation_share_is_calibrated() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rocktype(&["simulate", "--out", "data"], tmp.path());
    assert!(o.status.success());
    let line = stdout(&o);
    let share: f64 = line.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!((0.10..=0.17).contains(&share), "{line}");
}

#[test]
fn single_well_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rocktype(&["simulate", "--wells", "1", "--out", "data"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).is_empty());
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn bad_flags_and_missing_data_use_documented_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(rocktype(&["evaluate", "--families", "Q"], tmp.path()).status.code(), Some(2));
    assert_eq!(rocktype(&["evaluate", "--model", "forest"], tmp.path()).status.code(), Some(2));
    assert_eq!(rocktype(&["frobnicate"], tmp.path()).status.code(), Some(2));
    let o = rocktype(&["evaluate", "--data", "absent", "--out", "out"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bounds"));
}

#[test]
fn evaluate_report_and_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    assert!(rocktype(&["simulate", "--wells", "3", "--data", "data"], p).status.success());

    let o = rocktype(&["evaluate", "--data", "data", "--families", "-", "--model", "prior", "--out", "prior"], p);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(p.join("prior/report.json")).unwrap()).unwrap();
    assert_eq!(report["evaluation"]["fold_mean"]["roc_auc"], 0.5);

    let mut texts = Vec::new();
    for _ in 0..2 {
        let out = "r1";
        let o = rocktype(&["evaluate", "--data", "data", "--model", "logistic", "--out", out], p);
        assert!(o.status.success());
        for f in ["report.json", "roc.csv", "pr.csv", "wells.csv", "config.resolved.json"] {
            assert!(p.join(out).join(f).exists(), "{out}/{f}");
        }
        let mut v: serde_json::Value = serde_json::from_slice(&fs::read(p.join(out).join("report.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timestamp");
        texts.push(v.to_string());
    }
    assert_eq!(texts[0], texts[1]);

    let o = rocktype(&["report", "--out", "r1"], p);
    assert!(o.status.success());
    let table = stdout(&o);
    assert!(table.contains("ROC AUC") && table.contains("W03"));
}

#[test]
fn featurize_and_train_write_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    assert!(rocktype(&["simulate", "--wells", "2", "--data", "data"], p).status.success());
    let o = rocktype(&["featurize", "--data", "data", "--families", "B+F", "--out", "feat"], p);
    assert!(o.status.success());
    let header = fs::read_to_string(p.join("feat/features.csv")).unwrap();
    assert!(header.lines().next().unwrap().contains("F:"));
    let o = rocktype(&["train", "--data", "data", "--out", "model"], p);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(p.join("model/model.json").exists() && p.join("model/model.bin").exists());
}
