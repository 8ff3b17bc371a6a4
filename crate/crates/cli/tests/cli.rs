use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn actinf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_actinf"))
        .args(args)
        .env_remove("ACTINF_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tmaze() -> String {
    root().join("models/tmaze.json").to_string_lossy().into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn validate_bundled_model() {
    let out = actinf(&["validate", &tmaze()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("ok: 8 states"));
}

#[test]
fn validate_reports_the_bad_column() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    std::fs::write(
        &file,
        r#"{"n_states": 2, "n_obs": 2, "n_actions": 1, "horizon": 1,
            "likelihood": [[0.5, 1.0], [0.4, 0.0]],
            "transitions": [[[1, 0], [0, 1]]],
            "initial_belief": [0.5, 0.5],
            "obs_log_pref": [0, 0]}"#,
    )
    .unwrap();
    let out = actinf(&["validate", path(&file)]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("likelihood"), "{err}");
    assert!(err.contains("[0]"), "{err}");
    assert!(err.contains("0.9"), "{err}");
}

#[test]
fn validate_malformed_document() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("broken.json");
    std::fs::write(&file, "{\"n_states\": 2,").unwrap();
    assert_eq!(actinf(&["validate", path(&file)]).status.code(), Some(2));
    assert_eq!(actinf(&["validate", "/nonexistent/model.json"]).status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(actinf(&["explode"]).status.code(), Some(2));
}

fn plan_rows(args: &[&str]) -> Vec<Vec<String>> {
    let out = actinf(args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    stdout(&out)
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

#[test]
fn plan_prints_sixteen_sorted_rows() {
    let rows = plan_rows(&["plan", &tmaze()]);
    assert_eq!(rows.len(), 16);
    let totals: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(totals.windows(2).all(|w| w[0] <= w[1]));
    for r in &rows {
        let v: Vec<f64> = r[1..].iter().map(|x| x.parse().unwrap()).collect();
        assert!((v[0] - (v[1] + v[2])).abs() < 1e-10);
    }
}

#[test]
fn plan_with_zero_precision_is_uniform() {
    let rows = plan_rows(&["plan", &tmaze(), "--gamma", "0"]);
    for r in &rows {
        assert_eq!(r[7], "0.0625");
    }
}

#[test]
fn plan_after_the_cue_ranks_the_rewarded_arm_first() {
    let rows = plan_rows(&["plan", &tmaze(), "--observations", "0,5", "--actions", "3"]);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], "go-top-left");
    assert_eq!(rows[3][0], "go-top-right");
}

#[test]
fn plan_rejects_inconsistent_history() {
    let out = actinf(&["plan", &tmaze(), "--observations", "0,5", "--actions", "3,3"]);
    assert_eq!(out.status.code(), Some(1));
}

fn fig2_in(dir: &Path, n_trials: usize) -> PathBuf {
    let text = std::fs::read_to_string(root().join("configs/fig2.json")).unwrap();
    let text = text.replace("\"n_trials\": 50", &format!("\"n_trials\": {n_trials}"));
    let file = dir.join("config.json");
    std::fs::write(&file, text).unwrap();
    file
}

#[test]
fn run_writes_identical_outputs_twice() {
    let dir = tempfile::tempdir().unwrap();
    let config = fig2_in(dir.path(), 50);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = actinf(&["run", path(&config), "--out", path(out_dir)]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for name in ["trials.csv", "beliefs.csv", "efe.csv", "summary.json"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let summary = std::fs::read_to_string(a.join("summary.json")).unwrap();
    assert!(summary.contains("\"expected_free_energy\""));
}

#[test]
fn output_directory_variable_wins() {
    let dir = tempfile::tempdir().unwrap();
    let config = fig2_in(dir.path(), 2);
    let target = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_actinf"))
        .args(["run", path(&config), "--out", path(&dir.path().join("from-flag"))])
        .env("ACTINF_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(target.join("trials.csv").exists());
    assert!(!dir.path().join("from-flag").exists());
}

#[test]
fn run_rejects_zero_trials() {
    let dir = tempfile::tempdir().unwrap();
    let config = fig2_in(dir.path(), 0);
    let out = actinf(&["run", path(&config), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("n_trials"));
}

#[test]
fn trace_prints_every_decision_time() {
    let dir = tempfile::tempdir().unwrap();
    let config = fig2_in(dir.path(), 5);
    let out = actinf(&["trace", path(&config), "3", "--agent", "info_gain_only"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("agent info_gain_only trial 3"));
    assert_eq!(text.matches("beliefs held at").count(), 3);
    assert_eq!(actinf(&["trace", path(&config), "5"]).status.code(), Some(2));
    assert_eq!(actinf(&["trace", path(&config), "0", "--agent", "nobody"]).status.code(), Some(2));
}
