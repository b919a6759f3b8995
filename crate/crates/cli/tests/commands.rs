use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

fn unravel(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_unravel"));
    c.args(args);
    match env_out {
        Some(p) => c.env("UNRAVEL_OUT_DIR", p),
        None => c.env_remove("UNRAVEL_OUT_DIR"),
    };
    c.output().expect("spawn unravel")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let ok = unravel(&["validate", s(&model("amplitude_damping.json"))], None);
    assert_eq!(code(&ok), 0);
    let bad = unravel(&["validate", s(&model("non_hermitian.json"))], None);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stdout).contains("hermiticity defect: 1.000e0"));
    let missing = unravel(&["validate", "/nonexistent/model.json"], None);
    assert_eq!(code(&missing), 2);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("I/O error"));
}

#[test]
fn master_writes_csv_json_and_manifest_to_env_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = unravel(
        &["master", "--model", s(&model("amplitude_damping.json")), "--horizon", "1", "--dt", "0.01"],
        Some(dir.path()),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("master.csv")).unwrap();
    assert_eq!(csv.lines().count(), 102);
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[7] - (-1f64).exp()).abs() < 1e-9);
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["schema_version"], "1");
    assert_eq!(m["files"].as_array().unwrap().len(), 2);
}

#[test]
fn non_hermitian_model_is_rejected_by_simulation_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = unravel(
        &["master", "--model", s(&model("non_hermitian.json")), "--out-dir", s(dir.path())],
        None,
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn single_trajectory_ensemble_matches_trajectory_command() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("driven_damped.json");
    let common = ["--model", s(&m), "--horizon", "3", "--seed", "17", "--stride", "10"];
    let t = dir.path().join("t");
    let e = dir.path().join("e");
    let mut a = vec!["trajectory", "--out-dir", s(&t)];
    a.extend(common);
    assert_eq!(code(&unravel(&a, None)), 0);
    let mut b = vec!["ensemble", "--trajectories", "1", "--save-trajectories", "--out-dir", s(&e)];
    b.extend(common);
    assert_eq!(code(&unravel(&b, None)), 0);
    let line = fs::read_to_string(e.join("trajectories.jsonl")).unwrap();
    let from_ensemble: Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(from_ensemble, json(&t.join("trajectory.json")));
}

#[test]
fn same_seed_gives_same_manifest_and_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("driven_damped.json");
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(format!("{sub}-{seed}"));
        let o = unravel(
            &[
                "ensemble", "--model", s(&m), "--horizon", "2", "--trajectories", "200", "--seed", seed,
                "--checkpoints", "1,2", "--out-dir", s(&out),
            ],
            None,
        );
        assert_eq!(code(&o), 0);
        out
    };
    let a = run("a", "5");
    let b = run("b", "5");
    let c = run("c", "6");
    let ma = fs::read(a.join("manifest.json")).unwrap();
    assert_eq!(ma, fs::read(b.join("manifest.json")).unwrap());
    assert_eq!(fs::read(a.join("ensemble.json")).unwrap(), fs::read(b.join("ensemble.json")).unwrap());
    assert_ne!(json(&a.join("manifest.json"))["config_hash"], json(&c.join("manifest.json"))["config_hash"]);
}

#[test]
fn amplitude_damping_population_matches_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let o = unravel(
        &[
            "ensemble", "--model", s(&model("amplitude_damping.json")), "--horizon", "1", "--trajectories", "5000",
            "--checkpoints", "1", "--out-dir", s(dir.path()),
        ],
        None,
    );
    assert_eq!(code(&o), 0);
    let e = json(&dir.path().join("ensemble.json"));
    let p = e["checkpoints"][0]["populations"][1].as_f64().unwrap();
    let se = e["checkpoints"][0]["population_stderr"][1].as_f64().unwrap();
    assert!((p - (-1f64).exp()).abs() <= 4.0 * se, "{p} ± {se}");
}

#[test]
fn compare_passes_and_detects_wrong_pairing() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("amplitude_damping.json");
    let args = |out: &Path| {
        vec![
            "compare".to_owned(),
            "--model".into(),
            s(&m).into(),
            "--horizon".into(),
            "2".into(),
            "--trajectories".into(),
            "2000".into(),
            "--checkpoints".into(),
            "0.5,1,2".into(),
            "--out-dir".into(),
            s(out).into(),
        ]
    };
    let good = dir.path().join("good");
    let a = args(&good);
    let o = unravel(&a.iter().map(String::as_str).collect::<Vec<_>>(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(&good.join("compare.json"))["pass"], true);

    let bad = dir.path().join("bad");
    let mut b = args(&bad);
    b.extend(["--master-model".into(), s(&model("driven_damped.json")).into()]);
    let o = unravel(&b.iter().map(String::as_str).collect::<Vec<_>>(), None);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&bad.join("compare.json"))["pass"], false);
}

#[test]
fn compare_without_jumps_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("free.json");
    fs::write(
        &file,
        r#"{"dim": 2, "hamiltonian": [[0,0],[1,0],[1,0],[0,0]], "jump_ops": [], "convention": "raw_L",
            "initial_state": [[1,0],[0,0]]}"#,
    )
    .unwrap();
    let o = unravel(
        &["compare", "--model", s(&file), "--trajectories", "3", "--checkpoints", "0.5,1", "--out-dir", s(dir.path())],
        None,
    );
    assert_eq!(code(&o), 0);
    for row in json(&dir.path().join("compare.json"))["rows"].as_array().unwrap() {
        assert!(row["distance"].as_f64().unwrap() < 1e-8);
    }
}

#[test]
fn misaligned_checkpoint_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = unravel(
        &["compare", "--model", s(&model("amplitude_damping.json")), "--checkpoints", "0.505", "--out-dir", s(dir.path())],
        None,
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not on the"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        serde_json::json!({
            "model": model("amplitude_damping.json"),
            "horizon": 0.5,
            "dt": 0.05,
            "out_dir": dir.path().join("from-config"),
        })
        .to_string(),
    )
    .unwrap();
    assert_eq!(code(&unravel(&["master", "--config", s(&cfg)], None)), 0);
    let csv = fs::read_to_string(dir.path().join("from-config/master.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    let over = dir.path().join("override");
    assert_eq!(code(&unravel(&["master", "--config", s(&cfg), "--dt", "0.1", "--out-dir", s(&over)], None)), 0);
    assert_eq!(fs::read_to_string(over.join("master.csv")).unwrap().lines().count(), 7);
}

#[test]
fn mcwf_abort_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("fast.json");
    fs::write(
        &file,
        r#"{"dim": 2, "hamiltonian": [[0,0],[0,0],[0,0],[0,0]],
            "jump_ops": [{"label": "d", "matrix": [[0,0],[10,0],[0,0],[0,0]]}],
            "convention": "raw_L", "initial_state": [[0,0],[1,0]]}"#,
    )
    .unwrap();
    let o = unravel(
        &["trajectory", "--model", s(&file), "--method", "mcwf", "--dt", "0.05", "--out-dir", s(dir.path())],
        None,
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn dumped_path_replays_to_the_linear_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("driven_damped.json");
    let t = dir.path().join("t");
    let r = dir.path().join("r");
    let o = unravel(
        &[
            "trajectory", "--model", s(&m), "--method", "linear", "--horizon", "2", "--seed", "8", "--dump-paths",
            "--out-dir", s(&t),
        ],
        None,
    );
    assert_eq!(code(&o), 0);
    let o = unravel(
        &[
            "paths", "replay", "--model", s(&m), "--horizon", "2", "--path", s(&t.join("path.json")), "--as-method",
            "linear", "--out-dir", s(&r),
        ],
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = json(&t.join("trajectory.json"));
    let b = json(&r.join("trajectory.json"));
    assert_eq!(a["states"], b["states"]);
    assert_eq!(a["jumps"], b["jumps"]);
}

#[test]
fn paths_dump_has_one_channel_per_operator() {
    let dir = tempfile::tempdir().unwrap();
    let o = unravel(
        &["paths", "dump", "--model", s(&model("projectors.json")), "--horizon", "4", "--out-dir", s(dir.path())],
        None,
    );
    assert_eq!(code(&o), 0);
    let p = json(&dir.path().join("path.json"));
    assert_eq!(p["rate_model"], "unit_rate");
    assert_eq!(p["jumps"].as_object().unwrap().len(), 2);
}

#[test]
fn grw_demo_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = unravel(
        &["grw-demo", "--sites", "32", "--grid", "32", "--box-min", "-16", "--box-max", "16", "--trajectories", "500",
          "--packet-sigma", "4", "--out-dir", s(dir.path())],
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let g = json(&dir.path().join("grw.json"));
    assert!(g["variance_reduced_fraction"].as_f64().unwrap() >= 0.99);
    assert!(g["defect"].as_f64().unwrap() < 0.05);
    let hist = fs::read_to_string(dir.path().join("grw_histogram.csv")).unwrap();
    assert_eq!(hist.lines().count(), 33);
}

#[test]
fn bad_usage_exits_two() {
    assert_eq!(code(&unravel(&["master", "--dt", "fast"], None)), 2);
    assert_eq!(code(&unravel(&["frobnicate"], None)), 2);
}
