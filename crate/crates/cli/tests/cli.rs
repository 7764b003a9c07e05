//! End-to-end tests of the `retime` binary: determinism of whole-batch
//! outputs, equivalence of the pipeline with its composed stages, config
//! precedence, provenance sidecars, and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn retime(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_retime"))
        .args(args)
        .output()
        .expect("spawn retime")
}

fn run_ok(args: &[&str]) -> Output {
    let out = retime(args);
    assert!(
        out.status.success(),
        "retime {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_bytes(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn assert_same_file(a: &Path, b: &Path) {
    assert!(
        read_bytes(a) == read_bytes(b),
        "{} and {} differ",
        a.display(),
        b.display()
    );
}

fn json_of(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&read_bytes(path))
        .unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}

#[test]
fn rerun_is_byte_identical() {
    let a = tempfile::tempdir().expect("tempdir");
    let b = tempfile::tempdir().expect("tempdir");
    let dir_a = a.path().to_str().expect("utf-8");
    let dir_b = b.path().to_str().expect("utf-8");
    run_ok(&["pipeline", "--trials", "2", "--dir", dir_a]);
    run_ok(&["pipeline", "--trials", "2", "--dir", dir_b]);

    let names = |dir: &Path| -> Vec<String> {
        let mut v: Vec<String> = fs::read_dir(dir)
            .expect("read dir")
            .map(|e| e.expect("entry").file_name().into_string().expect("utf-8"))
            .collect();
        v.sort();
        v
    };
    let list = names(a.path());
    assert_eq!(list, names(b.path()));
    assert!(list.contains(&"report.json".to_string()));
    for name in &list {
        assert_same_file(&a.path().join(name), &b.path().join(name));
    }
}

#[test]
fn pipeline_matches_composed_stages() {
    let whole = tempfile::tempdir().expect("tempdir");
    let staged = tempfile::tempdir().expect("tempdir");
    let d = whole.path();
    let e = staged.path();
    run_ok(&["pipeline", "--trials", "2", "--dir", d.to_str().expect("utf-8")]);

    for i in 0..2usize {
        let trial = i.to_string();
        let stem = |suffix: &str| format!("trial_{i:03}_{suffix}");
        let ep = |name: String| e.join(name);
        let world = ep(stem("world.json"));
        let path = ep(stem("path.json"));
        let profile = ep(format!("profile_{i}.csv"));

        run_ok(&[
            "gen-world", "--trials", "2", "--trial", &trial,
            "--out", world.to_str().expect("utf-8"),
        ]);
        assert_same_file(&world, &d.join(stem("world.json")));

        run_ok(&[
            "plan", "--trials", "2", "--trial", &trial,
            "--world", world.to_str().expect("utf-8"),
            "--out", path.to_str().expect("utf-8"),
        ]);
        assert_same_file(&path, &d.join(stem("path.json")));

        // The spline-grid export has no pipeline counterpart; just run it.
        run_ok(&[
            "fit", "--trials", "2",
            "--world", world.to_str().expect("utf-8"),
            "--path", path.to_str().expect("utf-8"),
            "--out", ep(format!("grid_{i}.csv")).to_str().expect("utf-8"),
        ]);

        run_ok(&[
            "scale", "--trials", "2", "--trial", &trial,
            "--world", world.to_str().expect("utf-8"),
            "--path", path.to_str().expect("utf-8"),
            "--out", profile.to_str().expect("utf-8"),
        ]);

        // The batch sidecars record how planning actually went; forward the
        // numbers from the plan metadata so the staged sidecars match.
        let plan_meta = json_of(&ep(stem("path.meta.json")));
        let attempts = plan_meta["plan_attempts"].to_string();
        let inflation = plan_meta["inflation_used"].to_string();

        for (variant, with_profile) in [("nominal", false), ("scaled", true)] {
            let out = ep(format!("trial_{i:03}_{variant}.csv"));
            let mut args: Vec<&str> = vec![
                "run", "--trials", "2", "--trial", &trial,
                "--world", world.to_str().expect("utf-8"),
                "--path", path.to_str().expect("utf-8"),
                "--plan-attempts", &attempts,
                "--inflation-used", &inflation,
                "--out", out.to_str().expect("utf-8"),
            ];
            if with_profile {
                args.extend_from_slice(&["--profile", profile.to_str().expect("utf-8")]);
            }
            run_ok(&args);
            assert_same_file(&out, &d.join(format!("trial_{i:03}_{variant}.csv")));
            assert_same_file(
                &out.with_extension("json"),
                &d.join(format!("trial_{i:03}_{variant}.json")),
            );
        }
    }

    run_ok(&["report", "--trials", "2", "--dir", e.to_str().expect("utf-8")]);
    for name in ["report.json", "report.md", "histogram.csv"] {
        assert_same_file(&e.join(name), &d.join(name));
    }
}

#[test]
fn sidecars_embed_config_and_seeds() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = dir.path().join("world.json");
    run_ok(&[
        "gen-world", "--seed", "21", "--trial", "3",
        "--out", out.to_str().expect("utf-8"),
    ]);
    let meta = json_of(&dir.path().join("world.meta.json"));
    assert_eq!(meta["command"], "gen-world");
    assert_eq!(meta["trial_index"], 3);
    assert_eq!(meta["trial_seed"], 24); // master seed 21 + trial index 3
    assert_eq!(meta["config"]["master_seed"], 21);
    assert!(meta["world_seed"].is_u64());
    assert!(meta["config"]["t_s"].is_number());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "master_seed = 11\nfreeze_start = 0.4\nn_obstacles = 4\n").expect("write cfg");
    let out = dir.path().join("world.json");
    run_ok(&[
        "gen-world",
        "--config", cfg.to_str().expect("utf-8"),
        "--seed", "13",
        "--out", out.to_str().expect("utf-8"),
    ]);
    let meta = json_of(&dir.path().join("world.meta.json"));
    // The flag wins over the file; untouched file settings survive.
    assert_eq!(meta["config"]["master_seed"], 13);
    assert_eq!(meta["config"]["freeze_start"], 0.4);
    assert_eq!(meta["config"]["n_obstacles"], 4);
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "not_a_real_setting = 1\n").expect("write cfg");
    let out = retime(&[
        "pipeline",
        "--config", cfg.to_str().expect("utf-8"),
        "--dir", dir.path().to_str().expect("utf-8"),
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn invalid_config_value_exits_2() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = retime(&[
        "pipeline", "--trials", "0",
        "--dir", dir.path().to_str().expect("utf-8"),
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn doomed_planning_exits_3() {
    let dir = tempfile::tempdir().expect("tempdir");
    // Five tree extensions of 0.02 m cannot span the workspace diagonal, so
    // every trial fails in planning and the batch reports a dead run.
    let out = retime(&[
        "pipeline", "--trials", "2", "--rrt-max-iters", "5",
        "--dir", dir.path().to_str().expect("utf-8"),
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}
