//! End-to-end checks of the `explore` binary.

use std::path::Path;
use std::process::{Command, Output};

fn explore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_explore"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn oracle_suites_pass() {
    let o = explore(&["oracle", "all", "--instances", "20", "--seed", "7"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let out = stdout(&o);
    for suite in ["erosion", "distance", "dijkstra", "visibility", "frontier", "raycast"] {
        assert!(out.lines().any(|l| l.starts_with("PASS") && l.contains(suite)), "{out}");
    }
}

#[test]
fn unknown_suite_is_rejected() {
    let o = explore(&["oracle", "nonsense"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("suite"), "{}", stderr(&o));
}

#[test]
fn invalid_override_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = explore(&["run", "-", "--set", "eta=-0.1", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("eta"), "{}", stderr(&o));
    assert!(!out.join("summary.csv").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("exp.txt");
    std::fs::write(&spec, "strategy = persistent\nspeed = 3\n").unwrap();
    let o = explore(&["run", spec.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("speed"), "{}", stderr(&o));
}

fn assert_run_files(dir: &Path) {
    for f in ["config.txt", "metrics.csv", "trajectory.csv", "replans.csv"] {
        assert!(dir.join(f).is_file(), "missing {f} in {}", dir.display());
    }
    let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    assert!(
        metrics.starts_with("tick,time_s,x_m,y_m,theta_rad,s,distance_traveled_m,mapping_pct,n_frontier_regions,event")
    );
    assert!(metrics.lines().count() > 2);
}

#[test]
fn budgeted_run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("exp.txt");
    std::fs::write(
        &spec,
        "world = @office\nposes = 2.0 3.0 0.0\nstrategy = persistent, preventive\ninfo = volume\nnav = geodesic\nstep_budget = 300\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = explore(&[
        "run",
        spec.to_str().unwrap(),
        "--jobs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("persistent-volume-geodesic-pose0"), "{text}");
    assert!(text.contains("TIMEOUT"), "{text}");
    for name in ["persistent-volume-geodesic-pose0", "preventive-volume-geodesic-pose0"] {
        assert_run_files(&out.join(name));
    }
    for f in ["summary.csv", "paired.csv", "resolved.txt"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    // the resolved configuration reproduces the experiment
    let again = dir.path().join("again");
    let o = explore(&[
        "run",
        out.join("resolved.txt").to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(out.join("persistent-volume-geodesic-pose0/metrics.csv")).unwrap(),
        std::fs::read(again.join("persistent-volume-geodesic-pose0/metrics.csv")).unwrap()
    );
}

#[test]
fn snapshot_replay_writes_a_map() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = explore(&[
        "run",
        "-",
        "--set",
        "poses=2.0 3.0 0.0",
        "--set",
        "strategy=persistent",
        "--set",
        "step_budget=1500",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = out.join("persistent-volume-geodesic-pose0");
    let o = explore(&["snapshot", run.to_str().unwrap(), "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let path = stdout(&o).trim().to_string();
    let pgm = std::fs::read_to_string(&path).unwrap();
    assert!(pgm.starts_with("P2"), "{}", &pgm[..pgm.len().min(20)]);
}
