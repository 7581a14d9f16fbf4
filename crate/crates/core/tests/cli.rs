//! End-to-end runs of the `rte` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rte(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rte"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = rte(args);
    assert!(
        out.status.success(),
        "rte {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const SMALL: &str = "# short smoke experiment\ntargets = 3\nreplicates = 2\ntarget_cap = 30\niterations_per_tree = 150\ntrees = 2\nseed = 42\n";

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn evolve_run_stats_pipeline_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let rep = tmp.path().join("rep.csv");
    let rep2 = tmp.path().join("rep2.csv");
    let (cfg_s, rep_s) = (cfg.to_str().unwrap(), rep.to_str().unwrap());
    ok(&["evolve", "--config", cfg_s, "--out", rep_s, "--evals", "5000", "--seed", "1"]);
    ok(&["evolve", "--config", cfg_s, "--out", rep2.to_str().unwrap(), "--evals", "5000", "--seed", "1"]);
    assert_eq!(fs::read(&rep).unwrap(), fs::read(&rep2).unwrap());

    for agent in ["rte", "gp-texplore", "mcts", "intact"] {
        let a = tmp.path().join(format!("{agent}_a"));
        let b = tmp.path().join(format!("{agent}_b"));
        for d in [&a, &b] {
            ok(&[
                "run",
                "--config",
                cfg_s,
                "--agent",
                agent,
                "--repertoire",
                rep_s,
                "--out-dir",
                d.to_str().unwrap(),
            ]);
        }
        let (fa, fb) = (dir_files(&a), dir_files(&b));
        let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
        assert_eq!(names, ["episodes.csv", "log_0.csv", "log_1.csv", "summary.txt"]);
        assert_eq!(fa, fb, "{agent}: outputs differ between identical runs");
    }

    let report = ok(&[
        "stats",
        "--a",
        tmp.path().join("rte_a/summary.txt").to_str().unwrap(),
        "--b",
        tmp.path().join("mcts_a/summary.txt").to_str().unwrap(),
    ]);
    assert!(report.contains("mann-whitney"));
    assert!(report.contains("significance:"));
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "targets = 3\nwheel_size = 2\n").unwrap();
    let out = rte(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("line 2") && err.contains("wheel_size"), "{err}");

    let out = rte(&[
        "run",
        "--agent",
        "rte",
        "--repertoire",
        tmp.path().join("missing.csv").to_str().unwrap(),
        "--out-dir",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("not found"), "{err}");
    assert!(!tmp.path().join("o").exists(), "no output before startup checks pass");
}
