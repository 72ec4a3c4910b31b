use std::path::Path;
use std::process::{Command, Output};

fn pathwarm(args: &[&str], data_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathwarm"))
        .args(args)
        .env("PATHWARM_DATA_DIR", data_dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], data_dir: &Path) -> String {
    let out = pathwarm(args, data_dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn every_subcommand_documents_seed_and_out() {
    let tmp = tempfile::tempdir().unwrap();
    for sub in [
        "gen-paths",
        "gen-bench",
        "run-bench",
        "export-manifold",
        "rollout",
        "optimize",
        "train-bc",
        "train-cem",
        "gen-demos",
    ] {
        let help = ok(&[sub, "--help"], tmp.path());
        assert!(help.contains("--seed") && help.contains("--out"), "{sub}");
    }
}

#[test]
fn invalid_flag_combinations_exit_with_usage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pathwarm(&["optimize", "--problem", "p.json", "--init", "policy"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = pathwarm(&["run-bench", "--suite", "s", "--methods", "linear,policy"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = pathwarm(&["run-bench", "--suite", "s", "--deterministic", "--threads", "4"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    let out = pathwarm(&["optimize", "--problem", "p.json", "--init", "sideways"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_inputs_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pathwarm(&["optimize", "--problem", "does-not-exist.json"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does-not-exist.json"));
}

#[test]
fn gen_paths_defaults_to_the_data_dir() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["gen-paths", "--count", "1", "--builtin", "--seed", "3"], tmp.path());
    let dir = tmp.path().join("gen-paths").join("paths");
    assert!(dir.join("path-000.json").exists());
    assert!(dir.join("Square.json").exists());
    assert!(tmp.path().join("gen-paths/worlds/Square.occ").exists());
}

#[test]
fn end_to_end_pipeline_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let p = |s: &str| t.join(s).to_string_lossy().into_owned();
    let gen = [
        "gen-bench",
        "--seed",
        "5",
        "--random-paths",
        "1",
        "--random-paths-obs",
        "0",
        "--starts-per-random",
        "2",
    ];
    ok(&[&gen[..], &["--out", &p("suite")]].concat(), t);
    ok(&[&gen[..], &["--out", &p("suite2")]].concat(), t);
    assert_eq!(read_tree(&t.join("suite")), read_tree(&t.join("suite2")));

    ok(&["gen-demos", "--suite", &p("suite"), "--max-iters", "40", "--out", &p("demos")], t);
    assert!(t.join("demos/suite.json").exists());
    ok(
        &[
            "train-bc",
            "--demos",
            &p("demos"),
            "--epochs",
            "3",
            "--augment-copies",
            "1",
            "--out",
            &p("bc"),
        ],
        t,
    );
    let policy = p("bc/policy.json");
    let problem = p("suite/problems/random-000-s00.json");

    ok(&["rollout", "--policy", &policy, "--problem", &problem, "--out", &p("rollout")], t);
    let traj: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(t.join("rollout/trajectory.json")).unwrap()).unwrap();
    assert!(!traj["configs"].as_array().unwrap().is_empty());
    assert!(t.join("rollout/episode.jsonl").exists());

    ok(
        &[
            "optimize",
            "--problem",
            &problem,
            "--init",
            "policy",
            "--policy",
            &policy,
            "--budget",
            "5",
            "--max-iters",
            "20",
            "--out",
            &p("opt"),
        ],
        t,
    );
    let outcome: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(t.join("opt/outcome.json")).unwrap()).unwrap();
    assert!(outcome["final_total"].as_f64().unwrap() <= outcome["init_total"].as_f64().unwrap());

    let bench = |out: &str| {
        ok(
            &[
                "run-bench",
                "--suite",
                &p("suite"),
                "--policy",
                &policy,
                "--deterministic",
                "--max-iters",
                "20",
                "--budget",
                "10",
                "--gnuplot",
                "--out",
                &p(out),
            ],
            t,
        )
    };
    let summary = bench("run1");
    bench("run2");
    assert!(summary.contains("success"));
    for f in ["report.csv", "summary.csv"] {
        assert_eq!(
            std::fs::read(t.join("run1").join(f)).unwrap(),
            std::fs::read(t.join("run2").join(f)).unwrap(),
            "{f}"
        );
    }
    let report = std::fs::read_to_string(t.join("run1/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 2 * 3);
    assert!(t.join("run1/timings.csv").exists() && t.join("run1/traces.jsonl").exists());
    assert!(t.join("run1/summary.gp").exists());

    ok(
        &[
            "export-manifold",
            "--problem",
            &problem,
            "--samples-per-pose",
            "20",
            "--stride",
            "20",
            "--overlay",
            "linear",
            "--trajectory",
            &p("opt/trajectory.json"),
            "--out",
            &p("manifold"),
        ],
        t,
    );
    let csv = std::fs::read_to_string(t.join("manifold/manifold.csv")).unwrap();
    assert!(csv.starts_with("pc1,pc2,pose_index"));
    assert!(csv.lines().count() > 1);
    let overlays = std::fs::read_to_string(t.join("manifold/trajectories.csv")).unwrap();
    assert!(overlays.contains("linear") && overlays.contains("trajectory"));

    ok(
        &[
            "train-cem",
            "--suite",
            &p("suite"),
            "--hidden",
            "4",
            "--iters",
            "2",
            "--population",
            "4",
            "--out",
            &p("cem"),
        ],
        t,
    );
    assert!(t.join("cem/policy.json").exists() && t.join("cem/cem_trace.csv").exists());
}
