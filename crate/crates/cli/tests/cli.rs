//! End-to-end tests of the `jcl` binary: artifact layout, provenance,
//! deterministic report bytes, and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn jcl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jcl"))
        .args(args)
        .env("JCL_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write_tiny_spec(path: &Path, extra: &str) {
    let base = "seed = 9\nepochs = 4\nbatch_size = 8\nqueue_capacity = 16\n\
                embedding_dim = 8\nhidden_dim = 12\ninstance_count = 32\n\
                ambient_dim = 16\ncluster_count = 4\nmomentum = 0.99\n\
                learning_rate = 0.3\n";
    fs::write(path, format!("{base}{extra}")).unwrap();
}

#[test]
fn train_writes_spec_checkpoint_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    write_tiny_spec(&spec, "");
    let out = dir.path().join("run");
    let result = jcl(&[
        "train",
        "--spec",
        spec.to_str().unwrap(),
        "--method",
        "jcl",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    assert!(out.join("spec.toml").exists());
    assert!(out.join("checkpoint.json").exists());
    assert!(out.join("train_log.csv").exists());

    // The stored spec is fully resolved: reloading reproduces every field.
    let stored = fs::read_to_string(out.join("spec.toml")).unwrap();
    assert!(stored.contains("tau = 0.2"));
    assert!(stored.contains("seed = 9"));
}

#[test]
fn unknown_spec_key_fails_the_process() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, "seed = 1\nlamda = 2.0\n").unwrap();
    let result = jcl(&[
        "train",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert!(!result.status.success());
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("lamda"), "{stderr}");
}

#[test]
fn infonce_and_jcl_match_at_degenerate_hyperparameters() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    write_tiny_spec(&spec, "lambda = 0.0\npositive_keys = 1\n");
    for method in ["jcl", "infonce"] {
        let out = dir.path().join(method);
        let result = jcl(&[
            "train",
            "--spec",
            spec.to_str().unwrap(),
            "--method",
            method,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(result.status.success());
    }
    let strip_wall = |p: &Path| -> Vec<String> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(
        strip_wall(&dir.path().join("jcl/train_log.csv")),
        strip_wall(&dir.path().join("infonce/train_log.csv"))
    );
}

#[test]
fn verify_bound_reports_identical_bytes_and_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path| {
        let result = jcl(&[
            "verify-bound",
            "--trials",
            "8",
            "--seed",
            "21",
            "--samples",
            "4000",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(result.status.success(), "{result:?}");
        fs::read(out.join("verify_report.csv")).unwrap()
    };
    let a = run(&dir.path().join("a"));
    let b = run(&dir.path().join("b"));
    assert_eq!(a, b);
}

#[test]
fn probe_is_reproducible_and_writes_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    write_tiny_spec(&spec, "");
    let run_dir = dir.path().join("run");
    assert!(jcl(&[
        "train",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
    ])
    .status
    .success());

    let ck = run_dir.join("checkpoint.json");
    let probe = |out: &Path| -> Vec<u8> {
        let result = jcl(&[
            "probe",
            "--checkpoint",
            ck.to_str().unwrap(),
            "--seed",
            "4",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(result.status.success(), "{result:?}");
        fs::read(out.join("probe_report.csv")).unwrap()
    };
    let a = probe(&dir.path().join("pa"));
    let b = probe(&dir.path().join("pb"));
    assert_eq!(a, b);
    assert!(dir.path().join("pa/spec.toml").exists());
}

#[test]
fn analyze_features_writes_consistent_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    // Degenerate augmentations: identical views.
    write_tiny_spec(&spec, "augment_noise = 0.0\naugment_gain = 0.0\n");
    let run_dir = dir.path().join("run");
    assert!(jcl(&[
        "train",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
    ])
    .status
    .success());

    let out = dir.path().join("analysis");
    let result = jcl(&[
        "analyze-features",
        "--checkpoint",
        run_dir.join("checkpoint.json").to_str().unwrap(),
        "--instances",
        "40",
        "--augmentations",
        "6",
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");

    let summary = fs::read_to_string(out.join("analysis_summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next().unwrap(), "metric,mean,std,count,seed");
    let sim_line = lines.next().unwrap();
    let var_line = lines.next().unwrap();
    let sim_mean: f64 = sim_line.split(',').nth(1).unwrap().parse().unwrap();
    let var_mean: f64 = var_line.split(',').nth(1).unwrap().parse().unwrap();
    assert!((sim_mean - 1.0).abs() < 1e-12, "{sim_line}");
    assert!(var_mean.abs() < 1e-15, "{var_line}");

    // Count conservation in the histogram files.
    for name in ["similarity_hist.csv", "variance_hist.csv"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        let total: u64 = text
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(total, 40, "{name}");
    }
    assert!(out.join("spec.toml").exists());
}

#[test]
fn single_value_sweep_matches_standalone_train_and_probe() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    write_tiny_spec(&spec, "");
    let sweep_dir = dir.path().join("sweep");
    let result = jcl(&[
        "sweep",
        "--param",
        "lambda",
        "--values",
        "4.0",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        sweep_dir.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    let sweep_csv = fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    let row = sweep_csv.lines().nth(1).unwrap();
    let sweep_acc: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    let sweep_loss: f64 = row.split(',').nth(3).unwrap().parse().unwrap();

    // Standalone train (λ=4 is already the default in the spec file) +
    // probe with the spec-file seed must agree exactly.
    let run_dir = dir.path().join("run");
    assert!(jcl(&[
        "train",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
    ])
    .status
    .success());
    let probe_out = dir.path().join("probe");
    assert!(jcl(&[
        "probe",
        "--checkpoint",
        run_dir.join("checkpoint.json").to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        probe_out.to_str().unwrap(),
    ])
    .status
    .success());
    let probe_csv = fs::read_to_string(probe_out.join("probe_report.csv")).unwrap();
    let probe_acc: f64 = probe_csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    let train_log = fs::read_to_string(run_dir.join("train_log.csv")).unwrap();
    let final_loss: f64 = train_log
        .lines()
        .last()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();

    assert_eq!(sweep_acc, probe_acc);
    assert_eq!(sweep_loss, final_loss);

    // Sweep rows and per-run provenance.
    assert_eq!(sweep_csv.lines().count(), 2);
    assert!(sweep_dir.join("run_lambda_0/spec.toml").exists());
    assert!(sweep_dir.join("run_lambda_0/checkpoint.json").exists());
}

#[test]
fn sweep_marks_failed_rows_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    write_tiny_spec(&spec, "");
    let sweep_dir = dir.path().join("sweep");
    let result = jcl(&[
        "sweep",
        "--param",
        "tau",
        "--values=-0.5,0.2",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        sweep_dir.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    let csv = fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains("failed"));
    assert!(rows[1].ends_with("ok"));
}
