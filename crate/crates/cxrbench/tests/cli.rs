//! Exercises the binary surface: subcommands, flag/env precedence, exit
//! codes, and the machine-readable error summary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cxrbench(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cxrbench"));
    cmd.args(args);
    cmd.env_remove("CXRBENCH_ROOT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn registry_dump_lists_every_backbone() {
    let out = cxrbench(&["registry"], &[]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("model\tinput_resolution\tlast_conv_shape\treference_trainable_params"));
    assert!(text.contains("DenseNet169\t224\t7x7x1664\t12911234"));
    assert!(text.contains("EfficientNetB2\t260\t9x9x1408\t8062212"));
    assert!(text.contains("\nstub\t32\t8x8x16\t\n"));
    assert_eq!(text.lines().count(), 1 + 23);
}

#[test]
fn synth_data_then_full_stage_chain() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = cxrbench(
        &[
            "synth-data",
            "--out",
            data.to_str().unwrap(),
            "--n-per-class",
            "20",
            "--image-size",
            "32",
            "--seed",
            "9",
            "--difficulty",
            "0.2",
        ],
        &[],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("40 images"));

    let config_path = dir.path().join("run.conf");
    fs::write(
        &config_path,
        format!(
            "run_id = cli-run\n\
             manifest = {}\n\
             output_root = {}\n\
             models = stub\n\
             seeds = 1,2,3,4,5\n\
             max_epochs = 6\n\
             patience = 3\n\
             lr_backbone = 0.001\n\
             lr_head = 0.01\n\
             batch_size = 16\n\
             workers = 2\n",
            data.join("manifest.tsv").display(),
            dir.path().join("runs").display()
        ),
    )
    .unwrap();

    let out = cxrbench(&["train", "--config", config_path.to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("trained 5 instances"));

    for stage in ["evaluate", "ensemble", "report"] {
        let out = cxrbench(
            &[
                stage,
                "--run-id",
                "cli-run",
                "--output-root",
                dir.path().join("runs").to_str().unwrap(),
            ],
            &[],
        );
        assert!(out.status.success(), "{stage}: {}", stderr(&out));
        assert!(stdout(&out).contains("report files"));
    }
    let reports = dir.path().join("runs").join("cli-run").join("reports");
    assert!(reports.join("single_models.csv").is_file());
    assert!(reports.join("ensemble_homogeneous.txt").is_file());
}

#[test]
fn output_root_env_fallback_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    cxrbench(
        &[
            "synth-data",
            "--out",
            data.to_str().unwrap(),
            "--n-per-class",
            "8",
            "--seed",
            "3",
        ],
        &[],
    );
    let env_root = dir.path().join("env-root");
    let flag_root = dir.path().join("flag-root");
    fs::create_dir_all(&env_root).unwrap();
    fs::create_dir_all(&flag_root).unwrap();

    // env only
    let out = cxrbench(
        &[
            "train",
            "--run-id",
            "env-run",
            "--models",
            "stub",
            "--seeds",
            "1,2,3,4,5",
            "--config",
            write_minimal_config(dir.path(), &data).to_str().unwrap(),
        ],
        &[("CXRBENCH_ROOT", env_root.to_str().unwrap())],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(env_root.join("env-run").join("config.snapshot").is_file());

    // flag wins over env
    let out = cxrbench(
        &[
            "train",
            "--run-id",
            "flag-run",
            "--models",
            "stub",
            "--seeds",
            "1,2,3,4,5",
            "--output-root",
            flag_root.to_str().unwrap(),
            "--config",
            write_minimal_config(dir.path(), &data).to_str().unwrap(),
        ],
        &[("CXRBENCH_ROOT", env_root.to_str().unwrap())],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(flag_root.join("flag-run").join("config.snapshot").is_file());
    assert!(!env_root.join("flag-run").exists());
}

fn write_minimal_config(dir: &Path, data: &Path) -> std::path::PathBuf {
    let path = dir.join("minimal.conf");
    fs::write(
        &path,
        format!(
            "manifest = {}\nmax_epochs = 3\npatience = 2\nlr_backbone = 0.001\nlr_head = 0.01\nbatch_size = 8\n",
            data.join("manifest.tsv").display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn validation_errors_exit_one_with_json_summary() {
    let out = cxrbench(&["train", "--run-id", "x"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    let line = err.lines().last().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(line).expect("stderr ends in JSON");
    assert_eq!(parsed["error"], "validation");
    assert!(parsed["message"].as_str().unwrap().contains("manifest"));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // evaluate before any training: no config snapshot in the store
    let out = cxrbench(
        &[
            "evaluate",
            "--run-id",
            "ghost",
            "--output-root",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let parsed: serde_json::Value =
        serde_json::from_str(stderr(&out).lines().last().unwrap()).unwrap();
    assert_eq!(parsed["error"], "data");
}

#[test]
fn training_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    cxrbench(
        &[
            "synth-data",
            "--out",
            data.to_str().unwrap(),
            "--n-per-class",
            "8",
            "--seed",
            "4",
        ],
        &[],
    );
    // full-size backbones have no trainable implementation: every instance
    // fails, which surfaces as a training error
    let out = cxrbench(
        &[
            "train",
            "--run-id",
            "fail-run",
            "--models",
            "DenseNet169",
            "--seeds",
            "1,2,3,4,5",
            "--output-root",
            dir.path().join("runs").to_str().unwrap(),
            "--config",
            write_minimal_config(dir.path(), &data).to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let parsed: serde_json::Value =
        serde_json::from_str(stderr(&out).lines().last().unwrap()).unwrap();
    assert_eq!(parsed["error"], "training");
    assert!(parsed["message"]
        .as_str()
        .unwrap()
        .contains("resumable"));
}

#[test]
fn make_manifest_merges_train_and_test_records() {
    let dir = tempfile::tempdir().unwrap();
    let train_txt = dir.path().join("train.txt");
    let test_txt = dir.path().join("test.txt");
    fs::write(&train_txt, "p1 a.png positive src\np2 b.png negative src\n").unwrap();
    fs::write(&test_txt, "p3 c.png Positive src\n").unwrap();
    let out_path = dir.path().join("manifest.tsv");
    let out = cxrbench(
        &[
            "make-manifest",
            "--train-txt",
            train_txt.to_str().unwrap(),
            "--test-txt",
            test_txt.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&out_path).unwrap();
    assert!(text.contains("a.png\ta.png\tpositive\tp1\tsrc\ttrain"));
    assert!(text.contains("c.png\tc.png\tpositive\tp3\tsrc\ttest"));

    // patient overlap across the two files must be rejected
    fs::write(&test_txt, "p1 d.png negative src\n").unwrap();
    let out = cxrbench(
        &[
            "make-manifest",
            "--train-txt",
            train_txt.to_str().unwrap(),
            "--test-txt",
            test_txt.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_data_precondition_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = cxrbench(
        &[
            "synth-data",
            "--out",
            dir.path().join("d").to_str().unwrap(),
            "--n-per-class",
            "1",
            "--seed",
            "1",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
}
