//! End-to-end tests of the `cmfl` binary: exit codes, artifact layout, the
//! gen-data → files-run → report flow, flag overrides, and byte-identical
//! preset reproduction.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cmfl"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary spawns");
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> i32 {
    cmd.output().expect("binary spawns").status.code().expect("exit code")
}

/// A small valid instance every strategy accepts: A=4, m=3, C=1.
const TINY_CONFIG: &str = "\
k = 8
rounds = 4
tau = 1
activation_percent = 50
alpha_percent = 75
omega_percent = 25
batch_size = 2
lr = constant:0.1
strategy = cmfl-i
reg_coeff = 0.01
seed = 3
data = synthetic
data_classes = 3
data_dim = 3
data_per_class = 12
data_separation = 2.5
data_holdout_per_class = 4
data_scheme = label-shard:1
data_seed = 7
";

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.txt");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_artifacts_and_honors_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), TINY_CONFIG);
    let out_dir = tmp.path().join("out");

    let out = run_ok(bin()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .arg("--T")
        .arg("6")
        .arg("--strategy")
        .arg("median")
        .arg("--out")
        .arg(&out_dir));

    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("run complete"), "stdout: {stdout}");
    assert!(stdout.contains("final round 6"), "stdout: {stdout}");

    for artifact in ["config.txt", "metrics.csv", "roles.csv", "snapshot.txt"] {
        assert!(out_dir.join(artifact).is_file(), "missing {artifact}");
    }

    // The echoed config reflects the flag overrides, not the file values.
    let echoed = fs::read_to_string(out_dir.join("config.txt")).unwrap();
    assert!(echoed.contains("rounds = 6"), "echo: {echoed}");
    assert!(echoed.contains("strategy = median"), "echo: {echoed}");

    // Metrics cover every round plus a header.
    let metrics = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 7, "metrics: {metrics}");
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();

    // Unknown key in the config file.
    let bad = write_config(tmp.path(), "k = 8\nbogus_key = 1\n");
    assert_eq!(
        exit_code(bin().arg("run").arg("--config").arg(&bad).arg("--out").arg(tmp.path().join("a"))),
        2
    );

    // Invalid strategy flag on an otherwise fine config.
    let good = tmp.path().join("good.txt");
    fs::write(&good, TINY_CONFIG).unwrap();
    assert_eq!(
        exit_code(
            bin()
                .arg("run")
                .arg("--config")
                .arg(&good)
                .arg("--strategy")
                .arg("definitely-not-a-strategy")
                .arg("--out")
                .arg(tmp.path().join("b"))
        ),
        2
    );

    // Epsilon out of range.
    assert_eq!(
        exit_code(
            bin()
                .arg("run")
                .arg("--config")
                .arg(&good)
                .arg("--attack")
                .arg("back-gradient")
                .arg("--epsilon")
                .arg("150")
                .arg("--out")
                .arg(tmp.path().join("c"))
        ),
        2
    );
}

#[test]
fn degenerate_scores_abort_with_exit_3() {
    // With 9 of 10 clients malicious under the same-value attack, some
    // malicious training upload is scored against a malicious committee
    // gradient; both are the identical constant vector, so the reciprocal
    // distance score is undefined and the run must abort.
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "\
k = 10
rounds = 5
tau = 1
activation_percent = 80
alpha_percent = 50
omega_percent = 25
batch_size = 2
lr = constant:0.1
strategy = cmfl-i
attack = same-value
epsilon_percent = 90
attack_committee = true
seed = 1
data = synthetic
data_classes = 3
data_dim = 3
data_per_class = 12
data_separation = 2.5
data_holdout_per_class = 4
data_scheme = iid
data_seed = 7
",
    );
    let out = bin()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error:"), "stderr: {stderr}");
}

#[test]
fn io_errors_exit_4() {
    let tmp = tempfile::tempdir().unwrap();

    // Config path that does not exist.
    assert_eq!(
        exit_code(
            bin()
                .arg("run")
                .arg("--config")
                .arg(tmp.path().join("nope.txt"))
                .arg("--out")
                .arg(tmp.path().join("out"))
        ),
        4
    );

    // Report on a missing directory.
    assert_eq!(exit_code(bin().arg("report").arg(tmp.path().join("absent"))), 4);
}

#[test]
fn gen_data_files_run_report_flow() {
    let tmp = tempfile::tempdir().unwrap();
    let data_dir = tmp.path().join("data");

    run_ok(bin()
        .arg("gen-data")
        .arg("--classes")
        .arg("3")
        .arg("--dim")
        .arg("3")
        .arg("--per-class")
        .arg("12")
        .arg("--holdout-per-class")
        .arg("4")
        .arg("--K")
        .arg("8")
        .arg("--scheme")
        .arg("label-shard:1")
        .arg("--seed")
        .arg("7")
        .arg("--out")
        .arg(&data_dir));
    assert!(data_dir.join("partitions.txt").is_file());
    assert!(data_dir.join("holdout.txt").is_file());

    let config = write_config(
        tmp.path(),
        &format!(
            "\
k = 8
rounds = 4
tau = 1
activation_percent = 50
alpha_percent = 75
omega_percent = 25
batch_size = 2
lr = constant:0.1
strategy = cmfl-ii
seed = 3
data = files
data_partitions = {}
data_holdout = {}
",
            data_dir.join("partitions.txt").display(),
            data_dir.join("holdout.txt").display()
        ),
    );
    let out_dir = tmp.path().join("out");
    run_ok(bin().arg("run").arg("--config").arg(&config).arg("--out").arg(&out_dir));

    let report = run_ok(bin().arg("report").arg(&out_dir));
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("metrics.csv"), "report: {text}");
}

/// Collect (relative path, bytes) for every file under `dir`, recursively.
fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn preset_reruns_reproduce_csvs_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");

    for dir in [&first, &second] {
        let out = run_ok(bin()
            .arg("preset")
            .arg("normal-training")
            .arg("--seeds")
            .arg("1")
            .arg("--out")
            .arg(dir));
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("normal-training"), "stdout: {text}");
    }

    let a = dir_contents(&first);
    let b = dir_contents(&second);
    assert!(!a.is_empty(), "preset produced no files");
    assert_eq!(
        a.iter().map(|(p, _)| p).collect::<Vec<_>>(),
        b.iter().map(|(p, _)| p).collect::<Vec<_>>(),
        "artifact sets differ"
    );
    for ((path_a, bytes_a), (_, bytes_b)) in a.iter().zip(&b) {
        assert_eq!(bytes_a, bytes_b, "artifact {path_a} differs between reruns");
    }
}
