//! Exit-code and wiring tests for the offlens binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn offlens(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_offlens"))
        .args(args)
        .current_dir(dir)
        .env_remove("OFFLENS_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = offlens(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_is_available_for_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    for sub in [
        "label", "dist", "train", "predict", "evaluate", "audit", "cascade", "sample", "redact",
        "synth",
    ] {
        let out = offlens(&[sub, "--help"], dir.path());
        assert_eq!(
            out.status.code(),
            Some(0),
            "{sub} --help failed: {}",
            stderr(&out)
        );
    }
    assert_eq!(offlens(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn label_wires_the_cutoff_policy() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("a.tsv"),
        "t1\tlow one\t0.25\nt2\thigh one\t0.9\nt3\tboundary\t0.8\n",
    )
    .unwrap();
    let out = offlens(
        &[
            "label",
            "--task",
            "A",
            "--cutoff",
            "0.8",
            "--in",
            "a.tsv",
            "--out",
            "a_lab.tsv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out), "OFF\t2\nNOT\t1\nexcluded\t0\n");
    let written = fs::read_to_string(dir.path().join("a_lab.tsv")).unwrap();
    assert_eq!(
        written,
        "t1\tlow one\tNOT\nt2\thigh one\tOFF\nt3\tboundary\tOFF\n"
    );
}

#[test]
fn exclusive_flag_flips_the_boundary() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.tsv"), "t1\tboundary\t0.8\n").unwrap();
    let out = offlens(
        &[
            "label",
            "--task",
            "A",
            "--exclusive",
            "--in",
            "a.tsv",
            "--out",
            "o.tsv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "OFF\t0\nNOT\t1\nexcluded\t0\n");
}

#[test]
fn bad_cutoff_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.tsv"), "t1\tx\t0.5\n").unwrap();
    let out = offlens(
        &[
            "label", "--task", "A", "--cutoff", "1.5", "--in", "a.tsv", "--out", "o.tsv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_length_mismatch_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("gold.tsv"), "a\tx\tOFF\nb\ty\tNOT\n").unwrap();
    fs::write(dir.path().join("pred.tsv"), "a\tx\tOFF\n").unwrap();
    let out = offlens(
        &[
            "evaluate", "--gold", "gold.tsv", "--pred", "pred.tsv", "--labels", "OFF,NOT",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("LengthMismatch"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn strict_duplicate_id_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.tsv"), "t1\tx\t0.5\nt1\ty\t0.6\n").unwrap();
    let out = offlens(
        &["label", "--task", "A", "--in", "a.tsv", "--out", "o.tsv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("duplicate id"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn lenient_mode_skips_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("a.tsv"),
        "t1\tx\t0.9\nbroken line\nt2\ty\t0.1\n",
    )
    .unwrap();
    let out = offlens(
        &[
            "label",
            "--task",
            "A",
            "--lenient",
            "--in",
            "a.tsv",
            "--out",
            "o.tsv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "OFF\t1\nNOT\t1\nexcluded\t0\n");
    assert!(stderr(&out).contains("skipped 1 of 3 lines"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.tsv"), "t1\tx\t0.5\nt2\ty\t0.85\n").unwrap();
    fs::write(
        dir.path().join("offlens.conf"),
        "task = A\ncutoff.a = 0.5\n",
    )
    .unwrap();

    // Config cutoff 0.5 labels both records OFF.
    let out = offlens(
        &[
            "label",
            "--config",
            "offlens.conf",
            "--in",
            "a.tsv",
            "--out",
            "o.tsv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out), "OFF\t2\nNOT\t0\nexcluded\t0\n");

    // An explicit flag overrides the config value.
    let out = offlens(
        &[
            "label",
            "--config",
            "offlens.conf",
            "--cutoff",
            "0.8",
            "--in",
            "a.tsv",
            "--out",
            "o.tsv",
        ],
        dir.path(),
    );
    assert_eq!(stdout(&out), "OFF\t1\nNOT\t1\nexcluded\t0\n");

    // Unknown config keys are usage errors.
    fs::write(dir.path().join("bad.conf"), "nonsense = 1\n").unwrap();
    let out = offlens(
        &[
            "label", "--config", "bad.conf", "--task", "A", "--in", "a.tsv", "--out", "o.tsv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_comes_from_the_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.tsv"), "t1\tx\t0.5\n").unwrap();
    fs::write(dir.path().join("env.conf"), "task = A\ncutoff.a = 0.4\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_offlens"))
        .args(["label", "--in", "a.tsv", "--out", "o.tsv"])
        .current_dir(dir.path())
        .env("OFFLENS_CONFIG", dir.path().join("env.conf"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out), "OFF\t1\nNOT\t0\nexcluded\t0\n");
}

#[test]
fn missing_required_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = offlens(&["label", "--task", "A", "--out", "o.tsv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--in"));
}

#[test]
fn evaluate_prints_the_full_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("gold.tsv"),
        "a\tx\tOFF\nb\ty\tNOT\nc\tz\tOFF\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("pred.tsv"),
        "a\tx\tOFF\nb\ty\tNOT\nc\tz\tNOT\n",
    )
    .unwrap();
    let out = offlens(
        &[
            "evaluate", "--gold", "gold.tsv", "--pred", "pred.tsv", "--labels", "OFF,NOT",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("\tOFF\tNOT\t\tP\tR\tF1"));
    assert!(text.contains("accuracy = .667, majority classifier = .667"));
    // Both per-class F1 values are 2*1/3, so the macro average is 2/3.
    assert!(text.contains("macro-F1 = .66667"));
}

#[test]
fn synth_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["one", "two"] {
        let out = offlens(
            &[
                "synth",
                "--task",
                "A",
                "--docs",
                "1000",
                "--marked",
                "0.1",
                "--seed",
                "7",
                "--out-dir",
                sub,
            ],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for file in ["scored.tsv", "gold.tsv"] {
        let a = fs::read(dir.path().join("one").join(file)).unwrap();
        let b = fs::read(dir.path().join("two").join(file)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{file} differs between identical synth runs");
    }
}

#[test]
fn audit_reports_no_discrepancies_on_consistent_tables() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("counts.tsv"), "OFF\tNOT\n9\t1\n1\t9\n").unwrap();
    fs::write(
        dir.path().join("pub.tsv"),
        "OFF\t.900\t.900\t.900\naccuracy\t.900\n",
    )
    .unwrap();
    let out = offlens(
        &["audit", "--counts", "counts.tsv", "--published", "pub.tsv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("no discrepancies"));
}
