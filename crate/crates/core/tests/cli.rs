use std::path::Path;
use std::process::{Command, Output};

use ciag::io::{read_trace_csv, TRACE_HEADER};

fn ciag(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ciag"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn run_writes_trace_and_converges() {
    let dir = tempfile::tempdir().unwrap();
    let out = ciag(&["run", "--dataset", "synthetic:8:40:3", "--out", "t.csv"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), TRACE_HEADER.join(","));
    let rows = read_trace_csv(dir.path().join("t.csv")).unwrap();
    assert!(rows.last().unwrap().grad_norm <= 1e-10);
    assert!(String::from_utf8_lossy(&out.stdout).contains("ciag: grad-tol"));
}

#[test]
fn untimed_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = ciag(
            &["run", "--dataset", "synthetic:6:30:1", "--method", "ig", "--max-passes", "20", "--no-timing", "--out", name],
            dir.path(),
        );
        assert_eq!(code(&out), 3);
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn budget_and_divergence_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let capped = ciag(
        &["run", "--dataset", "synthetic:8:40:3", "--max-passes", "1", "--out", "c.csv", "--no-reference"],
        dir.path(),
    );
    assert_eq!(code(&capped), 3);
    let diverged = ciag(
        &["run", "--dataset", "synthetic:8:40:3", "--step", "const-frac:50", "--out", "d.csv", "--no-reference"],
        dir.path(),
    );
    assert_eq!(code(&diverged), 2);
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "# small run\nmethod = fg\ndataset = synthetic:5:20:7\nmax_passes = 500\nout = from_file.csv\n",
    )
    .unwrap();
    let out = ciag(&["run", "--config", "run.cfg", "--method", "ciag"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ciag:"));
    assert!(dir.path().join("from_file.csv").exists());

    std::fs::write(dir.path().join("bad.cfg"), "stepsize = 1\n").unwrap();
    let bad = ciag(&["run", "--config", "bad.cfg"], dir.path());
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("stepsize"));
}

#[test]
fn libsvm_dataset_with_one_two_labels() {
    let dir = tempfile::tempdir().unwrap();
    let data = "1 1:0.5 3:1\n2 2:1 3:-0.5\n1 1:-0.25 2:0.75\n2 1:1\n";
    std::fs::write(dir.path().join("toy.svm"), data).unwrap();
    let out = ciag(
        &["run", "--dataset", "libsvm:toy.svm", "--label-map", "auto", "--append-bias", "--out", "toy.csv"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = ciag(&["run", "--dataset", "libsvm:toy.svm", "--label-map", "bogus", "--out", "toy.csv"], dir.path());
    assert_eq!(code(&out), 1);
    std::fs::write(dir.path().join("broken.svm"), "1 3:1 2:1\n").unwrap();
    let out = ciag(&["run", "--dataset", "libsvm:broken.svm", "--out", "b.csv"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.svm:1:"));
}

#[test]
fn compare_writes_summary_and_checks_orderings() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "compare",
        "--dataset",
        "synthetic:10:100:4",
        "--methods",
        "ciag,iag,ig",
        "--max-passes",
        "300",
        "--out",
        "res",
        "--assert",
        "ciag<iag",
        "--assert",
        "ciag<ig",
    ];
    let out = ciag(&args, dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let res = dir.path().join("res");
    for f in ["0_ciag.csv", "1_iag.csv", "2_ig.csv", "summary.csv", "summary.txt"] {
        assert!(res.join(f).exists(), "{f}");
    }
    let summary = std::fs::read_to_string(res.join("summary.csv")).unwrap();
    assert!(summary.starts_with("method,passes_to_tol,wall_s,final_grad_norm,stop_reason\nciag,"));

    let failing = ciag(
        &["compare", "--dataset", "synthetic:10:100:4", "--max-passes", "50", "--out", "res2", "--assert", "ig<ciag"],
        dir.path(),
    );
    assert_eq!(code(&failing), 4);
}

#[test]
fn verify_theory_passes_and_detects_inflated_constants() {
    let dir = tempfile::tempdir().unwrap();
    let ok = ciag(&["verify-theory", "--seed", "3"], dir.path());
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    assert!(!String::from_utf8_lossy(&ok.stdout).contains("FAIL"));
    let bad = ciag(&["verify-theory", "--seed", "3", "--inflate-q", "100"], dir.path());
    assert_eq!(code(&bad), 5);
}

#[test]
fn unknown_subcommand_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ciag(&["solve"], dir.path())), 1);
}

#[test]
fn documented_run_examples() {
    let dir = tempfile::tempdir().unwrap();
    let ciag_run = ciag(
        &[
            "run", "--method", "ciag", "--dataset", "synthetic:51:1000:7", "--step", "const-frac:1", "--grad-tol", "1e-10",
            "--out", "ciag.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&ciag_run), 0, "{}", String::from_utf8_lossy(&ciag_run.stdout));
    assert!(dir.path().join("ciag.csv").exists());
    let ig_run = ciag(
        &[
            "run", "--method", "ig", "--dataset", "synthetic:51:1000:7", "--step", "vanishing", "--max-passes", "100",
            "--out", "ig.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&ig_run), 3);
}

#[test]
fn repeated_method_gives_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = ciag(
        &["compare", "--dataset", "synthetic:6:30:2", "--methods", "ciag,ciag", "--no-timing", "--out", "r"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let summary = std::fs::read_to_string(dir.path().join("r/summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], rows[1]);
    let a = std::fs::read(dir.path().join("r/0_ciag.csv")).unwrap();
    let b = std::fs::read(dir.path().join("r/1_ciag.csv")).unwrap();
    assert_eq!(a, b);
}
