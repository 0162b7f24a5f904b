//! End-to-end tests of the `saw` binary: exit codes, flag overrides, and
//! the SVG side effect.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../example")
        .join(name)
}

fn saw(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saw"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to launch saw")
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("saw_cli_{tag}_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn safe_model_exits_zero_and_writes_svg() {
    let dir = tempdir("safe");
    let model = corpus("model5.txt");
    let out = saw(&[model.to_str().unwrap(), "--quiet"], &dir);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.ends_with("       Result: safe\n"));
    let svg = dir.join("output.svg");
    assert!(svg.exists(), "default output.svg missing");
    let content = std::fs::read_to_string(svg).unwrap();
    assert!(content.starts_with("<svg"));
}

#[test]
fn unsafe_verdict_exits_one() {
    let dir = tempdir("unsafe");
    let model = corpus("model5.txt");
    // Allowing misses in every period makes the unstable open loop win.
    let out = saw(
        &[model.to_str().unwrap(), "--quiet", "--no-svg", "--m", "5", "--K", "5"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.ends_with("       Result: unsafe\n"));
    assert!(!dir.join("output.svg").exists());
}

#[test]
fn missing_file_exits_two() {
    let dir = tempdir("missing");
    let out = saw(&["does_not_exist.txt"], &dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_model_exits_two() {
    let dir = tempdir("malformed");
    let bad = dir.join("bad.txt");
    std::fs::write(&bad, "2 1\n").unwrap();
    let out = saw(&[bad.to_str().unwrap()], &dir);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 1"), "stderr: {err}");
}

#[test]
fn invalid_override_exits_two() {
    let dir = tempdir("override");
    let model = corpus("model5.txt");
    let out = saw(&[model.to_str().unwrap(), "--m", "9", "--K", "4"], &dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flag_overrides_match_edited_file() {
    let dir = tempdir("flags");
    let with_flags = saw(
        &[
            corpus("model5.txt").to_str().unwrap(),
            "--no-svg",
            "--p",
            "60",
            "--m",
            "0",
            "--K",
            "3",
            "--step-size",
            "0.2",
        ],
        &dir,
    );
    let edited = dir.join("edited.txt");
    std::fs::write(
        &edited,
        "1 1 60\nx u\n0.2 * x + 0.03 * x^2 + u\n-0.3 * x^3\n1.6 0.2\n0 3\n-2 2\n-1.56 1.32\n",
    )
    .unwrap();
    let with_edit = saw(&[edited.to_str().unwrap(), "--no-svg"], &dir);
    assert_eq!(with_flags.status.code(), with_edit.status.code());
    assert_eq!(with_flags.stdout, with_edit.stdout);
}

#[test]
fn unwritable_svg_path_exits_three() {
    let dir = tempdir("badsvg");
    let out = saw(
        &[
            corpus("model5.txt").to_str().unwrap(),
            "--quiet",
            "--svg",
            "no_such_dir/plot.svg",
        ],
        &dir,
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn custom_svg_path() {
    let dir = tempdir("svgpath");
    let out = saw(
        &[
            corpus("model5.txt").to_str().unwrap(),
            "--quiet",
            "--svg",
            "plot.svg",
        ],
        &dir,
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.join("plot.svg").exists());
}
