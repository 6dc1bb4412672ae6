//! End-to-end checks of the `geostab` binary.

use std::process::Command;

use geostab::cli::read_rows;
use geostab::experiments::format_float;

fn geostab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geostab"))
}

fn figure(threads: Option<&str>, path: &std::path::Path) -> std::process::Output {
    let mut cmd = geostab();
    cmd.args(["figure", "--example", "s3", "--epsilon", "0.5,2", "--grid", "0.2:1.4:6", "--theta0", "1.1"]);
    cmd.arg("--output").arg(path);
    if let Some(t) = threads {
        cmd.env("GEOSTAB_THREADS", t);
    }
    cmd.output().unwrap()
}

#[test]
fn figure_output_is_byte_identical_across_runs_and_thread_counts() {
    let dir = std::env::temp_dir().join(format!("geostab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let paths: Vec<_> = (0..3).map(|i| dir.join(format!("run{i}.csv"))).collect();
    for (p, t) in paths.iter().zip([None, Some("1"), Some("3")]) {
        let out = figure(t, p);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let bytes: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[0], bytes[2]);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn csv_round_trips_printed_values() {
    let out = geostab()
        .args(["figure", "--example", "s2", "--epsilon", "1", "--grid", "0.1:1.47:5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = read_rows(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 5);
    for (line, row) in text.lines().skip(1).zip(&rows) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], row.example);
        assert_eq!(fields[1], format_float(row.epsilon));
        assert_eq!(fields[2], format_float(row.base1));
        assert_eq!(fields[3], "");
        assert_eq!(fields[4], format_float(row.h_numeric));
        assert_eq!(fields[5], format_float(row.h_theory));
        assert_eq!(fields[6], format_float(row.kappa_at_h));
        assert_eq!(fields[7], row.binding.as_str());
        assert!(row.h_theory <= row.h_numeric + 1e-9);
    }
}

#[test]
fn bound_command_examples() {
    let out = geostab().args(["bound", "--example", "euclid", "--alpha", "1"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let h = text.lines().find(|l| l.starts_with("h_theory")).unwrap();
    let value: f64 = h.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert_eq!(value, 2.0);

    let out = geostab().args(["bound", "--example", "h2-singular"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("h_theory    unconditional"));
}

#[test]
fn exit_codes() {
    let usage = geostab().args(["figure", "--example", "s2", "--grid", "0:1"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
    let threads = geostab()
        .args(["figure", "--example", "h2", "--epsilon", "1", "--grid", "1:1:1"])
        .env("GEOSTAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
    let validate = geostab().args(["validate", "--example", "h2", "--n-cases", "20"]).output().unwrap();
    assert_eq!(validate.status.code(), Some(0));
    let stationary = geostab().args(["search", "--example", "euclid", "--point", "0,0"]).output().unwrap();
    assert_eq!(stationary.status.code(), Some(1));
}
