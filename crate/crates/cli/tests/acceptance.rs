//! Runs every acceptance criterion through the `exmip acceptance` command and
//! prints its PASS/FAIL lines.

use std::io::Write;
use std::path::PathBuf;
use std::process::Command;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn acceptance() {
    let out = Command::new(env!("CARGO_BIN_EXE_exmip"))
        .arg("acceptance")
        .arg("--fixtures")
        .arg(fixtures())
        .output()
        .expect("exmip runs");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let stderr = String::from_utf8_lossy(&out.stderr);
    // Written past the test harness capture so the verdicts always show.
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err);
    for line in stdout.lines().chain(stderr.lines()) {
        let _ = writeln!(err, "{line}");
    }
    drop(err);
    let lines: Vec<&str> = stdout
        .lines()
        .filter(|l| l.starts_with("PASS ") || l.starts_with("FAIL "))
        .collect();
    let names = [
        "iis-validity",
        "connectivity",
        "query-membership",
        "trichotomy",
        "smallest-iis",
        "solver-oracle",
        "bench-protocol",
        "running-example",
        "cli",
    ];
    for name in names {
        assert!(
            lines
                .iter()
                .any(|l| l[5..].starts_with(&format!("{name}:"))),
            "no verdict for {name}"
        );
    }
    let failed: Vec<&&str> = lines.iter().filter(|l| l.starts_with("FAIL")).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:#?}");
    assert!(out.status.success());
}
