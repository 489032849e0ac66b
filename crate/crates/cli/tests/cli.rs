//! Black-box tests of the `vcam` binary: round trips, config precedence,
//! unknown-key rejection and report determinism.

use std::path::Path;
use std::process::Command;

fn vcam() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vcam"))
}

fn ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn vcam");
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn simulate_fit_identify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let fit = dir.path().join("fit.txt");
    let report = dir.path().join("id.txt");

    ok(vcam()
        .args(["simulate", "--example", "ex1", "--t", "200", "--seed", "11"])
        .arg("--out")
        .arg(&data));
    let csv = read(&data);
    assert!(csv.starts_with("t,y,x1,x2\n"));
    assert_eq!(csv.lines().count(), 201);

    ok(vcam()
        .args(["fit", "--i", "25", "--k", "3"])
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&fit));
    assert!(read(&fit).starts_with("vcam-fit v1\n"));

    ok(vcam()
        .arg("identify")
        .arg("--data")
        .arg(&data)
        .arg("--fit")
        .arg(&fit)
        .arg("--out")
        .arg(&report));
    let text = read(&report);
    assert!(text.starts_with("vcam-identify v1\n"));
    assert!(text.contains("lambda "));

    let grids = dir.path().join("grids");
    ok(vcam()
        .arg("grids")
        .arg("--fit")
        .arg(&fit)
        .arg("--out-dir")
        .arg(&grids)
        .args(["--points", "11"]));
    for name in ["alpha0.csv", "alpha1.csv", "alpha2.csv", "beta1.csv", "beta2.csv"] {
        let g = read(&grids.join(name));
        assert!(g.starts_with("x,value\n"));
        assert_eq!(g.lines().count(), 12, "{name}");
    }
}

#[test]
fn dataset_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    ok(vcam()
        .args(["simulate", "--example", "ex2", "--t", "150", "--seed", "4"])
        .arg("--out")
        .arg(&first));
    ok(vcam()
        .args(["simulate", "--example", "ex2", "--t", "150", "--seed", "4"])
        .arg("--out")
        .arg(&second));
    assert_eq!(read(&first), read(&second));
}

#[test]
fn unknown_flag_and_unknown_key_are_rejected() {
    let out = vcam()
        .args(["mc", "--example", "ex1", "--knotz", "4"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("knotz"));

    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "example = ex1\nknotz = 4\n").unwrap();
    let out = vcam()
        .args(["mc", "--t", "100", "--q", "1"])
        .arg("--config")
        .arg(&conf)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("knotz"));
}

#[test]
fn flag_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("mc.conf");
    std::fs::write(&conf, "example = ex1\nt = 600\nq = 2\nseed = 5\n").unwrap();
    let csv = dir.path().join("r.csv");
    ok(vcam()
        .args(["mc", "--t", "100"])
        .arg("--config")
        .arg(&conf)
        .arg("--out-csv")
        .arg(&csv)
        .arg("--out-table")
        .arg(dir.path().join("t.txt")));
    assert!(read(&csv).contains("meta,t,,100,"));
}

#[test]
fn mc_reports_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| {
        let csv = dir.path().join(name);
        ok(vcam()
            .args(["mc", "--example", "ex2", "--t", "120", "--q", "3", "--seed", "9"])
            .args(["--threads", threads])
            .arg("--out-csv")
            .arg(&csv)
            .arg("--out-table")
            .arg(dir.path().join(format!("{name}.table"))));
        read(&csv)
    };
    assert_eq!(run("1", "one.csv"), run("4", "four.csv"));
}
