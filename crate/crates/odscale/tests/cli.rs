use std::fs;
use std::process::Command;

fn odscale() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_odscale"));
    c.env("RUST_LOG", "off");
    c
}

#[test]
fn generate_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net");
    for (h, seed) in [("13", "1"), ("14", "2")] {
        let st = odscale()
            .args([
                "generate", "--seed", seed, "--true-x", "6", "--hour", h, "--out",
            ])
            .arg(net.join(h))
            .status()
            .unwrap();
        assert!(st.success());
    }
    let out = dir.path().join("out");
    let st = odscale()
        .args(["compare", "--grid-points", "200", "--network-dir"])
        .arg(&net)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let table = fs::read_to_string(out.join("compare.txt")).unwrap();
    assert!(table.starts_with("hour"));
    assert_eq!(table.lines().filter(|l| l.starts_with("1")).count(), 2);

    let st = odscale()
        .args(["estimate", "--hour", "14", "--network-dir"])
        .arg(&net)
        .arg("--out")
        .arg(dir.path().join("one"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let est = fs::read_to_string(dir.path().join("one/estimates.csv")).unwrap();
    assert_eq!(est.lines().count(), 2);
}

#[test]
fn bundle_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let st = odscale()
        .args(["estimate", "--hour", "missing", "--network-dir"])
        .arg(dir.path())
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(1));
}

#[test]
fn usage_error_exits_with_two() {
    let st = odscale().args(["estimate", "--bogus"]).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let st = odscale().args(["fly"]).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let st = odscale()
        .args(["compare", "--network-dir", ".", "--grid-points", "0"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn empty_network_dir_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = odscale()
        .env("RUST_LOG", "warn")
        .args(["compare", "--network-dir"])
        .arg(dir.path())
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no scenario bundles"));
}

#[test]
fn infeasible_generate_fails() {
    let dir = tempfile::tempdir().unwrap();
    let st = odscale()
        .args([
            "generate",
            "--segments",
            "10",
            "--path-len-min",
            "50",
            "--path-len-max",
            "60",
            "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(1));
}
