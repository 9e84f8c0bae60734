use std::fs;
use std::process::Command;

fn cellfree() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cellfree"));
    cmd.env("RUST_LOG", "error");
    cmd
}

const SMALL: &str = r#"
seed = 5
setups = 2
blocks = 100
schemes = ["mmse-dist-mm", "mr-cent-ln-epa"]

[scenario]
num_aps = 8
num_users = 4
antennas_per_ap = 2
cluster_size = 3
pilot_length = 2
radius_m = 300.0
"#;

#[test]
fn small_config_runs_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plan.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let status = cellfree().arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let stdout = String::from_utf8(status.stdout).unwrap();
    assert!(stdout.contains("mmse-dist-mm"));
    for name in ["mmse-dist-mm.csv", "mr-cent-ln-epa.json", "summary.tsv", "metadata.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plan.toml");
    fs::write(&cfg, "setups = \"many\"\n").unwrap();
    let status = cellfree().arg("--config").arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(1));

    let status = cellfree().args(["--schemes", "mmse-dist-ps-mm", "--out"]).arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(1));
    let status = cellfree().args(["--blocks", "5", "--out"]).arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn print_config_reflects_overrides() {
    let out = cellfree().args(["--print-config", "--seed", "77", "--schemes", "zf,mr-dist-epa"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("seed = 77"));
    assert!(text.contains("\"mr-dist-epa\""));
    assert!(text.contains("[scenario]"));
}

#[test]
fn run_failing_on_every_setup_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plan.toml");
    fs::write(&cfg, SMALL.replace("antennas_per_ap = 2", "antennas_per_ap = 1").replace(
        "schemes = [\"mmse-dist-mm\", \"mr-cent-ln-epa\"]",
        "schemes = [\"zf-dist-epa\"]",
    ))
    .unwrap();
    let status = cellfree().arg("--config").arg(&cfg).arg("--out").arg(dir.path().join("o")).status().unwrap();
    assert_eq!(status.code(), Some(2));
}
