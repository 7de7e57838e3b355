//! End-to-end checks of the `logdetective` binary: subcommands, exit codes,
//! and byte-for-byte determinism of the emitted CSV files.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_logdetective"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("logdetective_cli_{tag}_{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

const RUN_CONFIG: &str = r#"{
  "matrix": {"family": "geom", "n": 150, "mu": 0.01},
  "strategies": [
    {"name": "one_sample", "ell_grid": [10, 16], "m": 4},
    {"name": "logdetective", "ell_grid": [16], "m": 4, "beta": 0.75},
    {"name": "plain_slq", "ell_grid": [16], "m": 4}
  ],
  "trials": 5,
  "base_seed": 31,
  "emit_bounds": true,
  "bounds": {"total_grid": [20, 30], "m": 4}
}"#;

#[test]
fn run_subcommand_writes_deterministic_outputs() {
    let dir = workdir("run");
    let config_path = dir.join("config.json");
    fs::write(&config_path, RUN_CONFIG).unwrap();
    let out_path = dir.join("records.csv");

    let mut first_bytes = Vec::new();
    for round in 0..2 {
        let status = bin()
            .args(["run", "--config"])
            .arg(&config_path)
            .arg("--out")
            .arg(&out_path)
            .args(["--threads", "2"])
            .status()
            .unwrap();
        assert!(status.success(), "run exited with {status:?}");
        let records = fs::read(&out_path).unwrap();
        let summary = fs::read(dir.join("records.summary.csv")).unwrap();
        let bounds = fs::read(dir.join("records.bounds.csv")).unwrap();
        assert!(records.starts_with(b"matrix_id,n,strategy"));
        assert!(summary.starts_with(b"strategy,ell"));
        assert!(bounds.starts_with(b"matrix_id,n,total"));
        // 3 strategies x their grids x 5 trials = (2 + 1 + 1) * 5 rows.
        let rows = records.iter().filter(|&&b| b == b'\n').count() - 1;
        assert_eq!(rows, 20);
        if round == 0 {
            first_bytes = records;
        } else {
            assert_eq!(first_bytes, records, "re-run changed the records bytes");
        }
    }
    // The oracle cache sidecar appeared next to the records.
    assert!(dir.join("records.oracle.json").exists());
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn bounds_and_exact_subcommands_work() {
    let dir = workdir("bounds");
    let config_path = dir.join("config.json");
    fs::write(&config_path, RUN_CONFIG).unwrap();
    let out_path = dir.join("curves.csv");
    let status = bin()
        .args(["bounds", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&out_path)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&out_path).unwrap();
    // 2 totals x 2 kinds + header.
    assert_eq!(text.lines().count(), 5);

    let output = bin()
        .args(["exact", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(output.status.success());
    let printed: f64 = String::from_utf8(output.stdout)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    // Exact value for geom n=150, mu=0.01 from the analytic spectrum.
    let expect: f64 = (1..=150)
        .map(|i| ((-0.1 * i as f64).exp() / 0.01).ln_1p())
        .sum();
    assert!((printed - expect).abs() <= 1e-10 * expect);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = workdir("badcfg");
    let config_path = dir.join("bad.json");
    fs::write(&config_path, "{ not json").unwrap();
    let status = bin()
        .args(["run", "--config"])
        .arg(&config_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Structurally valid JSON, semantically invalid (empty grid).
    fs::write(
        &config_path,
        r#"{"matrix": {"family": "geom", "n": 10, "mu": 0.01},
            "strategies": [{"name": "one_sample", "ell_grid": [], "m": 2}],
            "trials": 1, "base_seed": 1}"#,
    )
    .unwrap();
    let status = bin()
        .args(["run", "--config"])
        .arg(&config_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Missing bounds section for the bounds subcommand.
    fs::write(
        &config_path,
        r#"{"matrix": {"family": "geom", "n": 10, "mu": 0.01},
            "trials": 1, "base_seed": 1}"#,
    )
    .unwrap();
    let status = bin()
        .args(["bounds", "--config"])
        .arg(&config_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    fs::remove_dir_all(&dir).ok();
}
