//! End-to-end tests of the `symq` binary: golden configs, reproducibility,
//! and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn symq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_symq"))
}

fn repo_configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run_ok(config: &Path, out: &Path) -> Output {
    let output = symq()
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn symq");
    assert!(
        output.status.success(),
        "symq run {} failed: {}",
        config.display(),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

/// Every experiment type has a golden config in `configs/`; each must run
/// cleanly and produce header-stamped outputs.
#[test]
fn golden_configs_all_run() {
    let configs = repo_configs();
    let tmp = tempfile::tempdir().unwrap();
    let mut seen = 0;
    let mut entries: Vec<PathBuf> = fs::read_dir(&configs)
        .expect("configs directory exists")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    entries.sort();
    for config in entries {
        let name = config.file_stem().unwrap().to_string_lossy().to_string();
        let out = tmp.path().join(&name);
        run_ok(&config, &out);
        let mut files = 0;
        for entry in fs::read_dir(&out).unwrap() {
            let path = entry.unwrap().path();
            files += 1;
            let text = fs::read_to_string(&path).unwrap();
            if path.extension().is_some_and(|e| e == "csv") {
                assert!(
                    text.starts_with("# symq "),
                    "{} lacks the version header",
                    path.display()
                );
                assert!(
                    text.lines().nth(1).is_some_and(|l| l.starts_with("# config ")),
                    "{} lacks the config header",
                    path.display()
                );
            } else {
                let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
                assert!(doc.get("version").is_some() && doc.get("config").is_some());
            }
        }
        assert!(files > 0, "{name} produced no output files");
        seen += 1;
    }
    // One golden config per experiment kind, plus the stationary-limit and
    // two-time variants.
    assert!(seen >= 11, "expected at least 11 golden configs, found {seen}");
}

const SMALL_MARGINAL: &str = r#"{
  "experiment": "transient-marginal",
  "disciplines": [{"kind": "ps"}, {"kind": "lcfs"}],
  "control": true,
  "service": {"kind": "erlang", "stages": 3, "mean": 1.0},
  "scaling": {"r": 4.0, "beta": 1.0},
  "t": 0.5,
  "replications": 300,
  "seed": 7171,
  "out": "unused"
}"#;

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().to_string(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

/// Same config, same seed: byte-identical outputs, regardless of the
/// worker-thread count.
#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "marginal.json", SMALL_MARGINAL);

    let out1 = tmp.path().join("a");
    let out2 = tmp.path().join("b");
    let out3 = tmp.path().join("c");
    run_ok(&config, &out1);
    run_ok(&config, &out2);
    let output = symq()
        .arg("run")
        .arg(&config)
        .arg("--out")
        .arg(&out3)
        .arg("--threads")
        .arg("1")
        .output()
        .unwrap();
    assert!(output.status.success());

    let a = dir_snapshot(&out1);
    assert_eq!(a, dir_snapshot(&out2), "rerun differs");
    assert_eq!(a, dir_snapshot(&out3), "single-threaded run differs");
}

#[test]
fn thread_env_fallback_matches_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "marginal.json", SMALL_MARGINAL);
    let out1 = tmp.path().join("env");
    let output = symq()
        .arg("run")
        .arg(&config)
        .arg("--out")
        .arg(&out1)
        .env("SYMQ_THREADS", "1")
        .output()
        .unwrap();
    assert!(output.status.success());
    let out2 = tmp.path().join("flag");
    run_ok(&config, &out2);
    assert_eq!(dir_snapshot(&out1), dir_snapshot(&out2));
}

#[test]
fn seed_override_changes_results() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "marginal.json", SMALL_MARGINAL);
    let out1 = tmp.path().join("a");
    let out2 = tmp.path().join("b");
    run_ok(&config, &out1);
    let output = symq()
        .arg("run")
        .arg(&config)
        .arg("--out")
        .arg(&out2)
        .arg("--seed")
        .arg("9999")
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_ne!(dir_snapshot(&out1), dir_snapshot(&out2));
}

#[test]
fn missing_seed_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "noseed.json",
        r#"{"experiment":"stationary","discipline":{"kind":"ps"},
            "service":{"kind":"exponential","mean":1.0},"lambda":0.5}"#,
    );
    let output = symq().arg("run").arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("seed required"));
}

#[test]
fn json_errors_carry_location() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "broken.json",
        "{\n  \"experiment\": \"stationary\",\n  oops\n}",
    );
    let output = symq().arg("run").arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains(":3:"), "no line info in: {err}");
}

#[test]
fn unstable_config_exits_2_naming_rho() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "unstable.json",
        r#"{"experiment":"stationary","discipline":{"kind":"ps"},
            "service":{"kind":"exponential","mean":2.0},"lambda":0.6,"seed":1}"#,
    );
    let output = symq().arg("run").arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("rho"));
}

#[test]
fn validate_accepts_good_configs() {
    let output = symq()
        .arg("validate")
        .arg(repo_configs().join("stationary.json"))
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_eq!(String::from_utf8_lossy(&output.stdout).trim(), "ok");
}

#[test]
fn validate_locates_table_defects() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "table.json",
        r#"{"experiment":"stationary",
            "discipline":{"kind":"table","rows":[[1.0],[-1.0,2.0]]},
            "service":{"kind":"exponential","mean":1.0},"lambda":0.5,"seed":1}"#,
    );
    let output = symq().arg("validate").arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("n=2, i=1"), "defect not located: {err}");
}

#[test]
fn validate_rejects_heavy_tail_alpha_out_of_range() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "alpha.json",
        r#"{"experiment":"heavy-tail-scale","discipline":{"kind":"ps"},
            "service":{"kind":"pareto","alpha":2.5,"xmin":1.0},
            "scaling":{"r":10.0,"beta":1.0},"seed":1}"#,
    );
    let output = symq().arg("validate").arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("alpha in (1,2)"));
}

/// The optional event log has the documented four-column schema.
#[test]
fn event_log_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "log.json",
        r#"{"experiment":"diffusion-scale","discipline":{"kind":"ps"},
            "service":{"kind":"exponential","mean":1.0},
            "scaling":{"r":3.0,"beta":1.0},"t":0.5,"grid_step":0.1,
            "replications":1,"event_log":true,"seed":5}"#,
    );
    let out = tmp.path().join("out");
    run_ok(&config, &out);
    let log = fs::read_to_string(out.join("events_r3_rep0.csv")).unwrap();
    let mut lines = log.lines().skip(2);
    assert_eq!(lines.next().unwrap(), "time,event,position,queue_length");
    let first = lines.next().expect("at least one event");
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields.len(), 4);
    assert!(fields[1] == "A" || fields[1] == "D");
}
