use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_eosi");

fn eosi(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SHORT_RUN: &str =
    "[source]\npump_chirp_fs2 = -2.0e4\n\n[acquisition]\nduration_s = 1200.0\nseed = 11\n";

fn simulate(dir: &Path, name: &str) -> String {
    let config = write_config(dir, SHORT_RUN);
    let out = dir.join(name);
    ok(&eosi(&[
        "simulate",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]));
    out.to_str().unwrap().to_string()
}

#[test]
fn simulate_reconstruct_analyze_report() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulate(tmp.path(), "sim");
    let sim_dir = Path::new(&sim);
    for file in [
        "config.toml",
        "state.json",
        "events_signal.bin",
        "events_idler.bin",
    ] {
        assert!(sim_dir.join(file).is_file(), "{file} missing");
    }

    let rec = tmp.path().join("rec");
    let stdout = ok(&eosi(&[
        "reconstruct",
        "--events",
        sim_dir.join("events_signal.bin").to_str().unwrap(),
        "--events-swapped",
        sim_dir.join("events_idler.bin").to_str().unwrap(),
        "--out",
        rec.to_str().unwrap(),
    ]));
    assert!(stdout.contains("k_full = "), "{stdout}");
    for file in [
        "result.json",
        "fit_summary.txt",
        "jsi.tsv",
        "phase_xyz.tsv",
        "schmidt.tsv",
        "analysis.txt",
    ] {
        assert!(rec.join(file).is_file(), "{file} missing");
    }
    assert!(rec.join("interferogram_signal-in-eosi.tsv").is_file());

    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(rec.join("result.json")).unwrap()).unwrap();
    assert!(result.is_object());

    let summary = std::fs::read_to_string(rec.join("fit_summary.txt")).unwrap();
    let phi11_line = summary
        .lines()
        .find(|l| l.starts_with("phi11_fs2 = "))
        .expect("phi11 line");
    let value: f64 = phi11_line["phi11_fs2 = ".len()..]
        .split(" +- ")
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(value.is_finite());

    let stdout = ok(&eosi(&["analyze", "--state", &sim]));
    assert!(stdout.contains("lambda_1 = "), "{stdout}");
    let schmidt = std::fs::read_to_string(sim_dir.join("schmidt.tsv")).unwrap();
    assert_eq!(schmidt.lines().count(), 21);
    assert!(sim_dir.join("view_joint-temporal.tsv").is_file());

    std::fs::remove_file(rec.join("jsi.tsv")).unwrap();
    let stdout = ok(&eosi(&["report", "--in", rec.to_str().unwrap()]));
    assert!(stdout.contains("fit_degree = quadratic"), "{stdout}");
    assert!(rec.join("jsi.tsv").is_file());
}

#[test]
fn simulation_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = simulate(tmp.path(), "a");
    let b = simulate(tmp.path(), "b");
    for file in ["events_signal.bin", "events_idler.bin", "state.json"] {
        let x = std::fs::read(Path::new(&a).join(file)).unwrap();
        let y = std::fs::read(Path::new(&b).join(file)).unwrap();
        assert!(x == y, "{file} differs between identical runs");
    }
}

#[test]
fn seed_override_changes_the_events() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SHORT_RUN);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&eosi(&[
        "simulate",
        "--config",
        &config,
        "--out",
        a.to_str().unwrap(),
    ]));
    ok(&eosi(&[
        "simulate",
        "--config",
        &config,
        "--out",
        b.to_str().unwrap(),
        "--seed",
        "12",
    ]));
    let x = std::fs::read(a.join("events_signal.bin")).unwrap();
    let y = std::fs::read(b.join("events_signal.bin")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn invalid_config_names_the_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "[acquisition]\ncontrast_threshold = 1.5\n");
    let out = eosi(&[
        "simulate",
        "--config",
        &config,
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("acquisition-invalid"),
        "{}",
        stderr(&out)
    );

    let config = write_config(tmp.path(), "[source]\nbogus = 1\n");
    let out = eosi(&[
        "simulate",
        "--config",
        &config,
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("config-parse"), "{}", stderr(&out));

    let missing = tmp.path().join("missing.toml");
    let out = eosi(&[
        "simulate",
        "--config",
        missing.to_str().unwrap(),
        "--out",
        "unused",
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("config-readable"), "{}", stderr(&out));
}

#[test]
fn corrupted_event_log_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulate(tmp.path(), "sim");
    let log = Path::new(&sim).join("events_signal.bin");
    let bytes = std::fs::read(&log).unwrap();
    std::fs::write(&log, &bytes[..bytes.len() - 5]).unwrap();
    let out = eosi(&[
        "reconstruct",
        "--events",
        log.to_str().unwrap(),
        "--events-swapped",
        Path::new(&sim).join("events_idler.bin").to_str().unwrap(),
        "--out",
        tmp.path().join("rec").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("eventlog-truncated"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn report_without_result_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = eosi(&["report", "--in", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("input-missing"), "{}", stderr(&out));
}
