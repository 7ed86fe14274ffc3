use std::path::PathBuf;
use std::process::{Command, Output};

fn pint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pint"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn run_prints_a_record() {
    let out = pint(&["run", "--t-end", "1.6", "--ranks", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("solver=dahlquist\n"));
    assert!(text.contains("intervals=16\n"));
    assert!(text.contains("ranks=4\n"));
}

#[test]
fn flags_override_the_config_file() {
    let out = pint(&[
        "run",
        "--config",
        &config("rswe_desk.toml"),
        "--t-end",
        "0.4",
        "--resolution",
        "8",
        "--ranks",
        "2",
        "--scheduler",
        "conc",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("resolution=8\n"));
    assert!(text.contains("scheduler=conc\n"));
    assert!(text.contains("wallclock_secs="));
}

#[test]
fn configuration_errors_exit_with_2() {
    for args in [
        &["run", "--ranks", "0"][..],
        &["run", "--dt-coarse", "0.3", "--t-end", "1"],
        &["run", "--norm", "l3"],
        &[
            "run",
            "--solver",
            "rswe",
            "--dt-fine",
            "0.003",
            "--t-end",
            "0.3",
        ],
        &["run", "--config", "/nonexistent/run.toml"],
    ] {
        let out = pint(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn metrics_and_trace_files() {
    let dir = std::env::temp_dir().join(format!("pint-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let metrics = dir.join("m.txt");
    let trace = dir.join("t.csv");
    let out = pint(&[
        "run",
        "--t-end",
        "0.8",
        "--ranks",
        "2",
        "--seed",
        "5",
        "--metrics-out",
        metrics.to_str().unwrap(),
        "--trace-out",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        std::fs::read_to_string(&metrics).unwrap(),
        String::from_utf8(out.stdout).unwrap()
    );
    assert!(std::fs::read_to_string(&trace).unwrap().lines().count() > 0);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn verify_passes() {
    let out = pint(&["verify", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}

#[test]
fn sweep_reports_failures_per_row() {
    let dir = std::env::temp_dir().join(format!("pint-sweep-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("sweep.toml");
    std::fs::write(
        &path,
        "ranks = [0, 2]\n[base]\nsolver = \"dahlquist\"\nt_end = 0.8\n",
    )
    .unwrap();
    let out = pint(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("dahlquist,-,0,"));
    assert!(rows[2].starts_with("dahlquist,-,2,8,"));
    assert!(!out.stderr.is_empty());
    std::fs::remove_dir_all(&dir).unwrap();
}
