use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corrtwirl"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn golden(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(p).unwrap()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_to(dir: &Path, tag: &str, args: &[&str]) -> (String, String) {
    let prefix = dir.join(tag);
    let mut all: Vec<&str> = args.to_vec();
    let p = prefix.to_str().unwrap().to_string();
    all.extend(["--out", &p]);
    let out = run(&all);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (
        std::fs::read_to_string(format!("{p}.report")).unwrap(),
        std::fs::read_to_string(format!("{p}.csv")).unwrap(),
    )
}

#[test]
fn exact_runs_match_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["cnot_exact", "dephasing"] {
        let cfg = data(&format!("{name}.cfg"));
        let (report, csv) = run_to(dir.path(), name, &["run", "--config", cfg.to_str().unwrap()]);
        assert_eq!(report, golden(&format!("{name}.report")), "{name}.report");
        assert_eq!(csv, golden(&format!("{name}.csv")), "{name}.csv");
    }
    assert!(golden("cnot_exact.csv").contains("\ncnot,1-2,0.555555555556,0,0.25,0,0.25,0\n"));
}

#[test]
fn sampled_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data("c12_sampled.cfg");
    let cfg = cfg.to_str().unwrap();
    let first = run_to(dir.path(), "a", &["run", "--config", cfg]);
    assert_eq!(first, run_to(dir.path(), "b", &["run", "--config", cfg]));
    assert_eq!(first, run_to(dir.path(), "c", &["--threads", "1", "run", "--config", cfg]));
    assert_eq!(first, run_to(dir.path(), "d", &["--threads", "4", "run", "--config", cfg]));
    assert!(first.0.contains("n_realizations = 738"));
    let other = run_to(dir.path(), "e", &["run", "--config", cfg, "--seed", "2025"]);
    assert_ne!(first.1, other.1);
}

#[test]
fn overrides_apply_on_top_of_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data("cnot_exact.cfg");
    let (_, csv) = run_to(
        dir.path(),
        "c12",
        &["run", "--config", cfg.to_str().unwrap(), "--gate", "c12(0.1)", "--targets", "1-2", "--set", "eps0=0"],
    );
    let row: Vec<String> = csv.lines().nth(1).unwrap().split(',').map(String::from).collect();
    assert_eq!(row[0], "c12(0.1)");
    let eta: f64 = row[4].parse().unwrap();
    assert!((eta - 0.1f64.sin().powi(2)).abs() < 1e-9);
}

#[test]
fn report_goes_to_stdout_without_out() {
    let out = run(&["run", "--gate", "cnot2", "--targets", "1-2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[subset 1-2]") && text.contains("eta_col = 0\n"));
    assert!(String::from_utf8(out.stderr).unwrap().contains("runtime:"));
}

#[test]
fn config_errors_exit_with_one() {
    let cases: [&[&str]; 6] = [
        &["run", "--gate", "swap"],
        &["run", "--gate", "cnot", "--targets", "1-9"],
        &["run", "--gate", "cnot", "--mode", "sampled", "--n-realizations", "100"],
        &["run", "--config", "/nonexistent/file.cfg"],
        &["run", "--set", "bogus=1"],
        &["run", "--no-such-flag"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn sample_size_subcommand() {
    let out = run(&["sample-size", "--delta", "0.01", "--epsilon", "0.05", "--qubits", "4", "--weight", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("n_realizations = 18445\n"));
    assert!(text.contains("dominant_bound = chernoff\n"));
    assert!(text.contains("protocol_experiments = 110670\n"));
    assert!(text.contains(&format!("tomography_experiments = {}\n", 18445u64 * 65536)));
    assert_eq!(run(&["sample-size", "--delta", "0", "--epsilon", "0.05"]).status.code(), Some(1));
}

#[test]
fn chi_subcommand() {
    let out = run(&["chi", "--gate", "cnot", "--set", "n=2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let value = |key: &str| -> f64 {
        text.lines().find_map(|l| l.strip_prefix(&format!("{key} = "))).unwrap().parse().unwrap()
    };
    for key in ["identity", "1", "2", "1,2"] {
        assert!((value(key) - 0.25).abs() < 1e-12, "{key}");
    }
}
