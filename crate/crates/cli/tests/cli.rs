use hma_cli::config::{Method, RunConfig};
use hma_cli::run::execute;
use hma_cli::suites::{run_suite, SuiteName, SuiteOptions};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hma(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hma")).args(args).current_dir(cwd).output().expect("spawn hma")
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

const SMALL_DISC: &str = r#"
[domain]
kind = "ball"
n = 1
h = [0.125, 0.0625]

[exact]
a = 1.0

[measure]
kind = "constant"
value = 4.0

[boundary]
kind = "manufactured"

[solver]
method = "fixed_rhs"

[output]
dir = "disc"
"#;

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = hma(&["run", configs().join("malformed.toml").to_str().unwrap(), "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_suite_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = hma(&["suite", "bogus", "--seed", "1", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("x").exists());
}

#[test]
fn energy_suite_rejects_dimension_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = hma(&["suite", "energy", "--seed", "1", "--dim", "1", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("x").exists());
    let cfg = RunConfig::from_toml(&SMALL_DISC.replace("[output]", "[verify]\nsuites = [\"energy\"]\n\n[output]")).unwrap();
    assert_eq!(execute(&cfg).unwrap_err().exit_code(), 2);
}

#[test]
fn run_writes_report_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("disc.toml"), SMALL_DISC).unwrap();
    let o = hma(&["run", "disc.toml"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "timings.json", "slice.csv", "profile.csv", "convergence.csv"] {
        assert!(dir.path().join("disc").join(f).is_file(), "{f}");
    }
    let conv = std::fs::read_to_string(dir.path().join("disc/convergence.csv")).unwrap();
    assert_eq!(conv.lines().next(), Some("h,error,error_over_h,ratio"));
    assert_eq!(conv.lines().count(), 3);
}

#[test]
fn failed_verdict_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_DISC.replace("[output]", "[verify]\nerror_factor = 1e-9\n\n[output]");
    std::fs::write(dir.path().join("strict.toml"), text).unwrap();
    let o = hma(&["run", "strict.toml", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(dir.path().join("o/report.json").is_file());
}

#[test]
fn report_is_reproducible() {
    let cfg = RunConfig::from_toml(SMALL_DISC).unwrap();
    let a = hma_cli::output::to_json(&execute(&cfg).unwrap().report).unwrap();
    let b = hma_cli::output::to_json(&execute(&cfg).unwrap().report).unwrap();
    assert_eq!(a, b);
}

#[test]
fn shipped_configs_parse() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        let res = RunConfig::load(&path);
        if name == "malformed" {
            assert!(res.is_err());
        } else {
            res.unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        seen += 1;
    }
    assert!(seen >= 7);
}

#[test]
fn config_rejects_unknown_keys_and_bad_values() {
    assert!(RunConfig::from_toml(&SMALL_DISC.replace("[solver]", "[solver]\nturbo = true")).is_err());
    assert!(RunConfig::from_toml(&SMALL_DISC.replace("n = 1", "n = 3")).is_err());
    assert!(RunConfig::from_toml(&SMALL_DISC.replace("h = [0.125, 0.0625]", "h = -0.1")).is_err());
    let cfg = RunConfig::from_toml(&SMALL_DISC.replace("fixed_rhs", "picard")).unwrap();
    assert_eq!(cfg.solver.method, Method::Picard);
}

#[test]
fn capacity_suite_is_deterministic() {
    let opts = SuiteOptions { seed: 3, dim: Some(1) };
    let a = run_suite(SuiteName::Capacity, &opts).unwrap();
    let b = run_suite(SuiteName::Capacity, &opts).unwrap();
    assert_eq!(hma_cli::output::to_json(&a.report).unwrap(), hma_cli::output::to_json(&b.report).unwrap());
    assert!(a.report.passed);
}
