//! End-to-end runs of the `adiacont` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adiacont::cli::Experiment;
use adiacont::error::exit;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_adiacont"));
    c.env_remove("ADIACONT_OUT");
    c
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn config(name: &str) -> PathBuf {
    fixtures().join("configs").join(format!("{name}.toml"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(["run"]).args(args).arg("--out").arg(out).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn filter_check_with_defaults_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.toml", "");
    let o = run(&["filter-check", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(exit::OK), "{}", stdout(&o));
    for f in
        ["filter-check_chi_hat.csv", "filter-check_chi.csv", "filter-check_envelope.csv", "filter-check.manifest.toml"]
    {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let env = fs::read_to_string(dir.path().join("filter-check_envelope.csv")).unwrap();
    assert!(env.starts_with("j,gamma,c_j,max_ratio,pass\n"));
    assert_eq!(env.lines().skip(1).filter(|l| l.ends_with(",true")).count(), 8);
}

#[test]
fn gap_scan_reports_unperturbed_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "model.m = 6\nmodel.lambda = 0.0\n");
    let o = run(&["gap-scan", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(exit::OK));
    assert!(stdout(&o).contains("min_gap = 2\n"));
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("gap-scan", "model.lamda = 0.2\n", exit::CONFIG),
        ("gap-scan", "model.m = \"eight\"\n", exit::CONFIG),
        ("no-such-experiment", "", exit::CONFIG),
        ("gap-scan", "model.m = 6\nmodel.lambda = 0.3\ngap.bound = 1.9\n", exit::ASSUMPTION),
        ("pt-check", "model.m = 4\nfilter.gamma = 3.0\ngap.bound = 1.5\n", exit::ASSUMPTION),
        ("exact-transport", "model.m = 14\n", exit::WINDOW_CAP),
        ("summability", "model.m = 6\n", exit::CHECK_FAILED),
    ];
    for (i, (exp, text, code)) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("c{i}.toml"), text);
        let o = run(&[exp, cfg.to_str().unwrap()], dir.path());
        assert_eq!(o.status.code(), Some(*code), "{exp} with {text:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(&["gap-scan", dir.path().join("missing.toml").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(exit::CONFIG));
}

#[test]
fn config_experiment_name_must_match() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["pt-check", config("gap-scan").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(exit::CONFIG));
}

#[test]
fn identical_configs_give_identical_csvs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for exp in ["gap-scan", "evolve-expectation", "shell-decay", "lr-cone"] {
        let cfg = config(exp);
        assert_eq!(run(&[exp, cfg.to_str().unwrap()], a.path()).status.code(), Some(0));
        assert_eq!(run(&[exp, cfg.to_str().unwrap()], b.path()).status.code(), Some(0));
    }
    let mut n = 0;
    for entry in fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_string_lossy().ends_with(".csv") {
            assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name:?}");
            n += 1;
        }
    }
    assert_eq!(n, 4);
}

#[test]
fn every_experiment_matches_its_stored_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let expected = fixtures().join("expected");
    for exp in Experiment::ALL {
        let o = run(
            &[exp.name(), config(exp.name()).to_str().unwrap(), "--fixtures", expected.to_str().unwrap()],
            dir.path(),
        );
        let text = stdout(&o);
        assert!(text.contains(" 0 mismatch(es)"), "{}: {text}", exp.name());
        assert!(matches!(o.status.code(), Some(0) | Some(1)), "{}", exp.name());
    }
}

#[test]
fn perturbed_model_fails_fixture_with_located_diffs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.toml", "model.m = 8\nmodel.lambda = 0.2000001\ngap.bound = 1.5\n");
    let o = run(
        &["gap-scan", cfg.to_str().unwrap(), "--fixtures", fixtures().join("expected").to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(exit::CHECK_FAILED));
    let text = stdout(&o);
    assert!(text.contains("gap-scan.csv:"), "{text}");
    assert!(!text.contains(" 0 mismatch(es)"));
    let manifest = fs::read_to_string(dir.path().join("gap-scan.manifest.toml")).unwrap();
    assert!(manifest.contains("status = \"fixture mismatch\""));
}

#[test]
fn fresh_fixtures_are_written_and_pass() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    let cfg = config("pt-check");
    let o =
        run(&["pt-check", cfg.to_str().unwrap(), "--fixtures", fx.to_str().unwrap(), "--write-fixtures"], dir.path());
    assert_eq!(o.status.code(), Some(exit::OK));
    assert!(fx.join("pt-check.csv").exists());
    let o = run(&["pt-check", cfg.to_str().unwrap(), "--fixtures", fx.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(exit::OK));
    let o = run(&["gap-scan", config("gap-scan").to_str().unwrap(), "--fixtures", fx.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(exit::CHECK_FAILED));
    let o = run(&["pt-check", cfg.to_str().unwrap(), "--write-fixtures"], dir.path());
    assert_eq!(o.status.code(), Some(exit::CONFIG));
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "model.m = 4\noutput.dir = \"from_config\"\n");
    let env_dir = dir.path().join("from_env");
    let o = bin().args(["run", "gap-scan"]).arg(&cfg).env("ADIACONT_OUT", &env_dir).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(env_dir.join("gap-scan.csv").exists());
    let flag_dir = dir.path().join("from_flag");
    let o = bin()
        .args(["run", "gap-scan"])
        .arg(&cfg)
        .arg("--out")
        .arg(&flag_dir)
        .env("ADIACONT_OUT", &env_dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_dir.join("gap-scan.csv").exists());
    let o = bin().args(["run", "gap-scan"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("from_config/gap-scan.csv").exists());
}

#[test]
fn manifest_records_parameters_and_wall_time_outside_csvs() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "model.txt", "dim=1, m=4, lambda=0.2\n[h0]\n-1 0 0:Z\n[hprime]\n1 0 0:X 1:X\n");
    let cfg = write(dir.path(), "c.toml", "model.file = \"model.txt\"\nfilter.gamma = 0.7\n");
    let o = run(&["pt-check", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(dir.path().join("pt-check.manifest.toml")).unwrap();
    for key in ["wall_time_s", "version", "gamma = 0.7", "model_text", "lambda = 0.2", "[config.pt]"] {
        assert!(manifest.contains(key), "{key}\n{manifest}");
    }
    let csv = fs::read_to_string(dir.path().join("pt-check.csv")).unwrap();
    assert!(!csv.contains("wall"));
}

#[test]
fn failed_runs_still_write_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "model.m = 6\nmodel.lambda = 0.3\ngap.bound = 1.9\n");
    let o = run(&["gap-scan", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(exit::ASSUMPTION));
    let manifest = fs::read_to_string(dir.path().join("gap-scan.manifest.toml")).unwrap();
    assert!(manifest.contains("status = \"error: gap assumption violated"));
}
