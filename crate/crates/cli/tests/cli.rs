use std::fs;
use std::path::Path;
use std::process::Command;

fn dqc1m(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dqc1m")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn zero_trials_give_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dqc1m(&["estimate-continuous", "--trials", "0", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trials = fs::read_to_string(dir.path().join("o/trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 2, "comment and header only:\n{trials}");
    let summary = fs::read_to_string(dir.path().join("o/summary.csv")).unwrap();
    assert!(summary.contains("rows,0"));
}

#[test]
fn invalid_config_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "[noise]\ndelta = 0.3\n[policy]\nc_prime = 3\n[hamiltonian]\nh2 = ['Z']\n",
    );
    let out = dqc1m(&["estimate-continuous", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["c*delta", "must exceed 5", "at least c", "su(2)", "wrap-around"] {
        assert!(err.contains(needle), "missing {needle:?} in:\n{err}");
    }
    assert!(!dir.path().join("out").exists(), "nothing is written for an invalid config");
}

#[test]
fn unparsable_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "trials = \"many\"\n");
    assert_eq!(dqc1m(&["trace", "--config", &cfg], dir.path()).status.code(), Some(2));
    let cfg = write(dir.path(), "mode.toml", "mode = \"trace\"\n");
    assert_eq!(dqc1m(&["search-bound", "--config", &cfg], dir.path()).status.code(), Some(2));
}

#[test]
fn nonconvergence_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "short.toml", "trials = 5\n[policy]\nmax_steps = 1\n");
    let out = dqc1m(&["estimate-continuous", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("o/trials.csv").exists(), "outputs are still written");
    let lenient = write(dir.path(), "lenient.toml", "trials = 5\n[policy]\nmax_steps = 1\n[campaign]\nmax_nonconverged_fraction = 1.0\n");
    assert_eq!(dqc1m(&["estimate-continuous", "--config", &lenient, "--out", "p"], dir.path()).status.code(), Some(0));
}

#[test]
fn outputs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "trials = 30\n[policy]\ntarget_precision = [1e-4, 1e-5, 1e-6]\n");
    for (threads, out) in [("1", "a"), ("4", "b"), ("4", "c")] {
        let o = dqc1m(&["estimate-continuous", "--config", &cfg, "--seed", "9", "--threads", threads, "--out", out], dir.path());
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["steps.csv", "trials.csv", "summary.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        assert!(a == fs::read(dir.path().join("b").join(f)).unwrap(), "{f} differs between 1 and 4 threads");
        assert!(a == fs::read(dir.path().join("c").join(f)).unwrap(), "{f} differs between repeats");
    }
}

#[test]
fn header_carries_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let a = dqc1m(&["trace", "--trials", "2", "--out", "a"], dir.path());
    let b = dqc1m(&["trace", "--trials", "2", "--seed", "1", "--out", "b"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let first = |d: &str| fs::read_to_string(dir.path().join(d).join("steps.csv")).unwrap().lines().next().unwrap().to_string();
    assert!(first("a").starts_with("# dqc1m mode=trace seed=0 config_sha256="));
    assert_ne!(first("a"), first("b"));
}

#[test]
fn svg_flag_writes_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "trials = 10\n[policy]\ntarget_precision = [1e-4, 1e-5, 1e-6]\n");
    let out = dqc1m(&["estimate-continuous", "--config", &cfg, "--out", "o", "--svg"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let svg = fs::read_to_string(dir.path().join("o/scaling.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("slope"));
    let trace = dqc1m(&["trace", "--trials", "1", "--out", "t", "--svg"], dir.path());
    assert_eq!(trace.status.code(), Some(0), "a missing plot never fails the campaign");
}

#[test]
fn every_mode_runs_with_small_configs() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("trace", "trials = 2\n"),
        ("estimate-continuous", "trials = 3\n"),
        ("estimate-discrete", "trials = 3\n[truth]\ntheta = 0.2\n"),
        ("multiparam", "trials = 2\n[policy]\ntarget_precision = [1e-4]\n"),
        ("frame-align", "trials = 3\n[truth]\ntheta = 0.15\n"),
        ("search-bound", "trials = 2\n[noise]\ndelta = 0.45\n[search]\nn = [2, 3]\ninterleave = \"random\"\ncalls = [1, 2]\n"),
    ];
    for (mode, text) in cases {
        let cfg = write(dir.path(), &format!("{mode}.toml"), text);
        let out = dqc1m(&[mode, "--config", &cfg, "--out", mode], dir.path());
        assert_eq!(out.status.code(), Some(0), "{mode}: {}", String::from_utf8_lossy(&out.stderr));
        let trials = fs::read_to_string(dir.path().join(mode).join("trials.csv")).unwrap();
        assert!(trials.lines().count() > 2, "{mode} wrote no rows");
    }
}
