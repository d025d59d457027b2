use std::path::Path;
use std::process::{Command, Output};

fn mscale(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mscale")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Numeric rows of a CSV written by the CLI (comments and header dropped).
fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn gen(dir: &Path, f: &str, n: usize, sigma: &str, seed: &str) -> std::path::PathBuf {
    let out = dir.join(format!("data-{seed}.csv"));
    let o = mscale(&["gen-data", "--f", f, "--n", &n.to_string(), "--sigma", sigma, "--seed", seed, "--output", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn missing_input_exits_with_usage_code() {
    let o = mscale(&["tautstring", "--input", "/nonexistent/data.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exist"));
}

#[test]
fn bad_flags_exit_one() {
    assert_eq!(mscale(&["bands", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(mscale(&["calibrate-tau", "--n", "100", "--alpha", "1.5"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "exp:5", 20, "1", "1");
    let o = mscale(&["bands", "--input", path(&data), "--theta", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(mscale(&["--help"]).status.success());
}

#[test]
fn tautstring_on_constant_data_returns_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.csv");
    std::fs::write(&input, "y\n2.5\n2.5\n2.5\n2.5\n2.5\n").unwrap();
    let o = mscale(&["tautstring", "--input", path(&input)]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("# sigma_hat=0"));
    let r = rows(&text);
    assert_eq!(r.len(), 5);
    assert!(r.iter().all(|row| row[1] == 2.5));
}

#[test]
fn superfast_band_on_exponential_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "exp:5", 100, "5", "3");
    let out = dir.path().join("band.csv");
    let o = mscale(&["bands", "--method", "monotone-superfast", "--input", path(&data), "--output", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# sigma_hat=")));
    assert!(text.lines().any(|l| l.starts_with("t,lb,ub")));
    let r = rows(&text);
    assert_eq!(r.len(), 100);
    assert!(r.iter().all(|row| row[1] <= row[2]));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "doppler", 256, "0.1", "7");
    let sub = dir.path().join("again");
    std::fs::create_dir(&sub).unwrap();
    let again = gen(&sub, "doppler", 256, "0.1", "7");
    assert_eq!(std::fs::read(&data).unwrap(), std::fs::read(&again).unwrap());
    for args in [
        vec!["tautstring"],
        vec!["minimize", "--objective", "tv", "--order", "1"],
        vec!["bands", "--method", "universal"],
    ] {
        let mut full = args.clone();
        full.extend(["--input", path(&data)]);
        let a = mscale(&full);
        let b = mscale(&full);
        assert!(a.status.success(), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
    let cov = ["simulate-coverage", "--f", "sine:4pi", "--n", "200", "--sigma", "0.2", "--reps", "100", "--seed", "5"];
    let one = Command::new(env!("CARGO_BIN_EXE_mscale")).args(cov).env("MSCALE_THREADS", "1").output().unwrap();
    let many = Command::new(env!("CARGO_BIN_EXE_mscale")).args(cov).env("MSCALE_THREADS", "4").output().unwrap();
    assert!(one.status.success());
    assert_eq!(one.stdout, many.stdout, "thread count changed the estimate");
}

#[test]
fn numbers_carry_twelve_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "sine:2pi", 50, "0.3", "2");
    let text = std::fs::read_to_string(&data).unwrap();
    let y = text.lines().find(|l| l.starts_with("0.5,")).unwrap().split(',').nth(1).unwrap().to_string();
    let digits = y.trim_start_matches('-').replace('.', "").trim_start_matches('0').len();
    assert!(digits <= 12, "{y}");
    assert!(text.starts_with("# mscale gen-data f=sine:"));
}

#[test]
fn infeasible_band_exits_three() {
    // a steep dip that no nondecreasing function can follow at sigma = 0.01
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("dip.csv");
    std::fs::write(&input, "5\n5\n5\n-5\n-5\n-5\n").unwrap();
    let o = mscale(&["bands", "--method", "monotone-lp", "--sigma", "0.01", "--family", "all", "--input", path(&input)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn calibrate_and_detect_print_results() {
    let o = mscale(&["calibrate-tau", "--n", "200", "--sims", "500", "--seed", "1"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("tau_hat=") && text.contains("quantile="));
    let o = mscale(&["detect", "peak", "--f", "box:0.5:0.01", "--sigma", "1"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let n: usize = text.lines().find_map(|l| l.strip_prefix("min_n=")).unwrap().parse().unwrap();
    assert!((18_500..=20_500).contains(&n));
}

#[test]
fn region_coverage_is_one_without_noise() {
    let o = mscale(&["simulate-coverage", "--f", "exp:2", "--n", "64", "--sigma", "0", "--reps", "20", "--json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["proportion"], 1.0);
    assert_eq!(v["covered"], 20);
}
