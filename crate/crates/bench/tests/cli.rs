use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench")).args(args).current_dir(dir).env_remove("BENCH_THREADS").output().expect("bench runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(bench(&["filter-run", "--scenario", "nope"], d).status.code(), Some(2));
    assert_eq!(bench(&["filter-run", "--config", "missing.toml"], d).status.code(), Some(2));
    let bad = write(d, "bad.toml", "trails = 3\n");
    let out = bench(&["filter-run", "--config", &bad], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));
    let cfg = write(d, "ok.toml", "trials = 1\n");
    let out = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["filter-run", "--config", &cfg])
        .current_dir(d)
        .env("BENCH_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(bench(&["gain-compare", "--scenario", "ship"], d).status.code(), Some(2));
}

#[test]
fn divergence_exits_3_unless_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let text = "trials = 3\n[cubic]\nhorizon = 2.0\n[sweep]\ndims = [1]\nfit_dims = []\ntiming_reps = 1\n";
    let strict = write(d, "strict.toml", text);
    assert_eq!(bench(&["dim-sweep", "--config", &strict, "--out", "a"], d).status.code(), Some(3));
    let lenient = write(d, "lenient.toml", &format!("skip_failed = true\n{text}"));
    let out = bench(&["dim-sweep", "--config", &lenient, "--out", "b"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(d.join("b/dim_sweep.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    assert!(row[6].parse::<usize>().unwrap() >= 1, "failed column {}", row[6]);
}

#[test]
fn unwritable_output_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("file"), "").unwrap();
    let out = bench(&["gain-compare", "--out", "file/sub"], d);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn runs_and_prints_config() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = bench(&["gain-compare", "--print-config", "--seed", "9"], d);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("scenario = \"static_gain_mixture\"") && text.contains("seed = 9"));

    let cfg = write(d, "mix.toml", "trials = 2\n[mixture]\nparticles = 20\n");
    let out = bench(&["gain-compare", "--config", &cfg, "--out", "mix", "--threads", "2"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fpf_decomp"));
    for f in ["gain_compare.csv", "gain_errors.csv", "gain_compare.json"] {
        assert!(d.join("mix").join(f).exists(), "{f}");
    }
    let v = bench(&["--version"], d);
    assert!(String::from_utf8_lossy(&v.stdout).starts_with("bench "));
}
