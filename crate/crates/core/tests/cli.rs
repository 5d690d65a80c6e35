use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_raq-swipt"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("RAQ_SWIPT_THREADS", "2").output().unwrap()
}

fn csv_payloads(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn bounds_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let exp = dir.path().join("exp.toml");
    std::fs::write(&exp, "[experiment]\nkind = \"bound_sweep\"\ngrid = [50.0]\n").unwrap();
    let mut payloads = Vec::new();
    for (run_dir, threads) in [("a", "1"), ("b", "3")] {
        let out = dir.path().join(run_dir);
        let o = bin()
            .args(["bounds", "--trials", "10000", "--seed", "7", "--quiet", "--experiment"])
            .arg(&exp)
            .arg("--out")
            .arg(&out)
            .env("RAQ_SWIPT_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stdout.is_empty());
        payloads.push(csv_payloads(&out));
    }
    assert_eq!(payloads[0].len(), 2);
    assert_eq!(payloads[0], payloads[1]);
}

#[test]
fn optimize_zf_writes_trace_and_allocation() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["optimize", "--scheme", "zf", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(dir.path().join("trace_zf.csv")).unwrap();
    assert!(trace.starts_with("# schema=1\npass,iteration,objective,residual,anchor_norm\n"));
    let alloc = std::fs::read_to_string(dir.path().join("allocation_zf.csv")).unwrap();
    let lines: Vec<&str> = alloc.lines().collect();
    assert_eq!(lines[1], "t_u,t_d");
    assert_eq!(lines[3], "k,p_p,p_d,p_s,alpha");
    assert_eq!(lines.len(), 4 + 10);
    let manifest = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("version = \"v"));
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = run(&["optimize", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_flag_prints_usage() {
    let o = run(&["bounds", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["optimize", "--scheme", "mmse"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn infeasible_scenario_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "[system]\nrreq_ul = 25.0\n").unwrap();
    let o = run(&["optimize", "--scheme", "mrc", "--quiet", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn experiment_kind_must_match_command() {
    let dir = tempfile::tempdir().unwrap();
    let exp = dir.path().join("exp.toml");
    std::fs::write(&exp, "[experiment]\nkind = \"power_sweep\"\n").unwrap();
    let o = run(&["estimate", "--experiment", exp.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["bounds", "--trials", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_and_bench_on_a_small_system() {
    let dir = tempfile::tempdir().unwrap();
    let exp = dir.path().join("exp.toml");
    std::fs::write(
        &exp,
        "[experiment]\nkind = \"req_rate_sweep\"\ngrid = [0.1, 0.3]\ntrials = 2\nschemes = [\"mrc\"]\n\n[system]\nm = 32\nk = 4\n",
    )
    .unwrap();
    let out = dir.path().join("sweep");
    let o = run(&["sweep", "--quiet", "--experiment", exp.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["full", "equal_ul_powers", "rf_full_opt", "rf_equal_ul"] {
        let summary = std::fs::read_to_string(out.join(format!("req_rate_sweep_mrc_{name}.csv"))).unwrap();
        assert_eq!(summary.lines().count(), 4, "{summary}");
    }
    let bench_out = dir.path().join("bench");
    let o = run(&["bench", "--scheme", "zf", "--quiet", "--experiment", exp.to_str().unwrap(), "--out", bench_out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let b = std::fs::read_to_string(bench_out.join("bench_zf.csv")).unwrap();
    assert_eq!(b.lines().count(), 2 + 4);
}
