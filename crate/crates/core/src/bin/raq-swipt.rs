use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use raq_swipt::error::Error;
use raq_swipt::harness::{
    self, config_hash, draw_scenario, num, write_allocation, write_manifest, write_trace, CsvOut, Experiment,
    ExperimentKind,
};
use raq_swipt::optimizer::{optimize_full, run_benchmark, BenchmarkKind, BenchmarkSpec, OptimizerOptions, RateReport};
use raq_swipt::rates::Scheme;
use raq_swipt::scenario::ScenarioConfig;

#[derive(Debug, Parser)]
#[command(name = "raq-swipt", version, about = "SWIPT with a Rydberg atomic receiver: bounds, oracles and power design")]
struct Cli {
    /// Scenario config (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Experiment file with an [experiment] table.
    #[arg(long, global = true, value_name = "PATH")]
    experiment: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Monte-Carlo trials, or scenario draws for sweeps.
    #[arg(long, global = true, value_name = "N")]
    trials: Option<usize>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Restrict to one detection scheme.
    #[arg(long, global = true)]
    scheme: Option<Scheme>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Channel-estimation MSE / NMSE versus pilot power.
    Estimate,
    /// Closed-form bounds against Monte-Carlo oracles.
    Bounds,
    /// Full design on one scenario; writes trace and allocation CSVs.
    Optimize,
    /// Runs the experiment file (a power sweep by default).
    Sweep,
    /// Full design and all benchmarks on one scenario.
    Bench,
}

/// Failure classes mapped to exit codes.
enum Fail {
    Usage(String),
    Infeasible(String),
    Runtime(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible(_) => Fail::Infeasible(e.to_string()),
            _ => Fail::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Fail::Infeasible(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Fail::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Scenario config and experiment after applying the command-line overrides.
fn setup(cli: &Cli, kind: ExperimentKind) -> Result<(ScenarioConfig, Experiment), Fail> {
    let (mut exp, embedded) = match &cli.experiment {
        Some(p) => Experiment::load(p).map_err(|e| Fail::Usage(e.to_string()))?,
        None => (Experiment::new(kind), None),
    };
    let strict = matches!(cli.command, Command::Estimate | Command::Bounds);
    if strict && exp.kind != kind {
        return Err(Fail::Usage(format!(
            "experiment kind {} does not match this command ({})",
            exp.kind.name(),
            kind.name()
        )));
    }
    let cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p).map_err(|e| Fail::Usage(e.to_string()))?,
        None => embedded.unwrap_or_default(),
    };
    if let Some(s) = cli.seed {
        exp.seed = s;
    }
    if let Some(t) = cli.trials {
        exp.trials = t;
    }
    if let Some(o) = &cli.out {
        exp.out = o.clone();
    }
    if let Some(s) = cli.scheme {
        exp.schemes = vec![s];
    }
    exp.validate().map_err(|e| Fail::Usage(e.to_string()))?;
    Ok((cfg, exp))
}

fn execute(cli: &Cli) -> Result<(), Fail> {
    let opts = OptimizerOptions::default();
    match cli.command {
        Command::Estimate => experiment(cli, ExperimentKind::MseSweep, &opts),
        Command::Bounds => experiment(cli, ExperimentKind::BoundSweep, &opts),
        Command::Sweep => experiment(cli, ExperimentKind::PowerSweep, &opts),
        Command::Optimize => optimize(cli, &opts),
        Command::Bench => bench(cli, &opts),
    }
}

fn experiment(cli: &Cli, kind: ExperimentKind, opts: &OptimizerOptions) -> Result<(), Fail> {
    let (cfg, exp) = setup(cli, kind)?;
    let out = harness::run(&cfg, &exp, opts)?;
    if !cli.quiet {
        println!(
            "{}: {} points, {} infeasible, {} files in {}",
            exp.kind.name(),
            out.points,
            out.infeasible,
            out.files.len(),
            exp.out.display()
        );
    }
    Ok(())
}

fn prepare_out(dir: &Path) -> Result<(), Fail> {
    std::fs::create_dir_all(dir).map_err(|e| Fail::from(Error::Io {
        path: dir.to_path_buf(),
        source: e,
    }))
}

fn optimize(cli: &Cli, opts: &OptimizerOptions) -> Result<(), Fail> {
    let (cfg, exp) = setup(cli, ExperimentKind::PowerSweep)?;
    prepare_out(&exp.out)?;
    let sc = draw_scenario(&cfg, exp.seed, 0)?;
    let mut files = Vec::new();
    for &scheme in &exp.schemes {
        let r = optimize_full(&sc, scheme, opts)?;
        let name = scheme.name();
        files.push(write_trace(&exp.out.join(format!("trace_{name}.csv")), &r.full.inner)?);
        files.push(write_allocation(&exp.out.join(format!("allocation_{name}.csv")), &r.full.allocation)?);
        files.push(write_rates(&exp.out.join(format!("rates_{name}.csv")), scheme, &r.report)?);
        if !cli.quiet {
            println!(
                "{name}: sum rate {:.4} bit/s/Hz (uplink {:.4}, downlink {:.4}), T_U = {}, T_D = {}, {} passes",
                r.report.sum_rate,
                r.report.uplink,
                r.report.downlink,
                r.full.allocation.t_u,
                r.full.allocation.t_d,
                r.full.passes()
            );
        }
    }
    finish(&cfg, &exp, "optimize", &files)
}

fn write_rates(path: &Path, scheme: Scheme, report: &RateReport) -> Result<PathBuf, Fail> {
    let mut w = CsvOut::create(path, &["scenario", "scheme", "k", "sinr_u", "sinr_d", "r_u", "r_d", "energy"])?;
    for (k, d) in report.devices.iter().enumerate() {
        w.row([
            "0".to_string(),
            scheme.name().to_string(),
            k.to_string(),
            num(d.sinr_u),
            num(d.sinr_d),
            num(d.r_u),
            num(d.r_d),
            num(d.energy),
        ])?;
    }
    Ok(w.finish()?)
}

fn bench(cli: &Cli, opts: &OptimizerOptions) -> Result<(), Fail> {
    let (cfg, exp) = setup(cli, ExperimentKind::PowerSweep)?;
    prepare_out(&exp.out)?;
    let sc = draw_scenario(&cfg, exp.seed, 0)?;
    let mut files = Vec::new();
    for &scheme in &exp.schemes {
        let path = exp.out.join(format!("bench_{}.csv", scheme.name()));
        let mut w = CsvOut::create(&path, &["method", "status", "sum_rate", "uplink", "downlink", "passes"])?;
        let full = optimize_full(&sc, scheme, opts)?;
        let mut rows = vec![("full", Some((full.report.clone(), full.full.passes())))];
        for kind in BenchmarkKind::ALL {
            match run_benchmark(&BenchmarkSpec::new(kind), &sc, scheme, opts) {
                Ok((sol, report)) => rows.push((kind.name(), Some((report, sol.passes())))),
                Err(Error::Infeasible(_)) => rows.push((kind.name(), None)),
                Err(e) => return Err(e.into()),
            }
        }
        for (name, r) in &rows {
            match r {
                Some((r, passes)) => {
                    w.row([
                        name.to_string(),
                        "ok".into(),
                        num(r.sum_rate),
                        num(r.uplink),
                        num(r.downlink),
                        passes.to_string(),
                    ])?;
                    if !cli.quiet {
                        println!("{} {name}: {:.4} bit/s/Hz", scheme.name(), r.sum_rate);
                    }
                }
                None => {
                    w.row([name.to_string(), "infeasible".into()])?;
                    if !cli.quiet {
                        println!("{} {name}: infeasible", scheme.name());
                    }
                }
            }
        }
        files.push(w.finish()?);
    }
    finish(&cfg, &exp, "bench", &files)
}

fn finish(cfg: &ScenarioConfig, exp: &Experiment, command: &str, files: &[PathBuf]) -> Result<(), Fail> {
    let hash = config_hash(&[&cfg.to_toml_string(), &exp.to_toml_string()]);
    write_manifest(&exp.out, command, &hash, exp.seed, files)?;
    Ok(())
}
