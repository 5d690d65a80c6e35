//! Experiment runner: estimation curves, bound-tightness sweeps, convergence
//! traces and optimization sweeps with benchmarks. Every run writes CSV files
//! (first line `# schema=1`) and a `manifest.toml` into the output directory.
//!
//! Work is split into independent (grid point, scenario) tasks. Each task
//! draws from its own RNG stream, so the thread count never changes a result.

mod io;

use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{equivalent_snr, error_variance, nmse};
use crate::error::{Error, Result};
use crate::optimizer::{optimize_full, run_benchmark, BenchmarkKind, BenchmarkSpec, OptimizerOptions, Problem};
use crate::rates::mc::{mc_ergodic_uplink, mc_estimation, mc_swipt_downlink, McSettings};
use crate::rates::{Allocation, Scheme};
use crate::scenario::{ReceiverKind, Scenario, ScenarioConfig};
use crate::units::dbm_to_watts;

pub use io::{
    anchor_norm, config_hash, mean_se, num, trace_rows, version_string, write_allocation, write_manifest,
    write_trace, CsvOut, SCHEMA_LINE,
};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "RAQ_SWIPT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Grid: pilot power (dBm). Closed-form and empirical MSE / NMSE for
    /// both receivers.
    MseSweep,
    /// Grid: `P^{s,max}` (W). Closed-form bounds against the Monte-Carlo
    /// oracles at the deterministic initial allocation.
    BoundSweep,
    /// Grid: `P^{s,max}` (W). Inner successive-approximation traces.
    Convergence,
    /// Grid: `P^{s,max}` (W).
    PowerSweep,
    /// Grid: uplink rate floor (bit/s/Hz), same for every device.
    ReqRateSweep,
    /// Grid: distance from the device disk to the base station (m).
    DistanceSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::MseSweep => "mse_sweep",
            Self::BoundSweep => "bound_sweep",
            Self::Convergence => "convergence",
            Self::PowerSweep => "power_sweep",
            Self::ReqRateSweep => "req_rate_sweep",
            Self::DistanceSweep => "distance_sweep",
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            Self::MseSweep => vec![-40.0, -30.0, -20.0, -10.0, 0.0, 10.0],
            Self::BoundSweep => vec![20.0, 40.0, 60.0, 80.0],
            Self::Convergence | Self::PowerSweep => vec![40.0, 50.0, 60.0, 70.0],
            Self::ReqRateSweep => vec![0.1, 0.2, 0.3, 0.4, 0.5],
            Self::DistanceSweep => vec![100.0, 150.0, 200.0, 250.0],
        }
    }

    /// Monte-Carlo trials for the estimation and bound studies, scenario
    /// draws for the others.
    pub fn default_trials(self) -> usize {
        match self {
            Self::MseSweep | Self::BoundSweep => 10_000,
            _ => 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub kind: ExperimentKind,
    pub grid: Vec<f64>,
    /// Monte-Carlo trials, or scenario draws for optimization studies.
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub benchmarks: Vec<BenchmarkKind>,
    pub out: PathBuf,
}

/// `[experiment]` table; missing keys take the kind's defaults.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    kind: ExperimentKind,
    grid: Option<Vec<f64>>,
    trials: Option<usize>,
    seed: Option<u64>,
    schemes: Option<Vec<Scheme>>,
    benchmarks: Option<Vec<BenchmarkKind>>,
    out: Option<PathBuf>,
}

impl Experiment {
    pub fn new(kind: ExperimentKind) -> Self {
        let benchmarks = match kind {
            ExperimentKind::PowerSweep | ExperimentKind::ReqRateSweep | ExperimentKind::DistanceSweep => {
                BenchmarkKind::ALL.to_vec()
            }
            _ => Vec::new(),
        };
        Experiment {
            kind,
            grid: kind.default_grid(),
            trials: kind.default_trials(),
            seed: 0,
            schemes: vec![Scheme::Mrc, Scheme::Zf],
            benchmarks,
            out: PathBuf::from("results"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::Config("empty grid".into()));
        }
        if self.grid.iter().any(|g| !g.is_finite()) || self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("grid must be finite and strictly increasing".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("no scheme selected".into()));
        }
        Ok(())
    }

    /// Parses an experiment file: an `[experiment]` table plus, optionally,
    /// the scenario sections of a config file.
    pub fn from_toml_str(text: &str) -> std::result::Result<(Self, Option<ScenarioConfig>), String> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
        let section = table.remove("experiment").ok_or("missing [experiment] table")?;
        let s: ExperimentSection = section.try_into().map_err(|e: toml::de::Error| e.to_string())?;
        let mut exp = Experiment::new(s.kind);
        exp.grid = s.grid.unwrap_or(exp.grid);
        exp.trials = s.trials.unwrap_or(exp.trials);
        exp.seed = s.seed.unwrap_or(exp.seed);
        exp.schemes = s.schemes.unwrap_or(exp.schemes);
        exp.benchmarks = s.benchmarks.unwrap_or(exp.benchmarks);
        exp.out = s.out.unwrap_or(exp.out);
        exp.validate().map_err(|e| e.to_string())?;
        let cfg = if table.is_empty() {
            None
        } else {
            let rest = toml::to_string(&table).map_err(|e| e.to_string())?;
            Some(ScenarioConfig::from_toml_str(&rest)?)
        };
        Ok((exp, cfg))
    }

    pub fn load(path: &Path) -> Result<(Self, Option<ScenarioConfig>)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|msg| Error::Parse {
            path: path.to_path_buf(),
            msg,
        })
    }

    pub fn to_toml_string(&self) -> String {
        let mut t = toml::Table::new();
        t.insert("experiment".into(), toml::Value::try_from(self).expect("experiment serializes"));
        toml::to_string(&t).expect("experiment serializes")
    }
}

/// Seed of task `index`, independent of scheduling.
pub fn task_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Layout `j` of a run; the same for every grid point.
pub fn draw_scenario(cfg: &ScenarioConfig, seed: u64, j: usize) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j as u64);
    cfg.sample(&mut rng)
}

/// Pool honoring [`THREADS_ENV`]; all cores when unset.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

/// Files written by a run and the number of infeasible task points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub points: usize,
    pub infeasible: usize,
}

/// Runs `exp` on `cfg`, writing into `exp.out`.
pub fn run(cfg: &ScenarioConfig, exp: &Experiment, opts: &OptimizerOptions) -> Result<RunOutput> {
    cfg.validate()?;
    exp.validate()?;
    io::ensure_dir(&exp.out)?;
    let pool = thread_pool()?;
    let mut out = pool.install(|| match exp.kind {
        ExperimentKind::MseSweep => mse_sweep(cfg, exp),
        ExperimentKind::BoundSweep => bound_sweep(cfg, exp),
        ExperimentKind::Convergence => convergence(cfg, exp, opts),
        _ => optimization_sweep(cfg, exp, opts),
    })?;
    let hash = config_hash(&[&cfg.to_toml_string(), &exp.to_toml_string()]);
    let manifest = write_manifest(&exp.out, exp.kind.name(), &hash, exp.seed, &out.files)?;
    out.files.push(manifest);
    Ok(out)
}

/// Scenario for one grid point of an optimization sweep.
fn grid_config(cfg: &ScenarioConfig, kind: ExperimentKind, g: f64) -> ScenarioConfig {
    let mut c = cfg.clone();
    match kind {
        ExperimentKind::BoundSweep | ExperimentKind::Convergence | ExperimentKind::PowerSweep => c.system.ps_max = g,
        ExperimentKind::ReqRateSweep => c.system.rreq_ul = vec![g; c.system.k],
        ExperimentKind::DistanceSweep => c.geometry.bs_distance = g,
        ExperimentKind::MseSweep => {}
    }
    c
}

/// Deterministic start: even block split and the default powers.
pub fn even_start(problem: &Problem<'_>) -> Result<Allocation> {
    let n = problem.scenario.system.data_symbols();
    problem.initial_allocation(n - n / 2, n / 2)
}

fn receiver_name(r: ReceiverKind) -> &'static str {
    match r {
        ReceiverKind::Raqr => "raqr",
        ReceiverKind::Rf => "rf",
    }
}

fn mse_sweep(cfg: &ScenarioConfig, exp: &Experiment) -> Result<RunOutput> {
    let sc = draw_scenario(cfg, exp.seed, 0)?;
    let receivers = [ReceiverKind::Raqr, ReceiverKind::Rf];
    let tasks: Vec<(usize, usize)> = (0..receivers.len())
        .flat_map(|r| (0..exp.grid.len()).map(move |g| (r, g)))
        .collect();
    let rows: Vec<Vec<Vec<String>>> = tasks
        .par_iter()
        .enumerate()
        .map(|(idx, &(r, g))| {
            let model = sc.link(receivers[r]);
            let fe = model.ul;
            let p = dbm_to_watts(exp.grid[g]);
            let pilots = vec![p; sc.k()];
            let settings = McSettings::new(exp.trials, task_seed(exp.seed, idx as u64));
            let mc = mc_estimation(&pilots, &model, &cfg.array, &settings)?;
            (0..sc.k())
                .map(|k| {
                    let b = sc.beta[k];
                    let closed_nmse = nmse(equivalent_snr(b, p, fe), sc.system.tau)?;
                    Ok(vec![
                        num(exp.grid[g]),
                        k.to_string(),
                        num(b),
                        num(error_variance(b, p, sc.system.tau, fe)),
                        num(mc.mse[k].mean),
                        num(mc.mse[k].se),
                        num(closed_nmse),
                        num(mc.nmse[k].mean),
                        num(mc.nmse[k].se),
                    ])
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let header = [
        "grid", "k", "beta", "mse_closed", "mse_mean", "mse_se", "nmse_closed", "nmse_mean", "nmse_se",
    ];
    let mut files = Vec::new();
    for (r, recv) in receivers.iter().enumerate() {
        let path = exp.out.join(format!("{}_{}.csv", exp.kind.name(), receiver_name(*recv)));
        let mut w = CsvOut::create(&path, &header)?;
        for g in 0..exp.grid.len() {
            for row in &rows[r * exp.grid.len() + g] {
                w.row(row.iter().cloned())?;
            }
        }
        files.push(w.finish()?);
    }
    Ok(RunOutput {
        files,
        points: tasks.len(),
        infeasible: 0,
    })
}

fn bound_sweep(cfg: &ScenarioConfig, exp: &Experiment) -> Result<RunOutput> {
    let tasks: Vec<(usize, usize)> = (0..exp.schemes.len())
        .flat_map(|s| (0..exp.grid.len()).map(move |g| (s, g)))
        .collect();
    let results: Vec<std::result::Result<Vec<Vec<String>>, String>> = tasks
        .par_iter()
        .enumerate()
        .map(|(idx, &(s, g))| -> Result<_> {
            let scheme = exp.schemes[s];
            let c = grid_config(cfg, exp.kind, exp.grid[g]);
            let sc = draw_scenario(&c, exp.seed, 0)?;
            let problem = Problem::full(&sc, scheme);
            let a = match even_start(&problem) {
                Ok(a) => a,
                Err(Error::Infeasible(msg)) => return Ok(Err(msg)),
                Err(e) => return Err(e),
            };
            let model = problem.model();
            let bounds = model.bounds(scheme, &a)?;
            let settings = McSettings::new(exp.trials, task_seed(exp.seed, idx as u64));
            let ul = mc_ergodic_uplink(scheme, &a, &model, &cfg.array, &settings)?;
            let dl = mc_swipt_downlink(scheme, &a, &model, &cfg.array, &settings)?;
            Ok(Ok((0..sc.k())
                .map(|k| {
                    let b = &bounds[k];
                    vec![
                        num(exp.grid[g]),
                        k.to_string(),
                        "ok".to_string(),
                        num(b.r_u),
                        num(ul.rate[k].mean),
                        num(ul.rate[k].se),
                        num(b.r_d),
                        num(dl.rate[k].mean),
                        num(dl.rate[k].se),
                        num(b.energy),
                        num(dl.energy[k].mean),
                        num(dl.energy[k].se),
                        num(ul.ergodic[k].mean),
                        num(dl.ergodic[k].mean),
                    ]
                })
                .collect()))
        })
        .collect::<Result<_>>()?;
    let header = [
        "grid", "k", "status", "r_u", "r_u_mc", "r_u_se", "r_d", "r_d_mc", "r_d_se", "energy", "energy_mc",
        "energy_se", "r_u_ergodic", "r_d_ergodic",
    ];
    let mut files = Vec::new();
    let mut infeasible = 0;
    for (s, scheme) in exp.schemes.iter().enumerate() {
        let path = exp.out.join(format!("{}_{}.csv", exp.kind.name(), scheme.name()));
        let mut w = CsvOut::create(&path, &header)?;
        for g in 0..exp.grid.len() {
            match &results[s * exp.grid.len() + g] {
                Ok(rows) => {
                    for row in rows {
                        w.row(row.iter().cloned())?;
                    }
                }
                Err(_) => {
                    infeasible += 1;
                    w.row([num(exp.grid[g]), String::new(), "infeasible".into()])?;
                }
            }
        }
        files.push(w.finish()?);
    }
    Ok(RunOutput {
        files,
        points: tasks.len(),
        infeasible,
    })
}

/// Outcome of one method on one scenario.
#[derive(Debug, Clone, PartialEq)]
enum Point {
    Ok { sum_rate: f64, extra: f64 },
    Infeasible,
}

impl Point {
    fn from_result<T>(r: Result<T>, f: impl FnOnce(T) -> (f64, f64)) -> Result<Point> {
        match r {
            Ok(v) => {
                let (sum_rate, extra) = f(v);
                Ok(Point::Ok { sum_rate, extra })
            }
            Err(Error::Infeasible(_)) => Ok(Point::Infeasible),
            Err(e) => Err(e),
        }
    }
}

/// Writes per-scenario rows and the per-grid summary of one method.
fn write_method(
    exp: &Experiment,
    stem: &str,
    extra_name: &str,
    points: &[Vec<Point>],
    files: &mut Vec<PathBuf>,
) -> Result<usize> {
    let mut infeasible = 0;
    let path = exp.out.join(format!("{stem}_points.csv"));
    let mut w = CsvOut::create(&path, &["grid", "scenario", "status", "sum_rate", extra_name])?;
    for (g, row) in points.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            let cells = match p {
                Point::Ok { sum_rate, extra } => ["ok".to_string(), num(*sum_rate), num(*extra)],
                Point::Infeasible => {
                    infeasible += 1;
                    ["infeasible".to_string(), String::new(), String::new()]
                }
            };
            w.row([num(exp.grid[g]), j.to_string()].into_iter().chain(cells))?;
        }
    }
    files.push(w.finish()?);

    let path = exp.out.join(format!("{stem}.csv"));
    let mean_extra = format!("{extra_name}_mean");
    let mut w = CsvOut::create(&path, &["grid", "mean", "se", &mean_extra, "feasible", "infeasible"])?;
    for (g, row) in points.iter().enumerate() {
        let ok: Vec<(f64, f64)> = row
            .iter()
            .filter_map(|p| match p {
                Point::Ok { sum_rate, extra } => Some((*sum_rate, *extra)),
                Point::Infeasible => None,
            })
            .collect();
        let rates: Vec<f64> = ok.iter().map(|p| p.0).collect();
        let extras: Vec<f64> = ok.iter().map(|p| p.1).collect();
        let (mean, se) = mean_se(&rates);
        w.row([
            num(exp.grid[g]),
            num(mean),
            num(se),
            num(mean_se(&extras).0),
            ok.len().to_string(),
            (row.len() - ok.len()).to_string(),
        ])?;
    }
    files.push(w.finish()?);
    Ok(infeasible)
}

/// Grid-major task list over (grid point, scenario).
fn tasks(exp: &Experiment) -> Vec<(usize, usize)> {
    (0..exp.grid.len())
        .flat_map(|g| (0..exp.trials).map(move |j| (g, j)))
        .collect()
}

fn reshape<T>(exp: &Experiment, flat: Vec<T>) -> Vec<Vec<T>> {
    let mut it = flat.into_iter();
    (0..exp.grid.len())
        .map(|_| it.by_ref().take(exp.trials).collect())
        .collect()
}

fn convergence(cfg: &ScenarioConfig, exp: &Experiment, opts: &OptimizerOptions) -> Result<RunOutput> {
    let list = tasks(exp);
    let mut files = Vec::new();
    let mut infeasible = 0;
    for &scheme in &exp.schemes {
        let runs: Vec<(Point, Vec<[String; 4]>)> = list
            .par_iter()
            .map(|&(g, j)| {
                let c = grid_config(cfg, exp.kind, exp.grid[g]);
                let sc = draw_scenario(&c, exp.seed, j)?;
                let problem = Problem::full(&sc, scheme);
                let r = even_start(&problem).and_then(|a| problem.solve_powers(&a, opts));
                let rows = match &r {
                    Ok((_, tr)) => trace_rows(tr),
                    Err(_) => Vec::new(),
                };
                let p = Point::from_result(r, |(_, tr)| (tr.final_objective(), tr.iterations as f64))?;
                Ok((p, rows))
            })
            .collect::<Result<_>>()?;
        let path = exp.out.join(format!("{}_{}_trace.csv", exp.kind.name(), scheme.name()));
        let mut w = CsvOut::create(&path, &["grid", "scenario", "iteration", "objective", "residual", "anchor_norm"])?;
        for (&(g, j), (_, rows)) in list.iter().zip(&runs) {
            for r in rows {
                w.row([num(exp.grid[g]), j.to_string()].into_iter().chain(r.iter().cloned()))?;
            }
        }
        files.push(w.finish()?);
        let points = reshape(exp, runs.into_iter().map(|r| r.0).collect());
        let stem = format!("{}_{}", exp.kind.name(), scheme.name());
        infeasible += write_method(exp, &stem, "iterations", &points, &mut files)?;
    }
    Ok(RunOutput {
        files,
        points: list.len() * exp.schemes.len(),
        infeasible,
    })
}

fn optimization_sweep(cfg: &ScenarioConfig, exp: &Experiment, opts: &OptimizerOptions) -> Result<RunOutput> {
    let list = tasks(exp);
    let mut files = Vec::new();
    let mut infeasible = 0;
    for &scheme in &exp.schemes {
        // per task: full, then the requested benchmarks in list order
        let runs: Vec<Vec<Point>> = list
            .par_iter()
            .map(|&(g, j)| {
                let c = grid_config(cfg, exp.kind, exp.grid[g]);
                let sc = draw_scenario(&c, exp.seed, j)?;
                let mut out = Vec::with_capacity(1 + exp.benchmarks.len());
                let full = optimize_full(&sc, scheme, opts);
                let equal = match &full {
                    Ok(r) => Point::Ok {
                        sum_rate: r.equal_ul.sum_rate,
                        extra: r.equal_ul.passes() as f64,
                    },
                    Err(_) => Point::Infeasible,
                };
                out.push(Point::from_result(full, |r| (r.full.sum_rate, r.full.passes() as f64))?);
                for b in &exp.benchmarks {
                    let p = if *b == BenchmarkKind::EqualUlPowers {
                        equal.clone()
                    } else {
                        let r = run_benchmark(&BenchmarkSpec::new(*b), &sc, scheme, opts);
                        Point::from_result(r, |(s, _)| (s.sum_rate, s.passes() as f64))?
                    };
                    out.push(p);
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let names = std::iter::once("full").chain(exp.benchmarks.iter().map(|b| b.name()));
        for (m, name) in names.enumerate() {
            let column: Vec<Point> = runs.iter().map(|r| r[m].clone()).collect();
            let stem = format!("{}_{}_{}", exp.kind.name(), scheme.name(), name);
            infeasible += write_method(exp, &stem, "passes", &reshape(exp, column), &mut files)?;
        }
    }
    Ok(RunOutput {
        files,
        points: list.len() * exp.schemes.len() * (1 + exp.benchmarks.len()),
        infeasible,
    })
}
