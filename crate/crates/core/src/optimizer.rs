//! Joint design of pilot, payload and downlink powers, power-splitting ratios
//! and block lengths.
//!
//! The power subproblem is solved by successive approximation: at each step
//! the rate objective, the ZF uplink SINR and the harvested-energy constraint
//! are replaced by monomial minorants tight at the previous solution, and the
//! resulting GP is solved exactly. The block lengths are set by an LP with
//! rounding, and the two subproblems are alternated.

mod bench;
mod blocks;
mod build;

pub use bench::{optimize_full, run_benchmark, BenchmarkKind, BenchmarkSpec, FullResult, RateReport};
pub use blocks::{blocks_feasible, optimize_blocks, BLOCK_TOL};
pub use build::{BuiltGp, Layout};

use crate::error::{Error, Result};
use crate::gp::{solve, SolveStatus, SolverOptions};
use crate::rates::{Allocation, LinkModel, Scheme};
use crate::scenario::{ReceiverKind, Scenario};

use build::{ALPHA_HI, ALPHA_LO, CHI_HI, CHI_LO};

/// Violation of the original constraints tolerated at accepted points.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// Where the uplink energy comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyModel {
    /// Harvested from the downlink: `K p^p + T_U p^d <= T E_k`.
    Harvested,
    /// Fixed average power budget in watts: `K p^p + T_U p^d <= T P`.
    Battery(f64),
}

/// Structural choices distinguishing the proposed design from the baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Design {
    /// Front-end receiving the uplink pilots and data.
    pub receiver: ReceiverKind,
    pub energy: EnergyModel,
    /// Forces `p^p_k = p^d_k`.
    pub tie_ul: bool,
    /// Keeps the splitting ratios of the starting point.
    pub fix_alpha: bool,
}

impl Design {
    pub fn full() -> Self {
        Design {
            receiver: ReceiverKind::Raqr,
            energy: EnergyModel::Harvested,
            tie_ul: false,
            fix_alpha: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    /// Relative sum-rate increment below which a loop stops.
    pub kappa: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub solver: SolverOptions,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            kappa: 0.01,
            max_inner: 50,
            max_outer: 20,
            solver: SolverOptions::default(),
        }
    }
}

/// One optimization problem instance.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub scenario: &'a Scenario,
    pub scheme: Scheme,
    pub design: Design,
}

/// History of one successive-approximation run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    /// Sum rate (bit/s/Hz) at the start point and after every accepted step.
    pub objective: Vec<f64>,
    /// Largest violation of the freshly built approximated constraints by
    /// the previous solution, one entry per GP.
    pub residuals: Vec<f64>,
    /// Anchor of each GP, starting with the start point.
    pub anchors: Vec<Allocation>,
    /// Number of GPs solved after the feasibility phase.
    pub iterations: usize,
    /// GPs spent reaching the rate floors from the initial point.
    pub phase1_iterations: usize,
    pub converged: bool,
    /// Largest violation of the original constraints at the returned point.
    pub final_violation: f64,
}

impl IterationTrace {
    pub fn final_objective(&self) -> f64 {
        self.objective.last().copied().unwrap_or(0.0)
    }
}

impl<'a> Problem<'a> {
    pub fn new(scenario: &'a Scenario, scheme: Scheme, design: Design) -> Self {
        Problem {
            scenario,
            scheme,
            design,
        }
    }

    pub fn full(scenario: &'a Scenario, scheme: Scheme) -> Self {
        Self::new(scenario, scheme, Design::full())
    }

    pub fn model(&self) -> LinkModel<'a> {
        self.scenario.link(self.design.receiver)
    }

    pub fn sum_rate(&self, a: &Allocation) -> Result<f64> {
        self.model().sum_rate(self.scheme, a)
    }

    /// Condensed GP around `anchor`.
    pub fn build_gp(&self, anchor: &Allocation) -> Result<BuiltGp> {
        build::build(self, anchor, false)
    }

    /// Largest relative violation of the original (non-approximated)
    /// constraints: rate floors, uplink energy, downlink budget, boxes and
    /// the symbol budget. Zero when feasible.
    pub fn original_violation(&self, a: &Allocation) -> Result<f64> {
        let sys = &self.scenario.system;
        let model = self.model();
        let mut worst: f64 = 0.0;
        if a.t_u + a.t_d > sys.data_symbols() {
            worst = worst.max((a.t_u + a.t_d) as f64 / sys.data_symbols() as f64 - 1.0);
        }
        let bounds = model.bounds(self.scheme, a)?;
        for (k, b) in bounds.iter().enumerate() {
            if sys.rreq_ul[k] > 0.0 {
                worst = worst.max(1.0 - b.r_u / sys.rreq_ul[k]);
            }
            if sys.rreq_dl[k] > 0.0 {
                worst = worst.max(1.0 - b.r_d / sys.rreq_dl[k]);
            }
            let spend = model.uplink_energy(k, a);
            let available = match self.design.energy {
                EnergyModel::Harvested => sys.t as f64 * b.energy,
                EnergyModel::Battery(p) => sys.t as f64 * p,
            };
            if spend > 0.0 {
                worst = worst.max(spend / available - 1.0);
            }
            if a.p_p[k] < 0.0 || a.p_d[k] < 0.0 || a.p_s[k] < 0.0 {
                worst = f64::INFINITY;
            }
            if !(0.0..=1.0).contains(&a.alpha[k]) {
                worst = f64::INFINITY;
            }
            if self.design.tie_ul && a.p_p[k] != a.p_d[k] {
                worst = worst.max((a.p_p[k] / a.p_d[k] - 1.0).abs());
            }
        }
        let total: f64 = a.p_s.iter().sum();
        worst = worst.max(total / sys.ps_max - 1.0);
        Ok(worst.max(0.0))
    }

    /// Deterministic start point for blocks `(t_u, t_d)`: uniform downlink
    /// power at half the budget, `alpha = 1/2`, and pilot and payload powers
    /// using a quarter of the energy available when the channel estimate is
    /// worthless.
    pub fn initial_allocation(&self, t_u: usize, t_d: usize) -> Result<Allocation> {
        let sys = &self.scenario.system;
        let n = sys.k;
        let model = self.model();
        let ps = 0.5 * sys.ps_max / n as f64;
        let mut a = Allocation::uniform(n, 0.0, 0.0, ps, 0.5, t_u, t_d);
        let total_dl = model.rho_rf * sys.ps_max * 0.5;
        for k in 0..n {
            let budget = match self.design.energy {
                EnergyModel::Harvested => {
                    // e_k = beta_k: only the spread term survives
                    t_d as f64 * sys.eta_eh * (1.0 - a.alpha[k]) * model.beta[k] * total_dl
                }
                EnergyModel::Battery(p) => sys.t as f64 * p,
            };
            let p = 0.25 * budget / (n + t_u) as f64;
            a.p_p[k] = p;
            a.p_d[k] = p;
        }
        // Guard against configurations where the estimate reduces harvesting.
        for _ in 0..200 {
            if self.energy_slack_ok(&a)? {
                return Ok(a);
            }
            for k in 0..n {
                a.p_p[k] *= 0.5;
                a.p_d[k] *= 0.5;
            }
        }
        Err(Error::Infeasible("no energy-feasible initial powers".into()))
    }

    fn energy_slack_ok(&self, a: &Allocation) -> Result<bool> {
        let sys = &self.scenario.system;
        let model = self.model();
        for k in 0..sys.k {
            let available = match self.design.energy {
                EnergyModel::Harvested => sys.t as f64 * model.energy(self.scheme, k, a)?,
                EnergyModel::Battery(p) => sys.t as f64 * p,
            };
            if model.uplink_energy(k, a) >= available {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Largest ratio of SINR floor to current SINR; below one means every
    /// rate floor holds.
    fn floor_deficit(&self, a: &Allocation) -> Result<f64> {
        let sys = &self.scenario.system;
        let model = self.model();
        let mut worst: f64 = 0.0;
        for k in 0..sys.k {
            let fu = build::sinr_floor(sys.rreq_ul[k], a.t_u, sys.t, 1.0)?;
            if fu > 0.0 {
                worst = worst.max(fu / model.sinr_ul(self.scheme, k, a)?);
            }
            let fd = build::sinr_floor(sys.rreq_dl[k], a.t_d, sys.t, sys.bandwidth)?;
            if fd > 0.0 {
                worst = worst.max(fd / model.sinr_dl(self.scheme, k, a)?);
            }
        }
        Ok(worst)
    }

    fn true_sinrs(&self, a: &Allocation) -> Result<(Vec<f64>, Vec<f64>)> {
        let model = self.model();
        let n = self.scenario.system.k;
        let u = (0..n).map(|k| model.sinr_ul(self.scheme, k, a)).collect::<Result<Vec<_>>>()?;
        let d = (0..n).map(|k| model.sinr_dl(self.scheme, k, a)).collect::<Result<Vec<_>>>()?;
        Ok((u, d))
    }

    /// Moves a start point with violated rate floors into the feasible set by
    /// minimizing a common floor-scaling slack.
    fn reach_floors(&self, mut a: Allocation, opts: &OptimizerOptions, trace: &mut IterationTrace) -> Result<Allocation> {
        let mut deficit = self.floor_deficit(&a)?;
        for _ in 0..opts.max_inner {
            if deficit < 1.0 - 1e-9 {
                return Ok(a);
            }
            let built = build::build(self, &a, true)?;
            let res = solve(&built.gp, &opts.solver)?;
            trace.phase1_iterations += 1;
            if res.status == SolveStatus::Infeasible {
                break;
            }
            let next = built.allocation(&res.x, &a);
            let d = self.floor_deficit(&next)?;
            if !(d < deficit * (1.0 - 1e-6)) {
                break;
            }
            a = next;
            deficit = d;
        }
        if deficit < 1.0 - 1e-9 {
            return Ok(a);
        }
        Err(Error::Infeasible(format!(
            "rate floors unreachable (best SINR floor ratio {deficit:.4})"
        )))
    }

    /// Successive-approximation loop with fixed blocks, starting from `init`.
    pub fn solve_powers(&self, init: &Allocation, opts: &OptimizerOptions) -> Result<(Allocation, IterationTrace)> {
        let sys = &self.scenario.system;
        init.validate(sys)?;
        let mut trace = IterationTrace::default();
        let mut a = init.clone();
        if self.design.tie_ul {
            a.p_d = a.p_p.clone();
        }
        for al in &mut a.alpha {
            if !self.design.fix_alpha {
                *al = al.clamp(ALPHA_LO, ALPHA_HI);
            }
        }
        if !self.energy_slack_ok(&a)? {
            return Err(Error::Infeasible("start point violates the energy constraint".into()));
        }
        a = self.reach_floors(a, opts, &mut trace)?;

        let mut obj = self.sum_rate(&a)?;
        trace.objective.push(obj);
        trace.anchors.push(a.clone());
        let mut prev_chi: Option<(Vec<f64>, Vec<f64>)> = None;
        for _ in 0..opts.max_inner {
            let built = self.build_gp(&a)?;
            let (cu, cd) = match prev_chi.take() {
                Some(c) => c,
                None => {
                    let (u, d) = self.true_sinrs(&a)?;
                    let clamp = |v: Vec<f64>| v.into_iter().map(|x| x.clamp(CHI_LO, CHI_HI)).collect::<Vec<_>>();
                    (clamp(u), clamp(d))
                }
            };
            let point = built.point(&a, &cu, &cd, 1.0);
            trace.residuals.push(built.gp.max_violation(&point));

            let res = solve(&built.gp, &opts.solver)?;
            trace.iterations += 1;
            if res.status != SolveStatus::Optimal {
                break;
            }
            let next = built.allocation(&res.x, &a);
            let next_obj = self.sum_rate(&next)?;
            if !(next_obj >= obj) || self.original_violation(&next)? > FEASIBILITY_TOL {
                // Solver noise only; the anchor already is a fixed point.
                trace.converged = true;
                break;
            }
            let increment = next_obj - obj;
            prev_chi = Some(built.chi(&res.x));
            a = next;
            obj = next_obj;
            trace.objective.push(obj);
            trace.anchors.push(a.clone());
            if increment < opts.kappa * (obj - increment) {
                trace.converged = true;
                break;
            }
        }
        trace.final_violation = self.original_violation(&a)?;
        Ok((a, trace))
    }
}

/// Successive approximation for MRC uplink detection and MRT downlink
/// precoding with fixed blocks.
pub fn solve_mrc(scenario: &Scenario, init: &Allocation, opts: &OptimizerOptions) -> Result<(Allocation, IterationTrace)> {
    Problem::full(scenario, Scheme::Mrc).solve_powers(init, opts)
}

/// Successive approximation for ZF detection and precoding with fixed
/// blocks.
pub fn solve_zf(scenario: &Scenario, init: &Allocation, opts: &OptimizerOptions) -> Result<(Allocation, IterationTrace)> {
    Problem::full(scenario, Scheme::Zf).solve_powers(init, opts)
}

/// GP of one MRC step anchored at `anchor`.
pub fn build_mrc_gp(scenario: &Scenario, anchor: &Allocation) -> Result<BuiltGp> {
    Problem::full(scenario, Scheme::Mrc).build_gp(anchor)
}

pub fn build_zf_gp(scenario: &Scenario, anchor: &Allocation) -> Result<BuiltGp> {
    Problem::full(scenario, Scheme::Zf).build_gp(anchor)
}

/// Result of the alternating optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub allocation: Allocation,
    pub sum_rate: f64,
    /// Sum rate after each outer pass, starting with the first power solve.
    pub outer: Vec<f64>,
    pub inner: Vec<IterationTrace>,
}

impl Solution {
    pub fn passes(&self) -> usize {
        self.outer.len()
    }
}

/// Uplink shares of `T - K` tried, in order, for the cold start.
const START_SPLITS: [f64; 7] = [0.5, 0.7, 0.3, 0.85, 0.15, 0.95, 0.05];

/// Power solve from the deterministic initial point, trying the even block
/// split first and then progressively lopsided ones when the rate floors
/// cannot be met.
fn cold_start(problem: &Problem<'_>, opts: &OptimizerOptions) -> Result<(Allocation, IterationTrace)> {
    let n = problem.scenario.system.data_symbols();
    let mut last = None;
    for share in START_SPLITS {
        let t_u = ((n as f64 * share).round() as usize).clamp(1, n - 1);
        let init = problem.initial_allocation(t_u, n - t_u)?;
        match problem.solve_powers(&init, opts) {
            Ok(r) => return Ok(r),
            Err(e @ Error::Infeasible(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Infeasible("no start point".into())))
}

/// Alternates the power subproblem and the block LP until the sum-rate
/// increment of a pass drops below `kappa`. Starts from `init`, or from the
/// deterministic initial point with an even block split.
pub fn alternate(problem: &Problem<'_>, init: Option<&Allocation>, opts: &OptimizerOptions) -> Result<Solution> {
    let (mut a, trace) = match init {
        Some(a) => problem.solve_powers(a, opts)?,
        None => cold_start(problem, opts)?,
    };
    let mut obj = trace.final_objective();
    let mut sol = Solution {
        allocation: a.clone(),
        sum_rate: obj,
        outer: vec![obj],
        inner: vec![trace],
    };
    for _ in 1..opts.max_outer {
        let (t_u, t_d) = optimize_blocks(problem, &a)?;
        let mut moved = a.clone();
        moved.t_u = t_u;
        moved.t_d = t_d;
        let (next, trace) = problem.solve_powers(&moved, opts)?;
        let next_obj = trace.final_objective();
        sol.inner.push(trace);
        if next_obj < obj {
            sol.outer.push(obj);
            break;
        }
        let increment = next_obj - obj;
        a = next;
        obj = next_obj;
        sol.outer.push(obj);
        if increment < opts.kappa * (obj - increment) {
            break;
        }
    }
    debug_assert!(sol.outer.windows(2).all(|w| w[1] >= w[0]));
    sol.allocation = a;
    sol.sum_rate = obj;
    Ok(sol)
}

#[cfg(test)]
mod tests;
