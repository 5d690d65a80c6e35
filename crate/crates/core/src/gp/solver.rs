//! Barrier method with damped Newton steps on the log-domain image.

use nalgebra::{DMatrix, DVector};

use super::convex::{to_convex, ConvexProgram, LseFunction};
use super::GpProblem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative duality-gap target: stop when `m / t <= tol * (1 + |f0|)`.
    pub tol: f64,
    /// Cap on Newton steps over both phases.
    pub max_iter: usize,
    /// Barrier growth factor.
    pub mu: f64,
    pub hessian_reg: f64,
    /// Phase I stops once every constraint holds with this log-domain margin.
    pub phase1_margin: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 2000,
            mu: 50.0,
            hessian_reg: 1e-10,
            phase1_margin: 0.1,
        }
    }
}

/// One accepted Newton step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub phase: u8,
    pub t: f64,
    pub merit_before: f64,
    pub merit_after: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// GP objective value at `x`.
    pub objective: f64,
    /// `log` of the objective, i.e. the convex objective.
    pub log_objective: f64,
    pub kkt_residual: f64,
    /// Barrier duality gap `m / t` in the log domain.
    pub duality_gap: f64,
    pub iterations: usize,
    /// Smallest achievable maximum constraint value, when phase I ran.
    pub phase1_objective: Option<f64>,
    pub steps: Vec<StepRecord>,
}

/// Relative merit change treated as floating-point noise in the line search.
pub const ROUNDOFF: f64 = 1e-13;

/// Centering stops once half the squared Newton decrement drops below this.
const CENTERING_TOL: f64 = 1e-10;
/// Constraints with `-f_i` below this (log domain) count as active when the
/// multipliers are refit.
const ACTIVE_SLACK: f64 = 1e-6;

struct Work {
    g: Vec<f64>,
    h: Vec<f64>,
    scratch: Vec<f64>,
}

struct Core {
    y: Vec<f64>,
    gap: f64,
    kkt: f64,
    converged: bool,
    stopped_early: bool,
}

fn max_ineq(prog: &ConvexProgram, y: &[f64]) -> f64 {
    prog.ineq
        .iter()
        .map(|f| f.eval(y))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `t f0(y) - sum log(-f_i(y))`, or `None` outside the domain.
fn merit(prog: &ConvexProgram, y: &[f64], t: f64) -> Option<f64> {
    let mut v = t * prog.objective.eval(y);
    for f in &prog.ineq {
        let fi = f.eval(y);
        if !(fi < 0.0) {
            return None;
        }
        v -= (-fi).ln();
    }
    v.is_finite().then_some(v)
}

fn scatter(f: &LseFunction, w: f64, gl: &[f64], hl: &[f64], outer: f64, g: &mut [f64], h: &mut DMatrix<f64>) {
    let nv = f.vars.len();
    for (l, &gi) in f.vars.iter().enumerate() {
        g[gi] += w * gl[l];
        for (r, &gj) in f.vars.iter().enumerate() {
            h[(gi, gj)] += w * hl[l * nv + r] + outer * gl[l] * gl[r];
        }
    }
}

/// Gradient and Hessian of the barrier merit. Also returns the per-constraint
/// values used for the dual estimate.
fn derivatives(prog: &ConvexProgram, y: &[f64], t: f64, wk: &mut Work) -> (DVector<f64>, DMatrix<f64>, Vec<f64>) {
    let n = prog.n;
    let mut g = vec![0.0; n];
    let mut h = DMatrix::zeros(n, n);
    prog.objective.derivs(y, &mut wk.g, &mut wk.h, &mut wk.scratch);
    scatter(&prog.objective, t, &wk.g, &wk.h, 0.0, &mut g, &mut h);
    let mut fvals = Vec::with_capacity(prog.ineq.len());
    for f in &prog.ineq {
        let fi = f.derivs(y, &mut wk.g, &mut wk.h, &mut wk.scratch);
        fvals.push(fi);
        let inv = -1.0 / fi;
        scatter(f, inv, &wk.g, &wk.h, inv * inv, &mut g, &mut h);
    }
    (DVector::from_vec(g), h, fvals)
}

fn eq_matrix(prog: &ConvexProgram) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(prog.eq_rows.len(), prog.n);
    for (r, row) in prog.eq_rows.iter().enumerate() {
        for &(i, e) in row {
            a[(r, i)] += e;
        }
    }
    a
}

/// Newton direction and the equality multiplier estimate.
fn newton_direction(
    g: &DVector<f64>,
    mut h: DMatrix<f64>,
    a: &DMatrix<f64>,
    reg: f64,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = g.len();
    for i in 0..n {
        h[(i, i)] += reg;
    }
    let p = a.nrows();
    if p == 0 {
        let dy = match h.clone().cholesky() {
            Some(c) => c.solve(&(-g)),
            None => h.lu().solve(&(-g))?,
        };
        return Some((dy, DVector::zeros(0)));
    }
    let mut kkt = DMatrix::zeros(n + p, n + p);
    kkt.view_mut((0, 0), (n, n)).copy_from(&h);
    kkt.view_mut((n, 0), (p, n)).copy_from(a);
    kkt.view_mut((0, n), (n, p)).copy_from(&a.transpose());
    let mut rhs = DVector::zeros(n + p);
    rhs.rows_mut(0, n).copy_from(&(-g));
    let sol = kkt.lu().solve(&rhs)?;
    Some((sol.rows(0, n).into_owned(), sol.rows(n, p).into_owned()))
}

fn barrier<S>(
    prog: &ConvexProgram,
    mut y: Vec<f64>,
    opts: &SolverOptions,
    phase: u8,
    budget: &mut usize,
    steps: &mut Vec<StepRecord>,
    stop: S,
) -> Core
where
    S: Fn(&[f64]) -> bool,
{
    let m = prog.ineq.len() as f64;
    let a = eq_matrix(prog);
    let mut wk = Work {
        g: Vec::new(),
        h: Vec::new(),
        scratch: Vec::new(),
    };
    let f0 = prog.objective.eval(&y);
    let mut t = (m / (1.0 + f0.abs())).clamp(1e-3, 1.0);
        loop {
        // centering
        let mut inner = 0;
        loop {
            if *budget == 0 {
                return Core {
                    y,
                    gap: m / t,
                    kkt: f64::NAN,
                    converged: false,
                    stopped_early: false,
                };
            }
            let (g, h, _) = derivatives(prog, &y, t, &mut wk);
            let Some((dy, w)) = newton_direction(&g, h, &a, opts.hessian_reg) else {
                break;
            };
            let _ = w;
            let slope = g.dot(&dy);
            if -slope / 2.0 <= CENTERING_TOL {
                break;
            }
            let before = merit(prog, &y, t).expect("iterate stays interior");
            *budget -= 1;
            let Some((cand, after, s)) = line_search(prog, &y, &dy, slope, t, before) else {
                break;
            };
            steps.push(StepRecord {
                phase,
                t,
                merit_before: before,
                merit_after: after,
                step: s,
            });
            y = cand;
            inner += 1;
            if stop(&y) {
                return Core {
                    y,
                    gap: m / t,
                    kkt: f64::NAN,
                    converged: false,
                    stopped_early: true,
                };
            }
            if inner >= 100 {
                break;
            }
        }
        let f0 = prog.objective.eval(&y);
        if m / t <= opts.tol * (1.0 + f0.abs()) {
            let kkt = kkt_residual(prog, &y, t, &a, &mut wk);
            return Core {
                y,
                gap: m / t,
                kkt,
                converged: true,
                stopped_early: false,
            };
        }
        t *= opts.mu;
    }
}

/// Backtracking Armijo search along `dy`; returns the point, its merit and
/// the step length.
fn line_search(prog: &ConvexProgram, y: &[f64], dy: &DVector<f64>, slope: f64, t: f64, before: f64) -> Option<(Vec<f64>, f64, f64)> {
    let mut s = 1.0;
    while s > 1e-14 {
        let cand: Vec<f64> = y.iter().zip(dy.iter()).map(|(v, d)| v + s * d).collect();
        if let Some(after) = merit(prog, &cand, t) {
            // the allowance only admits round-off sized increases
            if after <= before + 0.01 * s * slope + ROUNDOFF * before.abs() {
                return Some((cand, after, s));
            }
        }
        s *= 0.5;
    }
    None
}

/// Stationarity residual `|grad f0 + sum lambda_i grad f_i + A^T nu|_inf`
/// relative to `max(1, |grad f0|_inf)`, with `nu` fitted by least squares.
/// Multipliers start from the barrier estimates `-1 / (t f_i)`. The slack of
/// an active constraint is only known to the resolution of `y`, so those
/// multipliers are refit by least squares; the refit is used when it is
/// nonnegative and lowers the residual.
fn kkt_residual(prog: &ConvexProgram, y: &[f64], t: f64, a: &DMatrix<f64>, wk: &mut Work) -> f64 {
    let n = prog.n;
    let g0 = objective_gradient(prog, y, wk);
    let mut grads = Vec::with_capacity(prog.ineq.len());
    let mut lambda = Vec::with_capacity(prog.ineq.len());
    let mut active = Vec::new();
    for (i, f) in prog.ineq.iter().enumerate() {
        let fi = f.derivs(y, &mut wk.g, &mut wk.h, &mut wk.scratch);
        let mut gi = DVector::zeros(n);
        for (l, &v) in f.vars.iter().enumerate() {
            gi[v] += wk.g[l];
        }
        grads.push(gi);
        lambda.push(-1.0 / (t * fi));
        if -fi <= ACTIVE_SLACK {
            active.push(i);
        }
    }
    let at = a.transpose();
    let residual = |lambda: &[f64]| {
        let mut r = g0.clone();
        for (g, l) in grads.iter().zip(lambda) {
            r.axpy(*l, g, 1.0);
        }
        if a.nrows() > 0 {
            if let Ok(nu) = at.clone().svd(true, true).solve(&(-&r), 1e-12) {
                r += &at * nu;
            }
        }
        r.amax() / g0.amax().max(1.0)
    };
    let barrier = residual(&lambda);
    if active.is_empty() {
        return barrier;
    }
    let mut r0 = g0.clone();
    for (i, g) in grads.iter().enumerate() {
        if !active.contains(&i) {
            r0.axpy(lambda[i], g, 1.0);
        }
    }
    let mut cols = DMatrix::zeros(n, active.len() + a.nrows());
    for (c, &i) in active.iter().enumerate() {
        cols.set_column(c, &grads[i]);
    }
    for r in 0..a.nrows() {
        cols.set_column(active.len() + r, &at.column(r));
    }
    let Ok(sol) = cols.svd(true, true).solve(&(-r0), 1e-14) else {
        return barrier;
    };
    if active.iter().enumerate().any(|(c, _)| sol[c] < 0.0) {
        return barrier;
    }
    let mut refit = lambda.clone();
    for (c, &i) in active.iter().enumerate() {
        refit[i] = sol[c];
    }
    residual(&refit).min(barrier)
}

fn objective_gradient(prog: &ConvexProgram, y: &[f64], wk: &mut Work) -> DVector<f64> {
    let mut g = vec![0.0; prog.n];
    prog.objective.derivs(y, &mut wk.g, &mut wk.h, &mut wk.scratch);
    for (l, &gi) in prog.objective.vars.iter().enumerate() {
        g[gi] += wk.g[l];
    }
    DVector::from_vec(g)
}

/// Least-norm solution of the equality system, or an error when it is
/// inconsistent.
fn equality_start(prog: &ConvexProgram, y0: Vec<f64>) -> Option<Vec<f64>> {
    if prog.eq_rows.is_empty() {
        return Some(y0);
    }
    let a = eq_matrix(prog);
    let y = DVector::from_vec(y0);
    let r = DVector::from_vec(prog.eq_rhs.clone()) - &a * &y;
    let svd = a.clone().svd(true, true);
    let dy = svd.solve(&r, 1e-12).ok()?;
    let out = y + dy;
    let res = (&a * &out - DVector::from_vec(prog.eq_rhs.clone())).amax();
    (res < 1e-8).then(|| out.iter().copied().collect())
}

fn phase_one(prog: &ConvexProgram) -> ConvexProgram {
    let s = prog.n;
    let mut ineq: Vec<LseFunction> = prog.ineq.iter().map(|f| f.shifted(s, -1.0)).collect();
    ineq.push(LseFunction::affine(-1.0, vec![(s, -1.0)]));
    let mut scale = prog.scale.clone();
    scale.push(1.0);
    ConvexProgram {
        n: prog.n + 1,
        scale,
        objective: LseFunction::affine(0.0, vec![(s, 1.0)]),
        n_problem_ineq: ineq.len(),
        ineq,
        eq_rows: prog.eq_rows.clone(),
        eq_rhs: prog.eq_rhs.clone(),
    }
}

/// Solves a GP. Infeasibility is reported through the status, not as an
/// error; malformed input is an error.
pub fn solve(problem: &GpProblem, opts: &SolverOptions) -> Result<SolveResult> {
    let prog = to_convex(problem)?;
    solve_convex(&prog, opts)
}

fn infeasible(prog: &ConvexProgram, y: Vec<f64>, phase1: f64, iters: usize, steps: Vec<StepRecord>) -> SolveResult {
    let x = prog.x_from_y(&y);
    let f0 = prog.objective.eval(&y);
    SolveResult {
        status: SolveStatus::Infeasible,
        x,
        objective: f0.exp(),
        log_objective: f0,
        kkt_residual: f64::NAN,
        duality_gap: f64::NAN,
        iterations: iters,
        phase1_objective: Some(phase1),
        steps,
    }
}

pub(crate) fn solve_convex(prog: &ConvexProgram, opts: &SolverOptions) -> Result<SolveResult> {
    if !(opts.mu > 1.0) || !(opts.tol > 0.0) {
        return Err(Error::Domain("solver needs mu > 1 and tol > 0".into()));
    }
    let mut budget = opts.max_iter;
    let mut steps = Vec::new();
    let Some(mut y) = equality_start(prog, vec![0.0; prog.n]) else {
        return Ok(infeasible(prog, vec![0.0; prog.n], f64::INFINITY, 0, steps));
    };
    let mut phase1_objective = None;
    let start_max = max_ineq(prog, &y);
    if start_max > -opts.phase1_margin * 1e-2 {
        let p1 = phase_one(prog);
        let mut z = y.clone();
        z.push(start_max.max(-0.5) + 1.0);
        let margin = opts.phase1_margin;
        let core = barrier(&p1, z, opts, 1, &mut budget, &mut steps, |z| z[z.len() - 1] < -margin);
        let s = core.y[prog.n];
        phase1_objective = Some(s);
        y = core.y[..prog.n].to_vec();
        let worst = max_ineq(prog, &y);
        if !(worst < -1e-10) {
            let iters = opts.max_iter - budget;
            if !core.converged && !core.stopped_early && budget == 0 {
                let mut r = infeasible(prog, y, s, iters, steps);
                r.status = SolveStatus::MaxIter;
                return Ok(r);
            }
            return Ok(infeasible(prog, y, s, iters, steps));
        }
    }
    let core = barrier(prog, y, opts, 2, &mut budget, &mut steps, |_| false);
    let f0 = prog.objective.eval(&core.y);
    Ok(SolveResult {
        status: if core.converged {
            SolveStatus::Optimal
        } else {
            SolveStatus::MaxIter
        },
        x: prog.x_from_y(&core.y),
        objective: f0.exp(),
        log_objective: f0,
        kkt_residual: core.kkt,
        duality_gap: core.gap,
        iterations: opts.max_iter - budget,
        phase1_objective,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{Monomial, Posynomial};

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn min_x_with_reciprocal_floor() {
        let mut p = GpProblem::new();
        let x = p.add_var("x", 1e-3, 1e3);
        p.set_objective(Monomial::var(x));
        p.add_le(Monomial::new(2.0, [(x, -1.0)]), Monomial::constant(1.0));
        let r = solve(&p, &opts()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x[0] - 2.0).abs() < 1e-7, "{}", r.x[0]);
        assert!(r.kkt_residual < 1e-6, "{r:?}");
    }

    #[test]
    fn monotone_objective_hits_bounds() {
        let mut p = GpProblem::new();
        let x = p.add_var("x", 1e-3, 1e3);
        let y = p.add_var("y", 1e-3, 1e3);
        p.set_objective(Monomial::new(1.0, [(x, -1.0), (y, -1.0)]));
        p.add_le(Monomial::var(x), Monomial::constant(2.0));
        p.add_le(Monomial::var(y), Monomial::constant(3.0));
        let r = solve(&p, &opts()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 1.0 / 6.0).abs() < 1e-8);
        assert!(p.max_violation(&r.x) < 1e-8);
    }

    #[test]
    fn detects_infeasibility() {
        let mut p = GpProblem::new();
        let x = p.add_var("x", 1e-3, 1e3);
        p.set_objective(Monomial::var(x));
        p.add_le(Monomial::var(x), Monomial::constant(1.0));
        p.add_le(Monomial::new(2.0, [(x, -1.0)]), Monomial::constant(1.0));
        let r = solve(&p, &opts()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.phase1_objective.unwrap() > 0.0);
    }

    #[test]
    fn equality_constraints() {
        // minimize x + y subject to x y = 4
        let mut p = GpProblem::new();
        let x = p.add_var("x", 1e-3, 1e3);
        let y = p.add_var("y", 1e-3, 1e3);
        p.set_objective(Monomial::var(x) + Monomial::var(y));
        p.add_eq(Monomial::new(1.0, [(x, 1.0), (y, 1.0)]), Monomial::constant(4.0));
        let r = solve(&p, &opts()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x[0] - 2.0).abs() < 1e-6 && (r.x[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn merit_never_increases() {
        let mut p = GpProblem::new();
        let x = p.add_var("x", 1e-3, 1e3);
        let y = p.add_var("y", 1e-3, 1e3);
        p.set_objective(Monomial::new(1.0, [(x, -1.0), (y, -0.5)]));
        p.add_le(
            Posynomial::new(vec![Monomial::var(x), Monomial::new(0.5, [(x, 1.0), (y, 1.0)])]),
            Monomial::constant(3.0),
        );
        let r = solve(&p, &opts()).unwrap();
        assert!(r.steps.iter().all(|s| s.merit_after <= s.merit_before + ROUNDOFF * s.merit_before.abs()));
        let again = solve(&p, &opts()).unwrap();
        assert_eq!(r, again);
    }
}
