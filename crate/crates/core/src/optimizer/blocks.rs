//! Block-length subproblem: with powers and splitting ratios fixed the sum
//! rate is linear in `(T_U, T_D)`, so an LP relaxation plus rounding
//! recovers the integer optimum.

use crate::error::{Error, Result};
use crate::gp::{solve_lp, LpProblem, LpStatus};
use crate::rates::Allocation;

use super::{EnergyModel, Problem};

/// Relative slack accepted when checking an integer pair.
pub const BLOCK_TOL: f64 = 1e-9;

/// Per-device prelog coefficients and energy terms at fixed powers.
struct Coeffs {
    /// `log2(1 + SINR^U_k)`.
    lu: Vec<f64>,
    /// `B log2(1 + SINR^D_k)`.
    ld: Vec<f64>,
    /// Harvested energy per downlink symbol, `eta (1 - alpha) G_k`.
    harvest: Vec<f64>,
}

fn coeffs(problem: &Problem<'_>, a: &Allocation) -> Result<Coeffs> {
    let model = problem.model();
    let sys = &problem.scenario.system;
    let mut c = Coeffs {
        lu: Vec::with_capacity(sys.k),
        ld: Vec::with_capacity(sys.k),
        harvest: Vec::with_capacity(sys.k),
    };
    for k in 0..sys.k {
        c.lu.push(model.sinr_ul(problem.scheme, k, a)?.ln_1p() / std::f64::consts::LN_2);
        c.ld.push(sys.bandwidth * model.sinr_dl(problem.scheme, k, a)?.ln_1p() / std::f64::consts::LN_2);
        c.harvest
            .push(sys.eta_eh * (1.0 - a.alpha[k]) * model.harvest_gain(problem.scheme, k, a)?);
    }
    Ok(c)
}

/// Whether `(t_u, t_d)` satisfies the rate floors, the energy constraint
/// and the symbol budget for the powers in `a`, checked with the closed
/// forms.
pub fn blocks_feasible(problem: &Problem<'_>, a: &Allocation, t_u: usize, t_d: usize) -> Result<bool> {
    let sys = &problem.scenario.system;
    if t_u + t_d > sys.data_symbols() {
        return Ok(false);
    }
    let trial = Allocation {
        t_u,
        t_d,
        ..a.clone()
    };
    Ok(problem.original_violation(&trial)? <= BLOCK_TOL)
}

/// Optimal integer `(T_U, T_D)` for the powers and splitting ratios in `a`.
///
/// The relaxed LP optimum is rounded to the nearest integers (halves toward
/// the larger `T_U`). If that pair is infeasible the best feasible pair among
/// `{floor, ceil}^2` is taken instead.
pub fn optimize_blocks(problem: &Problem<'_>, a: &Allocation) -> Result<(usize, usize)> {
    let sys = &problem.scenario.system;
    let t = sys.t as f64;
    let n = sys.k;
    let c = coeffs(problem, a)?;
    let cu: f64 = c.lu.iter().sum::<f64>() / t;
    let cd: f64 = c.ld.iter().sum::<f64>() / t;
    let budget = sys.data_symbols() as f64;

    let mut lp = LpProblem::new(vec![-cu, -cd])
        .bounds(vec![0.0, 0.0], vec![budget, budget])
        .le(vec![1.0, 1.0], budget);
    for k in 0..n {
        if sys.rreq_ul[k] > 0.0 {
            lp = lp.le(vec![-c.lu[k], 0.0], -t * sys.rreq_ul[k]);
        }
        if sys.rreq_dl[k] > 0.0 {
            lp = lp.le(vec![0.0, -c.ld[k]], -t * sys.rreq_dl[k]);
        }
        let pilots = n as f64 * a.p_p[k];
        match problem.design.energy {
            EnergyModel::Harvested => lp = lp.le(vec![a.p_d[k], -c.harvest[k]], -pilots),
            EnergyModel::Battery(p) => lp = lp.le(vec![a.p_d[k], 0.0], t * p - pilots),
        }
    }
    let r = solve_lp(&lp)?;
    if r.status != LpStatus::Optimal {
        return Err(Error::Infeasible(format!("block LP is {:?}", r.status)));
    }
    let (xu, xd) = (r.x[0].max(0.0), r.x[1].max(0.0));
    let near = |v: f64| (v + 0.5).floor() as usize;
    let (ru, rd) = (near(xu), near(xd));
    if blocks_feasible(problem, a, ru, rd)? {
        return Ok((ru, rd));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for tu in [xu.floor() as usize, xu.ceil() as usize] {
        for td in [xd.floor() as usize, xd.ceil() as usize] {
            if !blocks_feasible(problem, a, tu, td)? {
                continue;
            }
            let obj = cu * tu as f64 + cd * td as f64;
            let better = match best {
                None => true,
                Some((b, bu, _)) => obj > b || (obj == b && tu > bu),
            };
            if better {
                best = Some((obj, tu, td));
            }
        }
    }
    best.map(|(_, tu, td)| (tu, td))
        .ok_or_else(|| Error::Infeasible("no feasible integer block pair near the LP optimum".into()))
}
