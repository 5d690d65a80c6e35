//! GP construction for one successive-approximation step.

use crate::approx::{amgm_bound, log_bound, product_bound};
use crate::error::{Error, Result};
use crate::gp::{GpProblem, Monomial, Posynomial};
use crate::rates::{Allocation, Scheme};

use super::{EnergyModel, Problem};

pub(crate) const P_LO: f64 = 1e-15;
pub(crate) const P_HI: f64 = 10.0;
pub(crate) const PS_LO_FRAC: f64 = 1e-9;
pub(crate) const ALPHA_LO: f64 = 1e-6;
pub(crate) const ALPHA_HI: f64 = 1.0 - 1e-6;
pub(crate) const CHI_LO: f64 = 1e-9;
pub(crate) const CHI_HI: f64 = 1e9;
const SLACK_LO: f64 = 1e-6;
const SLACK_HI: f64 = 1e6;

/// Variable ids of one built GP. `pd` aliases `pp` when the uplink powers
/// are tied; `alpha` is `None` when the splitting ratios are held fixed.
#[derive(Debug, Clone)]
pub struct Layout {
    pub pp: Vec<usize>,
    pub pd: Vec<usize>,
    pub ps: Vec<usize>,
    pub alpha: Option<Vec<usize>>,
    pub chi_u: Vec<usize>,
    pub chi_d: Vec<usize>,
    pub slack: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct BuiltGp {
    pub gp: GpProblem,
    pub layout: Layout,
}

impl BuiltGp {
    /// Full GP point from an allocation and explicit `chi` values.
    pub fn point(&self, a: &Allocation, chi_u: &[f64], chi_d: &[f64], slack: f64) -> Vec<f64> {
        let l = &self.layout;
        let mut x = vec![0.0; self.gp.n_vars()];
        for k in 0..a.k() {
            x[l.pp[k]] = a.p_p[k];
            if l.pd[k] != l.pp[k] {
                x[l.pd[k]] = a.p_d[k];
            }
            x[l.ps[k]] = a.p_s[k];
            if let Some(al) = &l.alpha {
                x[al[k]] = a.alpha[k];
            }
            x[l.chi_u[k]] = chi_u[k];
            x[l.chi_d[k]] = chi_d[k];
        }
        if let Some(s) = l.slack {
            x[s] = slack;
        }
        x
    }

    /// Reads an allocation back; blocks and fixed quantities come from
    /// `template`.
    pub fn allocation(&self, x: &[f64], template: &Allocation) -> Allocation {
        let l = &self.layout;
        let k = template.k();
        Allocation {
            p_p: (0..k).map(|i| x[l.pp[i]]).collect(),
            p_d: (0..k).map(|i| x[l.pd[i]]).collect(),
            p_s: (0..k).map(|i| x[l.ps[i]]).collect(),
            alpha: match &l.alpha {
                Some(al) => al.iter().map(|&i| x[i]).collect(),
                None => template.alpha.clone(),
            },
            t_u: template.t_u,
            t_d: template.t_d,
        }
    }

    pub fn chi(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let l = &self.layout;
        (
            l.chi_u.iter().map(|&i| x[i]).collect(),
            l.chi_d.iter().map(|&i| x[i]).collect(),
        )
    }
}

/// Rate floor on `chi`: `2^{T R / (T_active B)} - 1`, zero when no rate is
/// required.
pub(crate) fn sinr_floor(rate: f64, t_active: usize, t: usize, bandwidth: f64) -> Result<f64> {
    if rate <= 0.0 {
        return Ok(0.0);
    }
    if t_active == 0 {
        return Err(Error::Infeasible(format!(
            "rate {rate} required with a zero-length block"
        )));
    }
    Ok((t as f64 * rate / (t_active as f64 * bandwidth)).exp2() - 1.0)
}

fn var(i: usize) -> Monomial {
    Monomial::var(i)
}

fn cst(c: f64) -> Monomial {
    Monomial::constant(c)
}

/// Builds the condensed GP around `anchor`. With `phase1` the objective is
/// a slack `s` that scales every rate floor, used to find a start satisfying
/// the floors.
pub(crate) fn build(problem: &Problem<'_>, anchor: &Allocation, phase1: bool) -> Result<BuiltGp> {
    let sys = &problem.scenario.system;
    let model = problem.model();
    let fe = model.ul;
    let design = &problem.design;
    let n = sys.k;
    if anchor.k() != n {
        return Err(Error::Domain("anchor size does not match K".into()));
    }
    let true_u = (0..n)
        .map(|k| model.sinr_ul(problem.scheme, k, anchor))
        .collect::<Result<Vec<_>>>()?;
    let true_d = (0..n)
        .map(|k| model.sinr_dl(problem.scheme, k, anchor))
        .collect::<Result<Vec<_>>>()?;

    let mut gp = GpProblem::new();
    let pp: Vec<usize> = (0..n).map(|k| gp.add_var(format!("pp{k}"), P_LO, P_HI)).collect();
    let pd: Vec<usize> = if design.tie_ul {
        pp.clone()
    } else {
        (0..n).map(|k| gp.add_var(format!("pd{k}"), P_LO, P_HI)).collect()
    };
    let ps: Vec<usize> = (0..n)
        .map(|k| gp.add_var(format!("ps{k}"), sys.ps_max * PS_LO_FRAC, sys.ps_max))
        .collect();
    let alpha: Option<Vec<usize>> = (!design.fix_alpha)
        .then(|| (0..n).map(|k| gp.add_var(format!("alpha{k}"), ALPHA_LO, ALPHA_HI)).collect());
    let chi_u: Vec<usize> = (0..n).map(|k| gp.add_var(format!("chiu{k}"), CHI_LO, CHI_HI)).collect();
    let chi_d: Vec<usize> = (0..n).map(|k| gp.add_var(format!("chid{k}"), CHI_LO, CHI_HI)).collect();
    let slack = phase1.then(|| gp.add_var("s", SLACK_LO, SLACK_HI));

    let alpha_m = |k: usize| match &alpha {
        Some(ids) => var(ids[k]),
        None => cst(anchor.alpha[k]),
    };

    let tau = sys.tau as f64;
    let s2 = fe.sigma2;
    let c1: Vec<f64> = model
        .beta
        .iter()
        .map(|b| fe.rho * tau * b * fe.phi2)
        .collect();
    let den = |k: usize| -> Posynomial { var(pp[k]).scale(c1[k]) + cst(s2) };
    let gain = match problem.scheme {
        Scheme::Mrc => sys.m as f64,
        Scheme::Zf => {
            if sys.m <= n {
                return Err(Error::Config("ZF needs M > K".into()));
            }
            (sys.m - n) as f64
        }
    };

    // Uplink interference-plus-noise, common to all devices.
    let interf_u: Posynomial = match problem.scheme {
        Scheme::Mrc => (0..n)
            .map(|j| var(pd[j]).scale(model.beta[j]))
            .sum::<Posynomial>()
            + cst(fe.normalized_noise()),
        Scheme::Zf => {
            // e_j = beta_j / (1 + x_j) <= beta_j / (psi_j x_j^phi_j)
            let x_hat: Vec<f64> = (0..n).map(|j| c1[j] * anchor.p_p[j] / s2).collect();
            let pb = product_bound(&x_hat)?;
            (0..n)
                .map(|j| {
                    let lower = var(pp[j]).scale(c1[j] / s2).pow(pb.phi[j]).scale(pb.psi_j[j]);
                    (&var(pd[j]) * &lower.recip()).scale(model.beta[j])
                })
                .sum::<Posynomial>()
                + cst(fe.normalized_noise())
        }
    };
    let total_dl: Posynomial = (0..n).map(|j| var(ps[j]).scale(model.rho_rf)).sum();

    for k in 0..n {
        let rhs = (&var(pd[k]) * &var(pp[k])).scale(gain * c1[k] * model.beta[k]);
        let lhs = (&interf_u * &den(k)).mul_mono(&var(chi_u[k]));
        gp.add_le(lhs, rhs);
    }

    for k in 0..n {
        let al = alpha_m(k);
        let noise = al.scale(sys.sigma2_rf[k]) + cst(sys.sigma2_ks[k]);
        let inner = match problem.scheme {
            Scheme::Mrc => {
                let spread = total_dl.mul_mono(&al.scale(model.beta[k]));
                &(spread + noise) * &den(k)
            }
            Scheme::Zf => {
                // e_k (rho tau p^p beta |Phi|^2 + sigma^2) = beta sigma^2
                total_dl.mul_mono(&al.scale(model.beta[k] * s2)) + &noise * &den(k)
            }
        };
        let rhs = (&(&var(ps[k]) * &al) * &var(pp[k])).scale(model.rho_rf * gain * c1[k] * model.beta[k]);
        gp.add_le(inner.mul_mono(&var(chi_d[k])), rhs);
    }

    let floor_rhs = |_: ()| match slack {
        Some(s) => var(s),
        None => cst(1.0),
    };
    let mut s_hat: f64 = SLACK_LO;
    for k in 0..n {
        let fu = sinr_floor(sys.rreq_ul[k], anchor.t_u, sys.t, 1.0)?;
        if fu > 0.0 {
            gp.add_le(Monomial::new(fu, [(chi_u[k], -1.0)]), floor_rhs(()));
            s_hat = s_hat.max(fu / true_u[k].clamp(CHI_LO, CHI_HI));
        }
        let fd = sinr_floor(sys.rreq_dl[k], anchor.t_d, sys.t, sys.bandwidth)?;
        if fd > 0.0 {
            gp.add_le(Monomial::new(fd, [(chi_d[k], -1.0)]), floor_rhs(()));
            s_hat = s_hat.max(fd / true_d[k].clamp(CHI_LO, CHI_HI));
        }
    }

    gp.add_le(ps.iter().map(|&j| var(j)).sum::<Posynomial>(), cst(sys.ps_max));

    for k in 0..n {
        let mut uplink = Posynomial::from(var(pp[k]).scale(n as f64));
        if anchor.t_u > 0 {
            uplink.push(var(pd[k]).scale(anchor.t_u as f64));
        }
        match design.energy {
            EnergyModel::Battery(p_bat) => {
                gp.add_le(uplink, cst(sys.t as f64 * p_bat));
            }
            EnergyModel::Harvested => {
                if anchor.t_d == 0 {
                    return Err(Error::Infeasible(
                        "harvesting needs a nonzero downlink block".into(),
                    ));
                }
                // (K p^p + T_U p^d)(den) / (T_D eta rho_RF beta) <= (1 - alpha) S
                let spend = (&uplink * &den(k))
                    .scale(1.0 / (anchor.t_d as f64 * sys.eta_eh * model.rho_rf * model.beta[k]));
                let a_coef: Vec<f64> = (0..n)
                    .map(|j| match problem.scheme {
                        Scheme::Mrc => c1[k] * (1.0 + if j == k { sys.m as f64 } else { 0.0 }),
                        Scheme::Zf => if j == k { gain * c1[k] } else { 0.0 },
                    })
                    .collect();
                let al = alpha_m(k);
                let mut lhs = spend;
                for j in 0..n {
                    lhs.push((&al * &var(ps[j])).scale(s2));
                    if a_coef[j] > 0.0 {
                        lhs.push((&(&al * &var(pp[k])) * &var(ps[j])).scale(a_coef[j]));
                    }
                }
                let bound = amgm_bound(&a_coef, s2, &anchor.p_s, anchor.p_p[k])?;
                gp.add_le(lhs, bound.to_monomial(pp[k], &ps));
            }
        }
    }

    let objective = match slack {
        Some(s) => var(s),
        None => {
            let w_u = anchor.t_u as f64 / sys.t as f64;
            let w_d = anchor.t_d as f64 / sys.t as f64 * sys.bandwidth;
            let mut exps = Vec::with_capacity(2 * n);
            for k in 0..n {
                if w_u > 0.0 {
                    exps.push((chi_u[k], -w_u * log_bound(true_u[k].max(CHI_LO))?.zeta));
                }
                if w_d > 0.0 {
                    exps.push((chi_d[k], -w_d * log_bound(true_d[k].max(CHI_LO))?.zeta));
                }
            }
            Monomial::new(1.0, exps)
        }
    };
    gp.set_objective(objective);

    let built = BuiltGp {
        gp,
        layout: Layout {
            pp,
            pd,
            ps,
            alpha,
            chi_u,
            chi_d,
            slack,
        },
    };
    let clamp = |v: &[f64]| v.iter().map(|x| x.clamp(CHI_LO, CHI_HI)).collect::<Vec<_>>();
    let start = built.point(anchor, &clamp(&true_u), &clamp(&true_d), s_hat.min(SLACK_HI));
    let mut built = built;
    built.gp.anchor = Some(start);
    Ok(built)
}
