//! Monomial and affine-in-log minorants used to condense the non-convex
//! constraints into geometric-program form.

use crate::error::{Error, Result};
use crate::gp::Monomial;

/// Anchors below this value are raised to it before computing coefficients.
pub const ANCHOR_FLOOR: f64 = 1e-12;

fn check_anchor(x: f64, what: &str) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("{what} anchor must be positive, got {x}")));
    }
    Ok(x.max(ANCHOR_FLOOR))
}

/// `log2(1 + x) >= zeta log2(x) + nu`, tight at `x_hat`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogBoundCoeffs {
    pub zeta: f64,
    pub nu: f64,
    pub x_hat: f64,
}

impl LogBoundCoeffs {
    pub fn eval(&self, x: f64) -> f64 {
        self.zeta * x.log2() + self.nu
    }
}

pub fn log_bound(x_hat: f64) -> Result<LogBoundCoeffs> {
    let x = check_anchor(x_hat, "log bound")?;
    let zeta = x / (1.0 + x);
    let nu = x.ln_1p() / std::f64::consts::LN_2 - zeta * x.log2();
    Ok(LogBoundCoeffs { zeta, nu, x_hat: x })
}

/// `delta * prod x_i^{exponents_i}` over a list of positive variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBound {
    pub delta: f64,
    pub exponents: Vec<f64>,
    pub anchor: Vec<f64>,
}

impl MonomialBound {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x)
            .fold(self.delta, |acc, (e, v)| if *e == 0.0 { acc } else { acc * v.powf(*e) })
    }

    /// Symbolic form over the given GP variable ids (same order as `anchor`).
    pub fn to_monomial(&self, vars: &[usize]) -> Monomial {
        assert_eq!(vars.len(), self.exponents.len());
        Monomial::new(
            self.delta,
            vars.iter().copied().zip(self.exponents.iter().copied()),
        )
    }
}

/// AM-GM condensation of `B sum_k' p^s_k' + p^p sum_k' A_k' p^s_k'`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmgmBound {
    pub delta: f64,
    pub omega_p: f64,
    pub omega_s: Vec<f64>,
    /// Weights of the individual `B p^s_k'` and `p^p A_k' p^s_k'` terms.
    pub term_weights: (Vec<f64>, Vec<f64>),
    pub pp_hat: f64,
    pub ps_hat: Vec<f64>,
}

/// Target posynomial of [`amgm_bound`].
pub fn amgm_target(a: &[f64], b: f64, ps: &[f64], pp: f64) -> f64 {
    let sum: f64 = ps.iter().sum();
    let weighted: f64 = a.iter().zip(ps).map(|(a, p)| a * p).sum();
    b * sum + pp * weighted
}

/// Entries of `a` may be zero; the corresponding terms simply drop out.
pub fn amgm_bound(a: &[f64], b: f64, ps_hat: &[f64], pp_hat: f64) -> Result<AmgmBound> {
    if a.len() != ps_hat.len() || a.is_empty() {
        return Err(Error::Domain("A and p^s anchor must have equal nonzero length".into()));
    }
    if !(b > 0.0) || a.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::Domain("AM-GM bound needs B > 0 and A >= 0".into()));
    }
    if a.iter().all(|&x| x == 0.0) {
        return Err(Error::Domain("AM-GM bound needs at least one positive A".into()));
    }
    let pp = check_anchor(pp_hat, "p^p")?;
    let ps = ps_hat
        .iter()
        .map(|&p| check_anchor(p, "p^s"))
        .collect::<Result<Vec<_>>>()?;
    let s = amgm_target(a, b, &ps, pp);
    let w1: Vec<f64> = ps.iter().map(|p| b * p / s).collect();
    let w2: Vec<f64> = a.iter().zip(&ps).map(|(a, p)| pp * a * p / s).collect();
    let omega_p: f64 = w2.iter().sum();
    let omega_s: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| x + y).collect();
    let log_mono = omega_p * pp.ln()
        + omega_s
            .iter()
            .zip(&ps)
            .map(|(w, p)| w * p.ln())
            .sum::<f64>();
    Ok(AmgmBound {
        delta: s / log_mono.exp(),
        omega_p,
        omega_s,
        term_weights: (w1, w2),
        pp_hat: pp,
        ps_hat: ps,
    })
}

impl AmgmBound {
    pub fn eval(&self, ps: &[f64], pp: f64) -> f64 {
        self.as_monomial_bound().eval(&std::iter::once(pp).chain(ps.iter().copied()).collect::<Vec<_>>())
    }

    /// Variables ordered as `(p^p, p^s_1, ..., p^s_K)`.
    pub fn as_monomial_bound(&self) -> MonomialBound {
        MonomialBound {
            delta: self.delta,
            exponents: std::iter::once(self.omega_p)
                .chain(self.omega_s.iter().copied())
                .collect(),
            anchor: std::iter::once(self.pp_hat)
                .chain(self.ps_hat.iter().copied())
                .collect(),
        }
    }

    pub fn to_monomial(&self, pp_var: usize, ps_vars: &[usize]) -> Monomial {
        let vars: Vec<usize> = std::iter::once(pp_var).chain(ps_vars.iter().copied()).collect();
        self.as_monomial_bound().to_monomial(&vars)
    }
}

/// `prod (1 + x_j) >= psi prod x_j^{phi_j}`, tight at `x_hat`. The bound is
/// separable: `psi = prod psi_j` with `(1 + x_j) >= psi_j x_j^{phi_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductBound {
    pub psi: f64,
    pub phi: Vec<f64>,
    pub psi_j: Vec<f64>,
    pub x_hat: Vec<f64>,
}

pub fn product_bound(x_hat: &[f64]) -> Result<ProductBound> {
    let xs = x_hat
        .iter()
        .map(|&x| check_anchor(x, "product bound"))
        .collect::<Result<Vec<_>>>()?;
    let phi: Vec<f64> = xs.iter().map(|x| x / (1.0 + x)).collect();
    let psi_j: Vec<f64> = xs
        .iter()
        .zip(&phi)
        .map(|(x, f)| ((1.0 + x).ln() - f * x.ln()).exp())
        .collect();
    Ok(ProductBound {
        psi: psi_j.iter().product(),
        phi,
        psi_j,
        x_hat: xs,
    })
}

impl ProductBound {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.as_monomial_bound().eval(x)
    }

    pub fn as_monomial_bound(&self) -> MonomialBound {
        MonomialBound {
            delta: self.psi,
            exponents: self.phi.clone(),
            anchor: self.x_hat.clone(),
        }
    }
}
