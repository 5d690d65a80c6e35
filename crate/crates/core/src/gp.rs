//! Geometric programming: posynomial algebra, a log-domain barrier solver
//! with phase-I feasibility detection, and a small dense simplex LP solver.

mod convex;
pub mod dump;
pub mod lp;
mod posy;
mod solver;

pub use convex::{to_convex, ConvexProgram, LseFunction};
pub use lp::{solve_lp, LpProblem, LpResult, LpStatus};
pub use posy::{Monomial, Posynomial};
pub use solver::{solve, SolveResult, SolveStatus, SolverOptions, StepRecord};

use crate::error::{Error, Result};

/// A GP in standard form:
/// minimize `objective` subject to `lhs <= rhs` (posynomial over monomial),
/// `lhs = rhs` (monomials) and a positive box on every variable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GpProblem {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub objective: Posynomial,
    pub ineq: Vec<(Posynomial, Monomial)>,
    pub eq: Vec<(Monomial, Monomial)>,
    /// Point used to scale the log variables; defaults to the geometric mean
    /// of each box.
    pub anchor: Option<Vec<f64>>,
}

impl GpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.names.push(name.into());
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn var(&self, i: usize) -> Monomial {
        Monomial::var(i)
    }

    pub fn set_objective(&mut self, p: impl Into<Posynomial>) {
        self.objective = p.into();
    }

    /// `lhs <= rhs`.
    pub fn add_le(&mut self, lhs: impl Into<Posynomial>, rhs: Monomial) {
        self.ineq.push((lhs.into(), rhs));
    }

    pub fn add_eq(&mut self, lhs: Monomial, rhs: Monomial) {
        self.eq.push((lhs, rhs));
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Malformed("box length mismatch".into()));
        }
        for i in 0..n {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if !(lo > 0.0 && hi.is_finite() && lo <= hi) {
                return Err(Error::Malformed(format!(
                    "variable {} needs a positive finite box, got [{lo}, {hi}]",
                    self.names[i]
                )));
            }
        }
        if self.objective.terms.is_empty() {
            return Err(Error::Malformed("empty objective".into()));
        }
        let check_m = |m: &Monomial| -> Result<()> {
            if !(m.coeff > 0.0) || !m.coeff.is_finite() {
                return Err(Error::Malformed(format!(
                    "non-positive coefficient {}",
                    m.coeff
                )));
            }
            if m.exps.iter().any(|&(v, e)| v >= n || !e.is_finite()) {
                return Err(Error::Malformed("bad variable id or exponent".into()));
            }
            Ok(())
        };
        for m in &self.objective.terms {
            check_m(m)?;
        }
        for (p, m) in &self.ineq {
            if p.terms.is_empty() {
                return Err(Error::Malformed("empty constraint posynomial".into()));
            }
            p.terms.iter().try_for_each(check_m)?;
            check_m(m)?;
        }
        for (a, b) in &self.eq {
            check_m(a)?;
            check_m(b)?;
        }
        if let Some(a) = &self.anchor {
            if a.len() != n || a.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::Malformed("anchor must be positive with length n".into()));
            }
        }
        Ok(())
    }

    /// Scaling point, clamped into the box.
    pub fn scaling_point(&self) -> Vec<f64> {
        (0..self.n_vars())
            .map(|i| {
                let (lo, hi) = (self.lower[i], self.upper[i]);
                match &self.anchor {
                    Some(a) => a[i].clamp(lo, hi),
                    None => (lo * hi).sqrt(),
                }
            })
            .collect()
    }

    /// Largest relative violation `lhs/rhs - 1` (inequalities) and
    /// `|lhs/rhs - 1|` (equalities and box) at `x`; zero when feasible.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (p, m) in &self.ineq {
            worst = worst.max(p.eval(x) / m.eval(x) - 1.0);
        }
        for (a, b) in &self.eq {
            worst = worst.max((a.eval(x) / b.eval(x) - 1.0).abs());
        }
        for i in 0..x.len() {
            worst = worst.max(self.lower[i] / x[i] - 1.0);
            worst = worst.max(x[i] / self.upper[i] - 1.0);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }
}
