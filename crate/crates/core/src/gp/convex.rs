//! Log-domain image of a GP. With `x = x_hat * exp(y)` every posynomial
//! constraint becomes `log sum exp(a_j . y + b_j) <= 0` and every monomial
//! equality becomes affine.

use super::{GpProblem, Monomial};
use crate::error::{Error, Result};

/// `log sum_j exp(b_j + a_j . y)` over a small set of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LseFunction {
    /// Global ids of the variables this function touches.
    pub vars: Vec<usize>,
    /// `(b_j, a_j)` with `a_j` indexed locally into `vars`.
    pub terms: Vec<(f64, Vec<(usize, f64)>)>,
}

impl LseFunction {
    /// Builds from global sparse rows.
    pub fn from_terms(terms: Vec<(f64, Vec<(usize, f64)>)>) -> Self {
        let mut vars: Vec<usize> = terms
            .iter()
            .flat_map(|(_, a)| a.iter().map(|&(i, _)| i))
            .collect();
        vars.sort_unstable();
        vars.dedup();
        let local = |g: usize| vars.binary_search(&g).expect("var present");
        let terms = terms
            .iter()
            .map(|(b, a)| (*b, a.iter().map(|&(i, e)| (local(i), e)).collect()))
            .collect();
        LseFunction { vars, terms }
    }

    /// Single affine term `b + a . y`.
    pub fn affine(b: f64, a: Vec<(usize, f64)>) -> Self {
        Self::from_terms(vec![(b, a)])
    }

    pub fn is_affine(&self) -> bool {
        self.terms.len() == 1
    }

    fn exponents(&self, y: &[f64], z: &mut Vec<f64>) {
        z.clear();
        for (b, a) in &self.terms {
            z.push(a.iter().fold(*b, |acc, &(l, e)| acc + e * y[self.vars[l]]));
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let mut z = Vec::with_capacity(self.terms.len());
        self.exponents(y, &mut z);
        lse(&z)
    }

    /// Value, local gradient and local Hessian (row-major, `vars.len()^2`).
    pub fn derivs(&self, y: &[f64], g: &mut Vec<f64>, h: &mut Vec<f64>, scratch: &mut Vec<f64>) -> f64 {
        let nv = self.vars.len();
        g.clear();
        g.resize(nv, 0.0);
        h.clear();
        h.resize(nv * nv, 0.0);
        self.exponents(y, scratch);
        let f = lse(scratch);
        if self.is_affine() {
            for &(l, e) in &self.terms[0].1 {
                g[l] += e;
            }
            return f;
        }
        for (j, (_, a)) in self.terms.iter().enumerate() {
            let p = (scratch[j] - f).exp();
            for &(l, e) in a {
                g[l] += p * e;
                for &(r, d) in a {
                    h[l * nv + r] += p * e * d;
                }
            }
        }
        for l in 0..nv {
            for r in 0..nv {
                h[l * nv + r] -= g[l] * g[r];
            }
        }
        f
    }

    /// Same function with `delta` added to every exponent's variable `v`.
    pub(crate) fn shifted(&self, v: usize, delta: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(b, a)| {
                let mut row: Vec<(usize, f64)> =
                    a.iter().map(|&(l, e)| (self.vars[l], e)).collect();
                row.push((v, delta));
                (*b, row)
            })
            .collect();
        Self::from_terms(terms)
    }
}

fn lse(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Convex program: minimize `objective(y)` s.t. `ineq_i(y) <= 0`, `A y = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProgram {
    pub n: usize,
    /// `x = scale * exp(y)`.
    pub scale: Vec<f64>,
    pub objective: LseFunction,
    /// Problem constraints followed by box constraints.
    pub ineq: Vec<LseFunction>,
    /// Number of leading entries of `ineq` that come from problem constraints.
    pub n_problem_ineq: usize,
    pub eq_rows: Vec<Vec<(usize, f64)>>,
    pub eq_rhs: Vec<f64>,
}

impl ConvexProgram {
    pub fn x_from_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.scale).map(|(y, s)| s * y.exp()).collect()
    }

    pub fn y_from_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.scale).map(|(x, s)| (x / s).ln()).collect()
    }
}

fn mono_row(m: &Monomial, scale: &[f64]) -> (f64, Vec<(usize, f64)>) {
    let b = m
        .exps
        .iter()
        .fold(m.coeff.ln(), |acc, &(i, e)| acc + e * scale[i].ln());
    (b, m.exps.clone())
}

pub fn to_convex(p: &GpProblem) -> Result<ConvexProgram> {
    p.validate()?;
    let scale = p.scaling_point();
    let n = p.n_vars();
    let objective = LseFunction::from_terms(
        p.objective.terms.iter().map(|m| mono_row(m, &scale)).collect(),
    );
    let mut ineq = Vec::with_capacity(p.ineq.len() + 2 * n);
    for (lhs, rhs) in &p.ineq {
        let inv = rhs.recip();
        ineq.push(LseFunction::from_terms(
            lhs.terms.iter().map(|t| mono_row(&(t * &inv), &scale)).collect(),
        ));
    }
    let n_problem_ineq = ineq.len();
    let mut eq_rows = Vec::new();
    let mut eq_rhs = Vec::new();
    for (a, b) in &p.eq {
        let (c, row) = mono_row(&(a * &b.recip()), &scale);
        if row.is_empty() {
            if c.abs() > 1e-12 {
                return Err(Error::Malformed("constant equality that never holds".into()));
            }
            continue;
        }
        eq_rows.push(row);
        eq_rhs.push(-c);
    }
    for i in 0..n {
        let lo = (p.lower[i] / scale[i]).ln();
        let hi = (p.upper[i] / scale[i]).ln();
        if p.lower[i] == p.upper[i] {
            eq_rows.push(vec![(i, 1.0)]);
            eq_rhs.push(lo);
            continue;
        }
        ineq.push(LseFunction::affine(-hi, vec![(i, 1.0)]));
        ineq.push(LseFunction::affine(lo, vec![(i, -1.0)]));
    }
    Ok(ConvexProgram {
        n,
        scale,
        objective,
        ineq,
        n_problem_ineq,
        eq_rows,
        eq_rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Posynomial;

    #[test]
    fn single_monomial_is_affine() {
        let mut p = GpProblem::new();
        let x = p.add_var("x", 0.1, 10.0);
        p.set_objective(Monomial::var(x));
        p.add_le(Monomial::new(3.0, [(x, 2.0)]), Monomial::constant(1.0));
        let c = to_convex(&p).unwrap();
        assert!(c.ineq[0].is_affine());
        let y = [0.3];
        let xv = c.x_from_y(&y)[0];
        assert!((c.ineq[0].eval(&y) - (3.0 * xv * xv).ln()).abs() < 1e-12);
    }

    #[test]
    fn residuals_round_trip() {
        let mut p = GpProblem::new();
        let x = p.add_var("x", 0.01, 100.0);
        let y = p.add_var("y", 0.01, 100.0);
        p.set_objective(Monomial::new(1.0, [(x, -1.0), (y, -0.5)]));
        let lhs = Posynomial::new(vec![
            Monomial::new(2.0, [(x, 1.0)]),
            Monomial::new(0.3, [(x, 0.5), (y, 2.0)]),
            Monomial::constant(0.1),
        ]);
        p.add_le(lhs.clone(), Monomial::new(4.0, [(y, 0.7)]));
        p.anchor = Some(vec![0.5, 3.0]);
        let c = to_convex(&p).unwrap();
        for pt in [[0.2, 0.4], [3.0, 7.0], [50.0, 0.05]] {
            let want = (lhs.eval(&pt) / (4.0 * pt[1].powf(0.7))).ln();
            let got = c.ineq[0].eval(&c.y_from_x(&pt));
            assert!((want - got).abs() < 1e-12, "{want} {got}");
        }
    }

    #[test]
    fn rejects_bad_coefficients() {
        let mut p = GpProblem::new();
        let x = p.add_var("x", 0.1, 10.0);
        p.set_objective(Monomial::var(x));
        p.add_le(Monomial::new(-1.0, [(x, 1.0)]), Monomial::constant(1.0));
        assert!(matches!(to_convex(&p), Err(Error::Malformed(_))));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = LseFunction::from_terms(vec![
            (0.2, vec![(0, 1.0), (2, -0.5)]),
            (-0.4, vec![(1, 2.0)]),
            (0.0, vec![(0, -1.0), (1, 0.3), (2, 1.0)]),
        ]);
        let y = [0.3, -0.2, 0.5];
        let (mut g, mut h, mut s) = (Vec::new(), Vec::new(), Vec::new());
        f.derivs(&y, &mut g, &mut h, &mut s);
        let eps = 1e-6;
        for i in 0..3 {
            let mut a = y;
            let mut b = y;
            a[i] += eps;
            b[i] -= eps;
            let fd = (f.eval(&a) - f.eval(&b)) / (2.0 * eps);
            assert!((fd - g[i]).abs() < 1e-8);
            let (mut ga, mut gb) = (Vec::new(), Vec::new());
            f.derivs(&a, &mut ga, &mut Vec::new(), &mut s);
            f.derivs(&b, &mut gb, &mut Vec::new(), &mut s);
            for j in 0..3 {
                let fd = (ga[j] - gb[j]) / (2.0 * eps);
                assert!((fd - h[j * 3 + i]).abs() < 1e-6);
            }
        }
    }
}
