//! Dense two-phase simplex with Bland's rule. Ties between optimal vertices
//! are broken toward the lexicographically smallest point.

use crate::error::{Error, Result};

const EPS: f64 = 1e-9;

/// minimize `c . x` s.t. `a_ub x <= b_ub`, `a_eq x = b_eq`, `lower <= x <= upper`.
/// `upper` entries may be infinite; `lower` entries must be finite.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LpProblem {
    pub fn new(c: Vec<f64>) -> Self {
        let n = c.len();
        LpProblem {
            c,
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            ..Default::default()
        }
    }

    pub fn le(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    pub fn eq(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self
    }

    pub fn bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.c.len();
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Malformed("LP bound length mismatch".into()));
        }
        if !finite(&self.c) || !finite(&self.lower) || !finite(&self.b_ub) || !finite(&self.b_eq) {
            return Err(Error::Malformed("LP data must be finite".into()));
        }
        for r in self.a_ub.iter().chain(&self.a_eq) {
            if r.len() != n || !finite(r) {
                return Err(Error::Malformed("LP row has wrong length or non-finite data".into()));
            }
        }
        if self.a_ub.len() != self.b_ub.len() || self.a_eq.len() != self.b_eq.len() {
            return Err(Error::Malformed("LP rhs length mismatch".into()));
        }
        Ok(())
    }
}

struct Tableau {
    /// rows x (cols + 1); last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pr = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, q) in row.iter_mut().zip(&pr) {
                        *v -= f * q;
                    }
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost . z` over allowed columns. Returns false when unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> bool {
        let m = self.t.len();
        loop {
            // reduced costs
            let mut enter = None;
            for j in 0..self.cols {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let mut rc = cost[j];
                for i in 0..m {
                    rc -= cost[self.basis[i]] * self.t[i][j];
                }
                if rc < -EPS {
                    enter = Some(j);
                    break;
                }
            }
            let Some(j) = enter else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i][j];
                if a > EPS {
                    let ratio = self.t[i][self.cols] / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - EPS || (ratio <= lr + EPS && self.basis[i] < self.basis[li]) {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, _)) = leave else { return false };
            self.pivot(r, j);
        }
    }
}

fn simplex(p: &LpProblem) -> LpResult {
    let n = p.c.len();
    // shift to x' = x - lower >= 0 and collect rows as (coeffs, rhs, is_eq)
    let shift = |row: &[f64], rhs: f64| rhs - row.iter().zip(&p.lower).map(|(a, l)| a * l).sum::<f64>();
    let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    for (r, b) in p.a_ub.iter().zip(&p.b_ub) {
        rows.push((r.clone(), shift(r, *b), false));
    }
    for i in 0..n {
        if p.upper[i].is_finite() {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            rows.push((r, p.upper[i] - p.lower[i], false));
        }
    }
    for (r, b) in p.a_eq.iter().zip(&p.b_eq) {
        rows.push((r.clone(), shift(r, *b), true));
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| !r.2).count();
    let cols = n + n_slack + m;
    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut slack = n;
    for (i, (row, rhs, is_eq)) in rows.iter().enumerate() {
        t[i][..n].copy_from_slice(row);
        if !is_eq {
            t[i][slack] = 1.0;
            slack += 1;
        }
        t[i][cols] = *rhs;
        if *rhs < 0.0 {
            for v in t[i].iter_mut() {
                *v = -*v;
            }
        }
        t[i][n + n_slack + i] = 1.0;
    }
    let mut tab = Tableau {
        t,
        basis: (0..m).map(|i| n + n_slack + i).collect(),
        cols,
    };
    let art0 = n + n_slack;
    let mut cost1 = vec![0.0; cols];
    cost1[art0..].iter_mut().for_each(|c| *c = 1.0);
    tab.optimize(&cost1, &vec![true; cols]);
    let infeas: f64 = (0..m)
        .filter(|&i| tab.basis[i] >= art0)
        .map(|i| tab.t[i][cols])
        .sum();
    if infeas > 1e-7 {
        return LpResult {
            status: LpStatus::Infeasible,
            x: vec![f64::NAN; n],
            objective: f64::NAN,
        };
    }
    // drive remaining artificials out of the basis
    let mut i = 0;
    while i < tab.t.len() {
        if tab.basis[i] >= art0 {
            if let Some(j) = (0..art0).find(|&j| tab.t[i][j].abs() > EPS) {
                tab.pivot(i, j);
                i += 1;
            } else {
                tab.t.remove(i);
                tab.basis.remove(i);
            }
        } else {
            i += 1;
        }
    }
    let mut cost2 = vec![0.0; cols];
    cost2[..n].copy_from_slice(&p.c);
    let allowed: Vec<bool> = (0..cols).map(|j| j < art0).collect();
    if !tab.optimize(&cost2, &allowed) {
        return LpResult {
            status: LpStatus::Unbounded,
            x: vec![f64::NAN; n],
            objective: f64::NEG_INFINITY,
        };
    }
    let mut x = p.lower.clone();
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] += tab.t[r][cols];
        }
    }
    let objective = p.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    LpResult {
        status: LpStatus::Optimal,
        x,
        objective,
    }
}

/// Solves the LP and then, among optimal points, minimizes `x_1`, then
/// `x_2`, and so on.
pub fn solve_lp(p: &LpProblem) -> Result<LpResult> {
    p.validate()?;
    let first = simplex(p);
    if first.status != LpStatus::Optimal {
        return Ok(first);
    }
    let n = p.c.len();
    let mut q = p.clone();
    let z = first.objective;
    q.a_ub.push(p.c.clone());
    q.b_ub.push(z + 1e-11 * (1.0 + z.abs()));
    let mut x = first.x;
    for i in 0..n {
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        q.c = c;
        let r = simplex(&q);
        if r.status != LpStatus::Optimal {
            break;
        }
        x = r.x;
        q.upper[i] = x[i].max(q.lower[i]) + 1e-11 * (1.0 + x[i].abs());
    }
    let objective = p.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(LpResult {
        status: LpStatus::Optimal,
        x,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_tie_break_is_lexicographic() {
        // maximize T_U + T_D subject to T_U + T_D <= 390
        let p = LpProblem::new(vec![-1.0, -1.0]).le(vec![1.0, 1.0], 390.0);
        let r = solve_lp(&p).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 390.0).abs() < 1e-6);
        assert!(r.x[0].abs() < 1e-6 && (r.x[1] - 390.0).abs() < 1e-6);
    }

    #[test]
    fn unique_vertex() {
        // max 3x + 2y s.t. x + y <= 4, x + 3y <= 6, x <= 3
        let p = LpProblem::new(vec![-3.0, -2.0])
            .le(vec![1.0, 1.0], 4.0)
            .le(vec![1.0, 3.0], 6.0)
            .le(vec![1.0, 0.0], 3.0);
        let r = solve_lp(&p).unwrap();
        assert!((r.x[0] - 3.0).abs() < 1e-9 && (r.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded_are_distinct() {
        let p = LpProblem::new(vec![1.0]).le(vec![1.0], -1.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);
        let p = LpProblem::new(vec![-1.0]);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn bounds_and_equalities() {
        // min x - y, x + y = 5, 1 <= x <= 4, 2 <= y <= 3
        let p = LpProblem::new(vec![1.0, -1.0])
            .eq(vec![1.0, 1.0], 5.0)
            .bounds(vec![1.0, 2.0], vec![4.0, 3.0]);
        let r = solve_lp(&p).unwrap();
        assert!((r.x[0] - 2.0).abs() < 1e-9 && (r.x[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn matches_vertex_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let c = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let rows: Vec<(Vec<f64>, f64)> = (0..4)
                .map(|_| (vec![rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0)], rng.random_range(1.0..5.0)))
                .collect();
            let mut p = LpProblem::new(c.clone()).bounds(vec![0.0; 2], vec![10.0; 2]);
            for (r, b) in &rows {
                p = p.le(r.clone(), *b);
            }
            let r = solve_lp(&p).unwrap();
            // all pairwise intersections of active lines, including the box
            let mut lines = rows.clone();
            lines.push((vec![1.0, 0.0], 0.0));
            lines.push((vec![0.0, 1.0], 0.0));
            lines.push((vec![1.0, 0.0], 10.0));
            lines.push((vec![0.0, 1.0], 10.0));
            let mut best = f64::INFINITY;
            for i in 0..lines.len() {
                for j in i + 1..lines.len() {
                    let (a, b) = (&lines[i], &lines[j]);
                    let det = a.0[0] * b.0[1] - a.0[1] * b.0[0];
                    if det.abs() < 1e-12 {
                        continue;
                    }
                    let x = (a.1 * b.0[1] - a.0[1] * b.1) / det;
                    let y = (a.0[0] * b.1 - a.1 * b.0[0]) / det;
                    let ok = (-1e-9..=10.0 + 1e-9).contains(&x)
                        && (-1e-9..=10.0 + 1e-9).contains(&y)
                        && rows.iter().all(|(r, b)| r[0] * x + r[1] * y <= b + 1e-9);
                    if ok {
                        best = best.min(c[0] * x + c[1] * y);
                    }
                }
            }
            assert_eq!(r.status, LpStatus::Optimal);
            assert!((r.objective - best).abs() < 1e-7, "{} vs {best}", r.objective);
        }
    }
}
