use std::ops::{Add, Mul};

/// `coeff * prod x_v^e`. Exponents are kept sorted by variable id with no
/// duplicates and no zero powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub exps: Vec<(usize, f64)>,
}

impl Monomial {
    pub fn new(coeff: f64, exps: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut v: Vec<(usize, f64)> = exps.into_iter().collect();
        v.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(v.len());
        for (i, e) in v {
            match out.last_mut() {
                Some((j, f)) if *j == i => *f += e,
                _ => out.push((i, e)),
            }
        }
        out.retain(|&(_, e)| e != 0.0);
        Monomial { coeff, exps: out }
    }

    pub fn constant(c: f64) -> Self {
        Monomial {
            coeff: c,
            exps: Vec::new(),
        }
    }

    pub fn var(i: usize) -> Self {
        Monomial {
            coeff: 1.0,
            exps: vec![(i, 1.0)],
        }
    }

    pub fn pow(&self, p: f64) -> Self {
        Monomial::new(
            self.coeff.powf(p),
            self.exps.iter().map(|&(i, e)| (i, e * p)),
        )
    }

    pub fn recip(&self) -> Self {
        self.pow(-1.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        Monomial {
            coeff: self.coeff * c,
            exps: self.exps.clone(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exps
            .iter()
            .fold(self.coeff, |acc, &(i, e)| acc * x[i].powf(e))
    }

    /// `log(coeff) + sum e_v y_v` with `y = log x`.
    pub fn log_eval(&self, y: &[f64]) -> f64 {
        self.exps
            .iter()
            .fold(self.coeff.ln(), |acc, &(i, e)| acc + e * y[i])
    }

    fn same_powers(&self, o: &Monomial) -> bool {
        self.exps == o.exps
    }
}

impl Mul for &Monomial {
    type Output = Monomial;
    fn mul(self, o: &Monomial) -> Monomial {
        Monomial::new(
            self.coeff * o.coeff,
            self.exps.iter().chain(&o.exps).copied(),
        )
    }
}

impl Mul for Monomial {
    type Output = Monomial;
    fn mul(self, o: Monomial) -> Monomial {
        &self * &o
    }
}

impl Mul<f64> for Monomial {
    type Output = Monomial;
    fn mul(self, c: f64) -> Monomial {
        self.scale(c)
    }
}

/// Sum of monomials with positive coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Posynomial {
    pub terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn new(terms: Vec<Monomial>) -> Self {
        let mut p = Posynomial { terms: Vec::new() };
        for t in terms {
            p.push(t);
        }
        p
    }

    /// Adds a term, merging it with an existing term of identical powers.
    pub fn push(&mut self, t: Monomial) {
        if let Some(m) = self.terms.iter_mut().find(|m| m.same_powers(&t)) {
            m.coeff += t.coeff;
        } else {
            self.terms.push(t);
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|m| m.eval(x)).sum()
    }

    pub fn mul_mono(&self, m: &Monomial) -> Posynomial {
        Posynomial {
            terms: self.terms.iter().map(|t| t * m).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Posynomial {
        Posynomial {
            terms: self.terms.iter().map(|t| t.scale(c)).collect(),
        }
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }
}

impl From<Monomial> for Posynomial {
    fn from(m: Monomial) -> Self {
        Posynomial { terms: vec![m] }
    }
}

impl Add for Posynomial {
    type Output = Posynomial;
    fn add(mut self, o: Posynomial) -> Posynomial {
        for t in o.terms {
            self.push(t);
        }
        self
    }
}

impl Add<Monomial> for Posynomial {
    type Output = Posynomial;
    fn add(mut self, o: Monomial) -> Posynomial {
        self.push(o);
        self
    }
}

impl Add for Monomial {
    type Output = Posynomial;
    fn add(self, o: Monomial) -> Posynomial {
        Posynomial::new(vec![self, o])
    }
}

impl Mul for &Posynomial {
    type Output = Posynomial;
    fn mul(self, o: &Posynomial) -> Posynomial {
        let mut out = Posynomial::default();
        for a in &self.terms {
            for b in &o.terms {
                out.push(a * b);
            }
        }
        out
    }
}

impl Mul<&Monomial> for Posynomial {
    type Output = Posynomial;
    fn mul(self, m: &Monomial) -> Posynomial {
        self.mul_mono(m)
    }
}

impl std::iter::Sum<Monomial> for Posynomial {
    fn sum<I: Iterator<Item = Monomial>>(iter: I) -> Self {
        Posynomial::new(iter.collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_algebra() {
        let x = Monomial::var(0);
        let y = Monomial::var(1);
        let m = (&x * &y.pow(2.0)).scale(3.0);
        assert_eq!(m.exps, vec![(0, 1.0), (1, 2.0)]);
        assert!((m.eval(&[2.0, 3.0]) - 54.0).abs() < 1e-12);
        let one = &m * &m.recip();
        assert!(one.exps.is_empty());
        assert!((one.coeff - 1.0).abs() < 1e-15);
        assert!((m.log_eval(&[2f64.ln(), 3f64.ln()]) - 54f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn posynomial_merges_like_terms() {
        let x = Monomial::var(0);
        let p = x.clone() + x.scale(2.0);
        assert_eq!(p.terms.len(), 1);
        assert_eq!(p.terms[0].coeff, 3.0);
        let q = &(Monomial::var(0) + Monomial::constant(1.0)) * &(Monomial::var(0) + Monomial::constant(1.0));
        // (x + 1)^2 = x^2 + 2x + 1
        assert_eq!(q.terms.len(), 3);
        assert!((q.eval(&[2.0]) - 9.0).abs() < 1e-12);
    }
}
