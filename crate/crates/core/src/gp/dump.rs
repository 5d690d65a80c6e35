//! Plain-text GP dump, one item per line:
//!
//! ```text
//! var <name> <lower> <upper>
//! anchor <x_1> ... <x_n>
//! obj <term> ; <term> ...
//! le <term> ; <term> ... | <term>
//! eq <term> | <term>
//! ```
//!
//! A term is `<coeff> <var>:<exp> <var>:<exp> ...` with zero-based variable
//! ids. Lines starting with `#` are comments.

use std::fmt::Write;

use super::{GpProblem, Monomial, Posynomial};
use crate::error::{Error, Result};

fn term(m: &Monomial) -> String {
    let mut s = format!("{:e}", m.coeff);
    for &(i, e) in &m.exps {
        let _ = write!(s, " {i}:{e:e}");
    }
    s
}

fn posy(p: &Posynomial) -> String {
    p.terms.iter().map(term).collect::<Vec<_>>().join(" ; ")
}

pub fn dump(p: &GpProblem) -> String {
    let mut out = String::from("# gp v1\n");
    for i in 0..p.n_vars() {
        let _ = writeln!(out, "var {} {:e} {:e}", p.names[i], p.lower[i], p.upper[i]);
    }
    if let Some(a) = &p.anchor {
        let vals: Vec<String> = a.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "anchor {}", vals.join(" "));
    }
    let _ = writeln!(out, "obj {}", posy(&p.objective));
    for (l, r) in &p.ineq {
        let _ = writeln!(out, "le {} | {}", posy(l), term(r));
    }
    for (l, r) in &p.eq {
        let _ = writeln!(out, "eq {} | {}", term(l), term(r));
    }
    out
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Malformed(format!("line {line}: {msg}"))
}

fn num(s: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|_| bad(line, format!("bad number '{s}'")))
}

fn parse_term(s: &str, line: usize) -> Result<Monomial> {
    let mut it = s.split_whitespace();
    let coeff = num(it.next().ok_or_else(|| bad(line, "empty term"))?, line)?;
    let mut exps = Vec::new();
    for tok in it {
        let (v, e) = tok
            .split_once(':')
            .ok_or_else(|| bad(line, format!("expected var:exp, got '{tok}'")))?;
        let v: usize = v.parse().map_err(|_| bad(line, format!("bad var id '{v}'")))?;
        exps.push((v, num(e, line)?));
    }
    Ok(Monomial::new(coeff, exps))
}

fn parse_posy(s: &str, line: usize) -> Result<Posynomial> {
    Ok(Posynomial {
        terms: s
            .split(';')
            .map(|t| parse_term(t, line))
            .collect::<Result<Vec<_>>>()?,
    })
}

pub fn parse(text: &str) -> Result<GpProblem> {
    let mut p = GpProblem::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let (kw, rest) = s.split_once(' ').unwrap_or((s, ""));
        match kw {
            "var" => {
                let f: Vec<&str> = rest.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(bad(line, "var needs name, lower, upper"));
                }
                p.add_var(f[0], num(f[1], line)?, num(f[2], line)?);
            }
            "anchor" => {
                p.anchor = Some(
                    rest.split_whitespace()
                        .map(|v| num(v, line))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            "obj" => p.objective = parse_posy(rest, line)?,
            "le" | "eq" => {
                let (l, r) = rest
                    .split_once('|')
                    .ok_or_else(|| bad(line, "constraint needs '|'"))?;
                let rhs = parse_term(r, line)?;
                if kw == "le" {
                    p.ineq.push((parse_posy(l, line)?, rhs));
                } else {
                    p.eq.push((parse_term(l, line)?, rhs));
                }
            }
            other => return Err(bad(line, format!("unknown keyword '{other}'"))),
        }
    }
    p.validate()?;
    Ok(p)
}
