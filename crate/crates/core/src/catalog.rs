//! Named analytic test functions with exact derivatives of every order.
//!
//! Every entry is a finite sum of terms `c · Π_k g_k(x_{i_k})` where each
//! `g_k` is a one-dimensional factor (integer power, sine, cosine,
//! exponential, real power on `x > 0`, or power of `|x|`). Derivatives follow
//! from the Leibniz rule applied per coordinate, so they are exact up to
//! rounding.
//!
//! Names accepted by [`CatalogFunction::parse`]:
//!
//! * aliases: `x`, `x^2`, `x^3`, `sin`, `cos`, `exp`, `xy`, `sinxsiny`,
//!   `sqrtabs` (`|x|^{1/2}`), `x^1.5` (derivative singular at `x = 0`);
//! * expressions, optionally prefixed by `poly:`: sums of terms such as
//!   `1+2x-3x^2+xy`, `0.5*sin(x)*cos(y)`, `exp(z)`, `abs(x)^0.5`.

use std::fmt;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::multiindex::{binomial, check_dim, MultiIndex};

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Pow(u32),
    Sin,
    Cos,
    Exp,
    /// `x^a` for `x > 0`.
    RealPow(f64),
    /// `|x|^a`.
    AbsPow(f64),
}

impl Kind {
    fn derivative(self, order: u32, x: f64) -> f64 {
        match self {
            Kind::Pow(k) => {
                if order > k {
                    0.0
                } else {
                    falling(k as f64, order) * x.powi((k - order) as i32)
                }
            }
            Kind::Sin => match order % 4 {
                0 => x.sin(),
                1 => x.cos(),
                2 => -x.sin(),
                _ => -x.cos(),
            },
            Kind::Cos => match order % 4 {
                0 => x.cos(),
                1 => -x.sin(),
                2 => -x.cos(),
                _ => x.sin(),
            },
            Kind::Exp => x.exp(),
            Kind::RealPow(a) => {
                let c = falling(a, order);
                if c == 0.0 {
                    0.0
                } else {
                    c * x.powf(a - order as f64)
                }
            }
            Kind::AbsPow(a) => {
                let c = falling(a, order);
                if c == 0.0 {
                    return 0.0;
                }
                let sign = if x < 0.0 && order % 2 == 1 { -1.0 } else { 1.0 };
                sign * c * x.abs().powf(a - order as f64)
            }
        }
    }
}

fn falling(a: f64, k: u32) -> f64 {
    (0..k).map(|i| a - i as f64).product()
}

#[derive(Clone, Debug, PartialEq)]
struct Factor {
    var: usize,
    kind: Kind,
}

#[derive(Clone, Debug, PartialEq)]
struct Term {
    coeff: f64,
    factors: Vec<Factor>,
}

impl Term {
    fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> f64 {
        let mut v = self.coeff;
        for (var, &order) in alpha.entries().iter().enumerate() {
            let on_var: Vec<Kind> = self.factors.iter().filter(|f| f.var == var).map(|f| f.kind).collect();
            let d = leibniz(&on_var, order, x[var]);
            if d == 0.0 {
                return 0.0;
            }
            v *= d;
        }
        v
    }

    fn degree(&self) -> Option<usize> {
        let mut deg = 0;
        for f in &self.factors {
            match f.kind {
                Kind::Pow(k) => deg += k as usize,
                _ => return None,
            }
        }
        Some(deg)
    }
}

fn leibniz(kinds: &[Kind], order: u32, x: f64) -> f64 {
    match kinds {
        [] => {
            if order == 0 {
                1.0
            } else {
                0.0
            }
        }
        [k] => k.derivative(order, x),
        [k, rest @ ..] => (0..=order)
            .map(|j| {
                let a = k.derivative(j, x);
                if a == 0.0 {
                    0.0
                } else {
                    binomial(order as usize, j as usize) * a * leibniz(rest, order - j, x)
                }
            })
            .sum(),
    }
}

/// An analytic scalar field in `n ≤ 3` variables; see the module docs.
#[derive(Clone, Debug, PartialEq)]
pub struct CatalogFunction {
    name: String,
    dim: usize,
    terms: Vec<Term>,
}

/// Names of the built-in aliases.
pub const CATALOG_NAMES: &[&str] = &["x", "x^2", "x^3", "sin", "cos", "exp", "xy", "sinxsiny", "sqrtabs", "x^1.5"];

impl CatalogFunction {
    /// Look up an alias or parse an expression, as a function on `R^n`.
    pub fn parse(name: &str, n: usize) -> Result<Self> {
        check_dim(n)?;
        let trimmed = name.trim();
        let expr = match trimmed {
            "sin" => "sin(x)",
            "cos" => "cos(x)",
            "exp" => "exp(x)",
            "sinxsiny" => "sin(x)*sin(y)",
            "sqrtabs" => "abs(x)^0.5",
            other => other.strip_prefix("poly:").unwrap_or(other),
        };
        let terms = Parser::new(expr).parse()?;
        if let Some(f) = terms.iter().flat_map(|t| &t.factors).find(|f| f.var >= n) {
            return Err(Error::Catalog(format!(
                "'{name}' uses variable {} but the dimension is {n}",
                ["x", "y", "z"][f.var]
            )));
        }
        Ok(Self {
            name: trimmed.to_string(),
            dim: n,
            terms,
        })
    }

    /// The polynomial `Σ c_α x^α` (zero coefficients dropped).
    pub fn polynomial(n: usize, coefficients: &[(MultiIndex, f64)]) -> Result<Self> {
        check_dim(n)?;
        let mut terms = Vec::new();
        for (alpha, c) in coefficients {
            if alpha.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: alpha.dim(),
                });
            }
            if *c == 0.0 {
                continue;
            }
            let factors = alpha
                .entries()
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(var, &e)| Factor { var, kind: Kind::Pow(e) })
                .collect();
            terms.push(Term { coeff: *c, factors });
        }
        let name = format!("poly:{}", render(&terms));
        Ok(Self { name, dim: n, terms })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `D^α f(x)`.
    pub fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.derivative(alpha, x)).sum()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.derivative(&MultiIndex::zero(self.dim), x)
    }

    /// Total degree when every term is a monomial.
    pub fn polynomial_degree(&self) -> Option<usize> {
        let mut deg = 0;
        for t in &self.terms {
            if t.coeff != 0.0 {
                deg = deg.max(t.degree()?);
            }
        }
        Some(deg)
    }
}

impl fmt::Display for CatalogFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl ScalarField for CatalogFunction {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        CatalogFunction::value(self, x)
    }
    fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> Option<f64> {
        Some(CatalogFunction::derivative(self, alpha, x))
    }
    fn polynomial_degree(&self) -> Option<usize> {
        CatalogFunction::polynomial_degree(self)
    }
}

fn render(terms: &[Term]) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let mut s = String::new();
    for (i, t) in terms.iter().enumerate() {
        let c = t.coeff;
        if i > 0 {
            s.push(if c < 0.0 { '-' } else { '+' });
        } else if c < 0.0 {
            s.push('-');
        }
        let a = c.abs();
        if a != 1.0 || t.factors.is_empty() {
            s.push_str(&format!("{a}"));
        }
        for f in &t.factors {
            let v = ["x", "y", "z"][f.var];
            match f.kind {
                Kind::Pow(1) => s.push_str(v),
                Kind::Pow(k) => s.push_str(&format!("{v}^{k}")),
                _ => unreachable!("render is only used for polynomials"),
            }
        }
    }
    s
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn err(&self, what: &str) -> Error {
        Error::Catalog(format!("'{}': {what} at offset {}", self.src, self.pos))
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(w) {
            self.pos += w.len();
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Option<f64> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .char_indices()
            .find(|&(i, c)| {
                !(c.is_ascii_digit() || c == '.' || ((c == 'e' || c == 'E') && i > 0 && rest[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-')) || ((c == '-' || c == '+') && i > 0 && matches!(rest.as_bytes()[i - 1], b'e' | b'E')))
            })
            .map_or(rest.len(), |(i, _)| i);
        if len == 0 {
            return None;
        }
        let v = rest[..len].parse().ok()?;
        self.pos += len;
        Some(v)
    }

    fn var(&mut self) -> Result<usize> {
        self.skip_ws();
        let v = match self.peek() {
            Some('x') => 0,
            Some('y') => 1,
            Some('z') => 2,
            _ => return Err(self.err("expected a variable x, y or z")),
        };
        self.pos += 1;
        Ok(v)
    }

    fn parse(mut self) -> Result<Vec<Term>> {
        let mut terms = Vec::new();
        let mut sign = 1.0;
        if self.eat('-') {
            sign = -1.0;
        } else {
            self.eat('+');
        }
        loop {
            let mut t = self.term()?;
            t.coeff *= sign;
            terms.push(t);
            self.skip_ws();
            if self.eat('+') {
                sign = 1.0;
            } else if self.eat('-') {
                sign = -1.0;
            } else {
                break;
            }
        }
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(self.err("unexpected trailing input"));
        }
        Ok(terms)
    }

    fn term(&mut self) -> Result<Term> {
        let coeff = self.number();
        let mut factors = Vec::new();
        loop {
            self.eat('*');
            self.skip_ws();
            match self.factor()? {
                Some(f) => factors.push(f),
                None => break,
            }
        }
        if coeff.is_none() && factors.is_empty() {
            return Err(self.err("expected a term"));
        }
        // Merge repeated integer powers of one variable.
        let mut merged: Vec<Factor> = Vec::new();
        for f in factors {
            if let Kind::Pow(k) = f.kind {
                if let Some(Factor { kind: Kind::Pow(j), .. }) = merged.iter_mut().find(|g| g.var == f.var && matches!(g.kind, Kind::Pow(_))) {
                    *j += k;
                    continue;
                }
            }
            merged.push(f);
        }
        Ok(Term {
            coeff: coeff.unwrap_or(1.0),
            factors: merged,
        })
    }

    fn factor(&mut self) -> Result<Option<Factor>> {
        for (word, kind) in [("sin(", Kind::Sin), ("cos(", Kind::Cos), ("exp(", Kind::Exp), ("abs(", Kind::AbsPow(1.0))] {
            if self.eat_word(word) {
                let var = self.var()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                let kind = if let Kind::AbsPow(_) = kind {
                    let a = if self.eat('^') {
                        self.number().ok_or_else(|| self.err("expected an exponent"))?
                    } else {
                        1.0
                    };
                    Kind::AbsPow(a)
                } else {
                    kind
                };
                return Ok(Some(Factor { var, kind }));
            }
        }
        match self.peek() {
            Some('x' | 'y' | 'z') => {
                let var = self.var()?;
                if self.eat('^') {
                    let a = self.number().ok_or_else(|| self.err("expected an exponent"))?;
                    if a >= 0.0 && a.fract() == 0.0 {
                        Ok(Some(Factor { var, kind: Kind::Pow(a as u32) }))
                    } else {
                        Ok(Some(Factor { var, kind: Kind::RealPow(a) }))
                    }
                } else {
                    Ok(Some(Factor { var, kind: Kind::Pow(1) }))
                }
            }
            _ => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e).unwrap()
    }

    #[test]
    fn aliases_parse() {
        for name in CATALOG_NAMES {
            let n = if name.contains('y') { 2 } else { 1 };
            CatalogFunction::parse(name, n).unwrap();
        }
        assert!(CatalogFunction::parse("xy", 1).is_err());
        assert!(CatalogFunction::parse("tan", 1).is_err());
        assert!(CatalogFunction::parse("1+", 1).is_err());
    }

    #[test]
    fn polynomial_expressions() {
        let f = CatalogFunction::parse("poly:1+2x-3x^2+xy", 2).unwrap();
        assert_eq!(f.polynomial_degree(), Some(2));
        let x = [0.5, -2.0];
        assert_eq!(f.value(&x), 1.0 + 1.0 - 0.75 - 1.0);
        assert_eq!(f.derivative(&mi(&[1, 0]), &x), 2.0 - 3.0 - 2.0);
        assert_eq!(f.derivative(&mi(&[1, 1]), &x), 1.0);
        assert_eq!(f.derivative(&mi(&[3, 0]), &x), 0.0);
        let g = CatalogFunction::parse("x*x*x", 1).unwrap();
        assert_eq!(g.polynomial_degree(), Some(3));
        assert_eq!(g.value(&[2.0]), 8.0);
        assert_eq!(CatalogFunction::parse("sin", 1).unwrap().polynomial_degree(), None);
    }

    #[test]
    fn transcendental_derivatives() {
        let f = CatalogFunction::parse("sinxsiny", 2).unwrap();
        let x = [0.3, 1.1];
        let d = f.derivative(&mi(&[2, 1]), &x);
        assert!((d - (-(0.3f64).sin() * (1.1f64).cos())).abs() < 1e-15);
        let g = CatalogFunction::parse("x*sin(x)", 1).unwrap();
        // (x sin x)'' = 2cos x − x sin x
        let v = g.derivative(&mi(&[2]), &[0.7]);
        assert!((v - (2.0 * 0.7f64.cos() - 0.7 * 0.7f64.sin())).abs() < 1e-15);
    }

    #[test]
    fn singular_entries() {
        let f = CatalogFunction::parse("x^1.5", 1).unwrap();
        assert!((f.derivative(&mi(&[1]), &[0.25]) - 0.75).abs() < 1e-15);
        assert!(f.derivative(&mi(&[2]), &[1e-12]) > 1e5);
        let g = CatalogFunction::parse("sqrtabs", 1).unwrap();
        assert_eq!(g.value(&[-4.0]), 2.0);
        assert!((g.derivative(&mi(&[1]), &[-4.0]) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn finite_difference_cross_check() {
        let h = 1e-4;
        for (name, n) in [("sin", 1), ("exp", 1), ("x^3", 1), ("x^1.5", 1), ("sinxsiny", 2), ("poly:1+x^2*y-y^3", 2), ("cos(x)*exp(z)+xyz", 3)] {
            let f = CatalogFunction::parse(name, n).unwrap();
            let x: Vec<f64> = (0..n).map(|i| 0.4 + 0.13 * i as f64).collect();
            for i in 0..n {
                let e = MultiIndex::unit(n, i);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
                assert!((fd - f.derivative(&e, &x)).abs() < 1e-6, "{name} d{i}");
                let fd2 = (f.derivative(&e, &xp) - f.derivative(&e, &xm)) / (2.0 * h);
                assert!((fd2 - f.derivative(&(e + e), &x)).abs() < 1e-6, "{name} dd{i}");
            }
        }
    }

    #[test]
    fn polynomial_constructor_round_trips() {
        let f = CatalogFunction::polynomial(2, &[(mi(&[0, 0]), 1.0), (mi(&[1, 0]), -2.0), (mi(&[1, 1]), 0.5)]).unwrap();
        assert_eq!(f.name(), "poly:1-2x+0.5xy");
        let g = CatalogFunction::parse(f.name(), 2).unwrap();
        assert_eq!(f.value(&[0.3, 0.9]), g.value(&[0.3, 0.9]));
    }
}
