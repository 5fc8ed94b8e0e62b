//! Sparse multivariate polynomials with real coefficients.
//!
//! Terms are keyed by exponent tuples and kept in graded-lex order: total
//! degree first, then lexicographically with `x1` ranking above `x2`. This
//! gives the familiar `1, x1, x2, x1^2, x1*x2, x2^2, ...` enumeration.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{CbfError, Result};

/// Exponent tuple of a monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(e, _)| **e > 0)
            .map(|(e, xi)| xi.powi(*e as i32))
            .product()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A polynomial in a fixed number of variables `x1..xn`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    /// The coordinate polynomial `x_{i+1}` (zero-based `i`).
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(nvars, i), 1.0);
        p
    }

    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(CbfError::DimensionMismatch(format!(
                    "exponent tuple of length {} in a {}-variable polynomial",
                    e.len(),
                    nvars
                )));
            }
            p.add_term(Monomial(e), c);
        }
        Ok(p)
    }

    /// `(x - c)^T Q (x - c)` for a symmetric `Q` given row-major.
    pub fn quadratic_form(q: &nalgebra::DMatrix<f64>, c: &[f64]) -> Self {
        let n = c.len();
        let shifted: Vec<Polynomial> = (0..n)
            .map(|i| Polynomial::var(n, i) - Polynomial::constant(n, c[i]))
            .collect();
        let mut p = Polynomial::zero(n);
        for i in 0..n {
            for j in 0..n {
                if q[(i, j)] != 0.0 {
                    p = p + (&shifted[i] * &shifted[j]).scale(q[(i, j)]);
                }
            }
        }
        p
    }

    /// Adds `c * mono`, dropping the entry if it cancels to zero.
    pub fn add_term(&mut self, mono: Monomial, c: f64) {
        debug_assert_eq!(mono.nvars(), self.nvars);
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(mono);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn coeff(&self, mono: &Monomial) -> f64 {
        self.terms.get(mono).copied().unwrap_or(0.0)
    }

    /// Total degree; zero for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn depends_on(&self, var: usize) -> bool {
        self.terms.keys().any(|m| m.0[var] > 0)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.nvars {
            return Err(CbfError::DimensionMismatch(format!(
                "point of dimension {} for a {}-variable polynomial",
                x.len(),
                self.nvars
            )));
        }
        Ok(self.terms.iter().map(|(m, c)| c * m.eval(x)).sum())
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut p = Polynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            p.add_term(m.clone(), c * s);
        }
        p
    }

    /// Partial derivative with respect to `x_{var+1}`.
    pub fn derivative(&self, var: usize) -> Polynomial {
        let mut p = Polynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[var];
            if e > 0 {
                let mut d = m.0.clone();
                d[var] -= 1;
                p.add_term(Monomial(d), c * e as f64);
            }
        }
        p
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        (0..self.nvars).map(|i| self.derivative(i).eval(x)).collect()
    }

    /// Re-expresses the polynomial over its first `k` variables. Fails if a
    /// dropped variable actually occurs.
    pub fn restrict_to_leading(&self, k: usize) -> Result<Polynomial> {
        if let Some(v) = (k..self.nvars).find(|&v| self.depends_on(v)) {
            return Err(CbfError::DimensionMismatch(format!(
                "polynomial depends on x{} outside the leading {} coordinates",
                v + 1,
                k
            )));
        }
        let mut p = Polynomial::zero(k);
        for (m, c) in &self.terms {
            p.add_term(Monomial(m.0[..k].to_vec()), *c);
        }
        Ok(p)
    }

    /// Embeds into a space with `n >= nvars` variables (new ones trailing).
    pub fn embed(&self, n: usize) -> Polynomial {
        assert!(n >= self.nvars);
        let mut p = Polynomial::zero(n);
        for (m, c) in &self.terms {
            let mut e = m.0.clone();
            e.resize(n, 0);
            p.add_term(Monomial(e), *c);
        }
        p
    }

    /// Parses text such as `x1^2 + 0.5*x1*x2 - 3 x2 + 1`.
    ///
    /// Terms are separated by `+`/`-`; a term is an optional coefficient
    /// followed by factors `xk` or `xk^e`, joined by `*` or whitespace.
    pub fn parse(text: &str, nvars: usize) -> Result<Polynomial> {
        parse_polynomial(text, nvars)
    }

    /// Serialises with every coefficient at 17 significant digits.
    pub fn to_exact_string(&self) -> String {
        self.render(|c| format!("{:.16e}", c))
    }

    fn render(&self, fmt_coeff: impl Fn(f64) -> String) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let (sign, mag) = if *c < 0.0 { ("-", -c) } else { ("+", *c) };
            if k == 0 {
                if sign == "-" {
                    out.push('-');
                }
            } else {
                out.push_str(&format!(" {} ", sign));
            }
            let factors: Vec<String> = m
                .0
                .iter()
                .enumerate()
                .filter(|(_, e)| **e > 0)
                .map(|(i, e)| {
                    if *e == 1 {
                        format!("x{}", i + 1)
                    } else {
                        format!("x{}^{}", i + 1, e)
                    }
                })
                .collect();
            if factors.is_empty() {
                out.push_str(&fmt_coeff(mag));
            } else if mag == 1.0 {
                out.push_str(&factors.join("*"));
            } else {
                out.push_str(&fmt_coeff(mag));
                out.push('*');
                out.push_str(&factors.join("*"));
            }
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(|c| format!("{}", c)))
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars, "variable count mismatch");
        let mut p = self.clone();
        for (m, c) in &rhs.terms {
            p.add_term(m.clone(), *c);
        }
        p
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: Polynomial) -> Polynomial {
        &self + &rhs
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &rhs.scale(-1.0)
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: Polynomial) -> Polynomial {
        &self - &rhs
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars, "variable count mismatch");
        let mut p = Polynomial::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                p.add_term(ma.mul(mb), ca * cb);
            }
        }
        p
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        &self * &rhs
    }
}

fn parse_polynomial(text: &str, nvars: usize) -> Result<Polynomial> {
    let err = |msg: String| CbfError::Parse(format!("{msg} in polynomial `{}`", text.trim()));
    let chars: Vec<char> = text.chars().collect();
    let mut p = Polynomial::zero(nvars);
    let mut i = 0;
    let skip_ws = |i: &mut usize| {
        while *i < chars.len() && chars[*i].is_whitespace() {
            *i += 1;
        }
    };
    let mut first = true;
    loop {
        skip_ws(&mut i);
        if i >= chars.len() {
            if first {
                return Err(err("empty expression".into()));
            }
            break;
        }
        let mut sign = 1.0;
        if chars[i] == '+' || chars[i] == '-' {
            if chars[i] == '-' {
                sign = -1.0;
            }
            i += 1;
            skip_ws(&mut i);
        } else if !first {
            return Err(err(format!("expected `+` or `-` at column {}", i + 1)));
        }
        first = false;

        let mut coeff = 1.0;
        let mut exps = vec![0u32; nvars];
        let mut saw_factor = false;
        loop {
            skip_ws(&mut i);
            if i >= chars.len() || chars[i] == '+' || chars[i] == '-' {
                break;
            }
            if chars[i] == '*' {
                if !saw_factor {
                    return Err(err(format!("dangling `*` at column {}", i + 1)));
                }
                i += 1;
                continue;
            }
            if chars[i].is_ascii_digit() || chars[i] == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                // exponent part of a float literal, e.g. 1.5e-3
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit: String = chars[start..i].iter().collect();
                let v: f64 = lit
                    .parse()
                    .map_err(|_| err(format!("bad number `{lit}`")))?;
                coeff *= v;
                saw_factor = true;
                continue;
            }
            if chars[i] == 'x' {
                i += 1;
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let idx: String = chars[start..i].iter().collect();
                let k: usize = idx
                    .parse()
                    .map_err(|_| err(format!("bad variable index at column {}", start + 1)))?;
                if k == 0 || k > nvars {
                    return Err(err(format!("variable x{k} out of range 1..={nvars}")));
                }
                let mut e = 1u32;
                skip_ws(&mut i);
                if i < chars.len() && chars[i] == '^' {
                    i += 1;
                    skip_ws(&mut i);
                    let s = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    let es: String = chars[s..i].iter().collect();
                    e = es
                        .parse()
                        .map_err(|_| err(format!("bad exponent at column {}", s + 1)))?;
                }
                exps[k - 1] += e;
                saw_factor = true;
                continue;
            }
            return Err(err(format!(
                "unexpected character `{}` at column {}",
                chars[i],
                i + 1
            )));
        }
        if !saw_factor {
            return Err(err("empty term".into()));
        }
        p.add_term(Monomial(exps), sign * coeff);
    }
    Ok(p)
}
