//! Affine functions of the flat decision vector.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// `constant + Σ coeff_k · y_k` over flat decision indices `k`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub constant: f64,
    terms: BTreeMap<usize, f64>,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        AffineExpr {
            constant: c,
            terms: BTreeMap::new(),
        }
    }

    pub fn var(index: usize) -> Self {
        Self::term(index, 1.0)
    }

    pub fn term(index: usize, coeff: f64) -> Self {
        let mut e = Self::zero();
        e.add_term(index, coeff);
        e
    }

    pub fn add_term(&mut self, index: usize, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let slot = self.terms.entry(index).or_insert(0.0);
        *slot += coeff;
        if *slot == 0.0 {
            self.terms.remove(&index);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// No variable terms.
    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// Identically zero.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant == 0.0
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms.keys().next_back().copied()
    }

    pub fn scale(&self, s: f64) -> AffineExpr {
        let mut e = AffineExpr::constant(self.constant * s);
        for (k, v) in &self.terms {
            e.add_term(*k, v * s);
        }
        e
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(k, v)| v * values[*k])
                .sum::<f64>()
    }

    /// Adds `s * other` in place.
    pub fn axpy(&mut self, s: f64, other: &AffineExpr) {
        self.constant += s * other.constant;
        for (k, v) in &other.terms {
            self.add_term(*k, s * v);
        }
    }
}

impl AddAssign<&AffineExpr> for AffineExpr {
    fn add_assign(&mut self, rhs: &AffineExpr) {
        self.axpy(1.0, rhs);
    }
}

impl Add for &AffineExpr {
    type Output = AffineExpr;
    fn add(self, rhs: &AffineExpr) -> AffineExpr {
        let mut e = self.clone();
        e += rhs;
        e
    }
}

impl Add for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: AffineExpr) -> AffineExpr {
        self += &rhs;
        self
    }
}

impl Sub for &AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: &AffineExpr) -> AffineExpr {
        let mut e = self.clone();
        e.axpy(-1.0, rhs);
        e
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: AffineExpr) -> AffineExpr {
        &self - &rhs
    }
}

impl Neg for &AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &AffineExpr {
    type Output = AffineExpr;
    fn mul(self, rhs: f64) -> AffineExpr {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_eval() {
        let a = &AffineExpr::term(0, 2.0) + &AffineExpr::constant(1.0);
        let b = AffineExpr::term(2, -1.0);
        let c = &(&a - &b) * 3.0;
        assert_eq!(c.constant, 3.0);
        assert_eq!(c.eval(&[1.0, 10.0, 2.0]), 3.0 + 6.0 + 6.0);
        let z = &a - &a;
        assert!(z.is_zero());
        assert_eq!(c.max_index(), Some(2));
    }
}
