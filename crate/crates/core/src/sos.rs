//! Sum-of-squares constraints compiled to semidefinite constraints.
//!
//! A polynomial `p` of degree `2d` is SOS iff `p(x) = z(x)ᵀ Q z(x)` for some
//! `Q ⪰ 0`, where `z` lists all monomials of degree `≤ d`. Matching
//! coefficients turns the identity into linear equalities on `Q`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{CbfError, Result};
use crate::expr::AffineExpr;
use crate::poly::{Monomial, Polynomial};
use crate::sdp::{ConicProblem, Sense, SymVar};

/// All monomials of degree `≤ max_deg` in graded-lex order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialBasis {
    nvars: usize,
    max_deg: u32,
    monomials: Vec<Monomial>,
}

impl MonomialBasis {
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_deg(&self) -> u32 {
        self.max_deg
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    /// `z(x)` at a point.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.monomials.iter().map(|m| m.eval(x)).collect()
    }
}

pub fn build_basis(nvars: usize, max_deg: u32) -> MonomialBasis {
    fn rec(prefix: &mut Vec<u32>, left: usize, budget: u32, out: &mut Vec<Monomial>) {
        if left == 0 {
            out.push(Monomial::new(prefix.clone()));
            return;
        }
        for e in 0..=budget {
            prefix.push(e);
            rec(prefix, left - 1, budget - e, out);
            prefix.pop();
        }
    }
    let mut monomials = Vec::new();
    rec(&mut Vec::with_capacity(nvars), nvars, max_deg, &mut monomials);
    monomials.sort();
    MonomialBasis {
        nvars,
        max_deg,
        monomials,
    }
}

/// For each monomial `μ` of degree `≤ 2d`, the basis pairs `(i, j)`, `i <= j`,
/// with `z_i z_j = μ`. Off-diagonal pairs appear once and count twice.
#[derive(Debug, Clone, PartialEq)]
pub struct GramParameterization {
    pub basis: MonomialBasis,
    pub coefficient_map: BTreeMap<Monomial, Vec<(usize, usize)>>,
}

impl GramParameterization {
    pub fn new(basis: MonomialBasis) -> Self {
        let mut coefficient_map: BTreeMap<Monomial, Vec<(usize, usize)>> = BTreeMap::new();
        let z = basis.monomials();
        for i in 0..z.len() {
            for j in i..z.len() {
                coefficient_map.entry(z[i].mul(&z[j])).or_default().push((i, j));
            }
        }
        GramParameterization {
            basis,
            coefficient_map,
        }
    }

    pub fn gram_dim(&self) -> usize {
        self.basis.len()
    }

    /// Coefficient of `μ` in `zᵀQz` as an affine expression in `Q`'s entries.
    pub fn coefficient(&self, q: &SymVar, mu: &Monomial) -> AffineExpr {
        let mut e = AffineExpr::zero();
        if let Some(pairs) = self.coefficient_map.get(mu) {
            for &(i, j) in pairs {
                e.add_term(q.index(i, j), if i == j { 1.0 } else { 2.0 });
            }
        }
        e
    }

    /// Nearest symmetric matrix (Frobenius norm) to `q` whose `zᵀQz` equals
    /// `target` exactly. Removes the equality residual a numerical solve leaves
    /// behind before a witness is extracted.
    pub fn project(&self, q: &DMatrix<f64>, target: &Polynomial) -> Result<DMatrix<f64>> {
        let n = self.basis.len();
        if q.nrows() != n || q.ncols() != n {
            return Err(CbfError::DimensionMismatch(format!("Gram matrix must be {n}x{n}")));
        }
        if let Some((mono, _)) = target.terms().find(|(m, _)| !self.coefficient_map.contains_key(*m)) {
            return Err(CbfError::DegreeOverflow {
                degree: mono.degree(),
                capacity: 2 * self.basis.max_deg(),
            });
        }
        let mut out = (q + q.transpose()) * 0.5;
        for (mono, pairs) in &self.coefficient_map {
            let mut have = 0.0;
            let mut count = 0.0;
            for &(i, j) in pairs {
                let w = if i == j { 1.0 } else { 2.0 };
                have += w * out[(i, j)];
                count += w;
            }
            let shift = (target.coeff(mono) - have) / count;
            for &(i, j) in pairs {
                out[(i, j)] += shift;
                out[(j, i)] = out[(i, j)];
            }
        }
        Ok(out)
    }

    /// Alternating projections between the PSD cone and the affine set of
    /// Gram matrices for `target`, ending on the PSD side. Stops once the
    /// coefficient gap falls below `tol` or after `max_iter` rounds.
    pub fn refine(&self, q: &DMatrix<f64>, target: &Polynomial, tol: f64, max_iter: usize) -> Result<DMatrix<f64>> {
        let mut cur = psd_clip(&((q + q.transpose()) * 0.5));
        for _ in 0..max_iter {
            if self.residual(&cur, target) <= tol {
                break;
            }
            cur = psd_clip(&self.project(&cur, target)?);
        }
        Ok(cur)
    }

    /// Largest coefficient gap between `zᵀQz` and `target`.
    pub fn residual(&self, q: &DMatrix<f64>, target: &Polynomial) -> f64 {
        let mut worst: f64 = 0.0;
        for (mono, pairs) in &self.coefficient_map {
            let have: f64 = pairs
                .iter()
                .map(|&(i, j)| if i == j { q[(i, j)] } else { q[(i, j)] + q[(j, i)] })
                .sum();
            worst = worst.max((have - target.coeff(mono)).abs());
        }
        worst
    }

    /// `z(x)ᵀ Q z(x)` as a polynomial with affine coefficients.
    pub fn polynomial(&self, q: &SymVar) -> AffinePoly {
        let mut p = AffinePoly::zero(self.basis.nvars());
        for mu in self.coefficient_map.keys() {
            p.add_term(mu.clone(), &self.coefficient(q, mu));
        }
        p
    }
}

/// Polynomial whose coefficients are affine in the decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePoly {
    nvars: usize,
    terms: BTreeMap<Monomial, AffineExpr>,
}

impl AffinePoly {
    pub fn zero(nvars: usize) -> Self {
        AffinePoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_poly(p: &Polynomial) -> Self {
        let mut a = AffinePoly::zero(p.nvars());
        for (m, c) in p.terms() {
            a.add_term(m.clone(), &AffineExpr::constant(c));
        }
        a
    }

    /// `e · p` for a scalar affine `e` and a constant polynomial `p`.
    pub fn scaled_poly(p: &Polynomial, e: &AffineExpr) -> Self {
        let mut a = AffinePoly::zero(p.nvars());
        for (m, c) in p.terms() {
            a.add_term(m.clone(), &e.scale(c));
        }
        a
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn add_term(&mut self, mono: Monomial, e: &AffineExpr) {
        let slot = self.terms.entry(mono.clone()).or_default();
        *slot += e;
        if slot.is_zero() {
            self.terms.remove(&mono);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &AffineExpr)> {
        self.terms.iter()
    }

    pub fn coeff(&self, mono: &Monomial) -> AffineExpr {
        self.terms.get(mono).cloned().unwrap_or_default()
    }

    /// Degree over monomials whose coefficient is not identically zero.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn add(&self, other: &AffinePoly) -> AffinePoly {
        let mut out = self.clone();
        for (m, e) in &other.terms {
            out.add_term(m.clone(), e);
        }
        out
    }

    pub fn sub(&self, other: &AffinePoly) -> AffinePoly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> AffinePoly {
        let mut out = AffinePoly::zero(self.nvars);
        for (m, e) in &self.terms {
            out.add_term(m.clone(), &e.scale(s));
        }
        out
    }

    /// Product with a constant polynomial.
    pub fn mul_poly(&self, p: &Polynomial) -> AffinePoly {
        let mut out = AffinePoly::zero(self.nvars);
        for (m, e) in &self.terms {
            for (pm, pc) in p.terms() {
                out.add_term(m.mul(pm), &e.scale(pc));
            }
        }
        out
    }

    pub fn add_constant(&self, e: &AffineExpr) -> AffinePoly {
        let mut out = self.clone();
        out.add_term(Monomial::one(self.nvars), e);
        out
    }

    /// Numeric polynomial at decision values.
    pub fn eval(&self, values: &[f64]) -> Polynomial {
        let mut p = Polynomial::zero(self.nvars);
        for (m, e) in &self.terms {
            p.add_term(m.clone(), e.eval(values));
        }
        p
    }
}

/// Declares a fresh Gram matrix `Q ⪰ 0` named `name` and equalities forcing
/// `expr = zᵀQz` coefficient by coefficient.
pub fn gram_constraints(
    problem: &mut ConicProblem,
    name: &str,
    expr: &AffinePoly,
    basis: &MonomialBasis,
) -> Result<(SymVar, GramParameterization)> {
    let capacity = 2 * basis.max_deg();
    if let Some((m, _)) = expr.terms().find(|(m, _)| m.degree() > capacity) {
        return Err(CbfError::DegreeOverflow {
            degree: m.degree(),
            capacity,
        });
    }
    let gram = GramParameterization::new(basis.clone());
    let q = problem.layout.add_symmetric(name, gram.gram_dim());
    let mut monos: Vec<Monomial> = gram.coefficient_map.keys().cloned().collect();
    for (m, _) in expr.terms() {
        if !gram.coefficient_map.contains_key(m) {
            monos.push(m.clone());
        }
    }
    monos.sort();
    monos.dedup();
    for mu in monos {
        let lhs = gram.coefficient(&q, &mu);
        let rhs = expr.coeff(&mu);
        let e = &lhs - &rhs;
        if e.is_zero() {
            continue;
        }
        problem.add_equality(&format!("{name}[{:?}]", mu.exponents()), e);
    }
    problem.add_lmi(name, q.matrix(), Sense::Psd);
    Ok((q, gram))
}

/// Compiled S-procedure certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct SprocedureCert {
    pub name: String,
    /// Gram variables of the multipliers `σ_i`.
    pub multipliers: Vec<(SymVar, GramParameterization)>,
    /// Gram variable of the master SOS polynomial.
    pub master: (SymVar, GramParameterization),
    /// The master polynomial `target − Σσ_i q_i − margin`, affine in decisions.
    pub master_poly: AffinePoly,
}

/// Certifies `target(x) >= margin` on `{x : q_i(x) >= 0 ∀i}` by requiring
/// `target − Σ σ_i q_i − margin ∈ Σ[x]` with SOS multipliers `σ_i` of degree
/// `multiplier_degree`.
///
/// When the compiled polynomial has odd symbolic degree `2k+1`, its
/// top-degree coefficients are constrained to zero and the Gram basis has
/// degree `k`.
pub fn sprocedure_emptiness(
    problem: &mut ConicProblem,
    name: &str,
    target: &AffinePoly,
    region: &[Polynomial],
    multiplier_degree: u32,
    margin: &AffineExpr,
) -> Result<SprocedureCert> {
    let nvars = target.nvars();
    if let Some(q) = region.iter().find(|q| q.nvars() != nvars) {
        return Err(CbfError::DimensionMismatch(format!(
            "region polynomial has {} variables, target has {nvars}",
            q.nvars()
        )));
    }
    if !multiplier_degree.is_multiple_of(2) {
        return Err(CbfError::SpecInvalid(vec![format!(
            "multiplier degree must be even, got {multiplier_degree}"
        )]));
    }
    let mbasis = build_basis(nvars, multiplier_degree / 2);
    let mut master = target.add_constant(&margin.scale(-1.0));
    let mut multipliers = Vec::with_capacity(region.len());
    for (i, q) in region.iter().enumerate() {
        let gram = GramParameterization::new(mbasis.clone());
        let s = problem
            .layout
            .add_symmetric(&format!("{name}.sigma{}", i + 1), gram.gram_dim());
        problem.add_lmi(&format!("{name}.sigma{}", i + 1), s.matrix(), Sense::Psd);
        let sigma = gram.polynomial(&s);
        master = master.sub(&sigma.mul_poly(q));
        multipliers.push((s, gram));
    }
    let deg = master.degree();
    let half = if deg % 2 == 1 {
        let top: Vec<(Monomial, AffineExpr)> = master
            .terms()
            .filter(|(m, _)| m.degree() == deg)
            .map(|(m, e)| (m.clone(), e.clone()))
            .collect();
        for (m, e) in top {
            problem.add_equality(&format!("{name}.odd[{:?}]", m.exponents()), e);
        }
        (deg - 1) / 2
    } else {
        deg / 2
    };
    // Odd-degree terms below the top are matched by the Gram identity, which
    // handles them like any other coefficient.
    let mut reduced = AffinePoly::zero(nvars);
    for (m, e) in master.terms() {
        if m.degree() <= 2 * half {
            reduced.add_term(m.clone(), e);
        }
    }
    let basis = build_basis(nvars, half);
    let (q, gram) = gram_constraints(problem, &format!("{name}.gram"), &reduced, &basis)?;
    Ok(SprocedureCert {
        name: name.to_string(),
        multipliers,
        master: (q, gram),
        master_poly: master,
    })
}

/// Factors a numeric Gram matrix as `Q = LᵀL` and returns `p_i = (L z)_i`
/// so that `Σ p_i² = zᵀQz`.
pub fn extract_sos_witness(q: &DMatrix<f64>, basis: &MonomialBasis, tol: f64) -> Result<Vec<Polynomial>> {
    let n = basis.len();
    if q.nrows() != n || q.ncols() != n {
        return Err(CbfError::DimensionMismatch(format!(
            "Gram matrix is {}x{} but the basis has {n} monomials",
            q.nrows(),
            q.ncols()
        )));
    }
    let sym = (q + q.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig < -tol {
        return Err(CbfError::NotPsd { min_eig });
    }
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cutoff = f64::EPSILON * n as f64 * lmax;
    let mut out = Vec::new();
    for k in 0..n {
        let lam = eig.eigenvalues[k];
        if lam <= cutoff {
            continue;
        }
        let s = lam.sqrt();
        let mut p = Polynomial::zero(basis.nvars());
        for (j, z) in basis.monomials().iter().enumerate() {
            p.add_term(z.clone(), s * eig.eigenvectors[(j, k)]);
        }
        out.push(p);
    }
    Ok(out)
}

fn psd_clip(q: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(q.clone());
    let lam = eig.eigenvalues.map(|l| l.max(0.0));
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&lam) * eig.eigenvectors.transpose();
    (&out + out.transpose()) * 0.5
}

pub fn sum_of_squares(polys: &[Polynomial], nvars: usize) -> Polynomial {
    polys
        .iter()
        .fold(Polynomial::zero(nvars), |acc, p| acc + p * p)
}

/// Largest coefficient gap between two polynomials.
pub fn coefficient_error(a: &Polynomial, b: &Polynomial) -> f64 {
    (a - b).max_abs_coeff()
}
