//! Sampling oracles for the set inclusions behind a certificate.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CbfError, Result};
use crate::model::Halfspace;
use crate::sets::{bounding_box, boundary_samples, rejection_sample, BasicSet};
use crate::synthesis::CbfFunction;
use crate::verify::sup::ellipsoid_factor;

const SEARCH_RADIUS: f64 = 1e6;
/// Violating points kept for reporting.
const KEEP: usize = 10;

/// Result of a sampled inclusion test. Every sample gets a margin that is
/// nonnegative when the inclusion holds at that point.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub samples: usize,
    pub worst_margin: f64,
    pub violation_count: usize,
    /// Up to ten violating points.
    pub violations: Vec<Vec<f64>>,
}

impl OracleOutcome {
    fn collect(points: &[Vec<f64>], margin: impl Fn(&[f64]) -> f64, slack: f64) -> Self {
        let mut out = OracleOutcome {
            samples: points.len(),
            worst_margin: f64::INFINITY,
            violation_count: 0,
            violations: Vec::new(),
        };
        for p in points {
            let m = margin(p);
            out.worst_margin = out.worst_margin.min(m);
            if m.is_nan() || m < -slack {
                out.violation_count += 1;
                if out.violations.len() < KEEP {
                    out.violations.push(p.clone());
                }
            }
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }
}

/// Half interior (rejection) and half boundary (ray marching) samples of a
/// bounded basic set, starting from a member found among `hints`.
pub fn sample_basic_set(set: &BasicSet, hints: &[Vec<f64>], count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let x0 = set
        .find_member(hints)
        .ok_or_else(|| CbfError::SpecInvalid(vec!["could not locate a point of the sampled set".into()]))?;
    let f = |x: &[f64]| set.contains(x);
    let (lo, hi) = bounding_box(&f, &x0, SEARCH_RADIUS, seed)
        .ok_or_else(|| CbfError::SpecInvalid(vec!["sampled set is unbounded".into()]))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_in = count - count / 2;
    let mut pts = rejection_sample(&f, &lo, &hi, n_in, &mut rng);
    pts.extend(boundary_samples(&f, &x0, SEARCH_RADIUS, count - pts.len(), &mut rng));
    Ok(pts)
}

/// Quadratic form of `b` on the first `n_bar` coordinates after maximizing
/// over the rest: the Schur complement `P̄ − P_bu P_uu⁻¹ P_ub`. `None` when
/// `P_uu` is not negative definite (then `b` is unbounded above in x̲).
pub fn projected_form(p: &DMatrix<f64>, n_bar: usize) -> Option<DMatrix<f64>> {
    let n = p.nrows();
    let pbb = p.view((0, 0), (n_bar, n_bar)).into_owned();
    if n_bar == n {
        return Some(pbb);
    }
    let nu = n - n_bar;
    let puu = p.view((n_bar, n_bar), (nu, nu)).into_owned();
    (-&puu).cholesky()?;
    let pbu = p.view((0, n_bar), (n_bar, nu)).into_owned();
    let sol = puu.lu().solve(&pbu.transpose())?;
    Some(pbb - pbu * sol)
}

/// Global mode: `b < 0` on the unsafe set, checked on samples of its
/// projection onto the x̄ coordinates. Margins are `−max_{x̲} b`.
pub fn unsafe_set_oracle(
    cbf: &CbfFunction,
    unsafe_bar: &BasicSet,
    n_bar: usize,
    count: usize,
    seed: u64,
    slack: f64,
) -> Result<OracleOutcome> {
    let c_bar: Vec<f64> = cbf.c.rows(0, n_bar).iter().copied().collect();
    let pts = sample_basic_set(unsafe_bar, std::slice::from_ref(&c_bar), count, seed)?;
    let Some(pbar) = projected_form(&cbf.p, n_bar) else {
        return Ok(OracleOutcome::collect(&pts, |_| f64::NEG_INFINITY, slack));
    };
    let margin = |x: &[f64]| {
        let v = DVector::from_iterator(n_bar, x.iter().zip(&c_bar).map(|(a, c)| a - c));
        1.0 - v.dot(&(&pbar * &v))
    };
    Ok(OracleOutcome::collect(&pts, margin, slack))
}

/// Local mode: `I ⊆ B^c`, margins `−b(x)` on samples of `I`.
pub fn initial_set_oracle(
    cbf: &CbfFunction,
    init: &BasicSet,
    count: usize,
    seed: u64,
    slack: f64,
) -> Result<OracleOutcome> {
    let hint: Vec<f64> = cbf.c.iter().copied().collect();
    let pts = sample_basic_set(init, &[hint], count, seed)?;
    Ok(OracleOutcome::collect(&pts, |x| -cbf.eval_slice(x), slack))
}

/// Local mode: `∂B^c ⊆ S`, margins `min_i a_iᵀx + o_i` on the ellipsoid
/// boundary.
pub fn ellipsoid_boundary_oracle(
    cbf: &CbfFunction,
    halfspaces: &[Halfspace],
    count: usize,
    seed: u64,
    slack: f64,
) -> Result<OracleOutcome> {
    let l = ellipsoid_factor(&cbf.omega)?;
    let n = cbf.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..count)
        .map(|_| {
            let z = random_unit(n, &mut rng);
            (&cbf.c + &l * z).iter().copied().collect()
        })
        .collect();
    let margin = |x: &[f64]| {
        let x = DVector::from_column_slice(x);
        halfspaces
            .iter()
            .map(|h| h.value(&x))
            .fold(f64::INFINITY, f64::min)
    };
    Ok(OracleOutcome::collect(&pts, margin, slack))
}

pub(crate) fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    use rand::Rng;
    loop {
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)));
        let nz = z.norm();
        if nz > 1e-12 {
            return z / nz;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use crate::synthesis::Orientation;

    fn case1_cbf() -> CbfFunction {
        let p = DMatrix::from_row_slice(2, 2, &[0.88391, -0.253835, -0.253835, 0.25205]);
        CbfFunction::from_p(DVector::zeros(2), p, Orientation::SuperLevelSafe).unwrap()
    }

    fn unit_disk() -> BasicSet {
        BasicSet::new(vec![Polynomial::parse("1 - x1^2 - x2^2", 2).unwrap()], false)
    }

    #[test]
    fn case1_disk_is_outside_b() {
        let out = unsafe_set_oracle(&case1_cbf(), &unit_disk(), 2, 10_000, 0, 0.0).unwrap();
        assert_eq!(out.samples, 10_000);
        assert!(out.passed(), "{out:?}");
        // 1 − λ_max(P) ≈ 0.0267 is the exact worst case on the circle
        assert!(out.worst_margin > 0.02 && out.worst_margin < 0.03);
    }

    #[test]
    fn halved_omega_is_caught() {
        let good = case1_cbf();
        let bad = CbfFunction::new(good.c.clone(), &good.omega * 0.5, Orientation::SuperLevelSafe).unwrap();
        let out = unsafe_set_oracle(&bad, &unit_disk(), 2, 10_000, 0, 0.0).unwrap();
        assert!(out.violation_count > 0);
    }

    #[test]
    fn nested_balls() {
        let inner = BasicSet::new(vec![Polynomial::parse("0.25 - x1^2 - x2^2", 2).unwrap()], false);
        let outer = CbfFunction::new(DVector::zeros(2), DMatrix::identity(2, 2), Orientation::SubLevelSafe).unwrap();
        let out = initial_set_oracle(&outer, &inner, 2_000, 1, 0.0).unwrap();
        assert!(out.passed());
        assert!((out.worst_margin - 0.75).abs() < 1e-6);
    }

    #[test]
    fn projection_maximizes_over_velocity() {
        // b = x² + 2xv − v² − 1: max over v at v = x gives 2x² − 1
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let pb = projected_form(&p, 1).unwrap();
        assert!((pb[(0, 0)] - 2.0).abs() < 1e-14);
        assert!(projected_form(&DMatrix::identity(2, 2), 1).is_none());
    }
}
