//! Suprema of the affine controller over the certified ellipsoid.
//!
//! With `Ω = LLᵀ`, the ellipsoid `{(x − c)ᵀΩ⁻¹(x − c) <= 1}` is `c + L·ball`,
//! so every bound reduces to maximizing `‖Mz + d‖` over the unit ball.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CbfError, Result};
use crate::model::{InputBound, InputBoundSpec};
use crate::synthesis::{AffineController, CbfFunction, Orientation};

/// Supremum of one input constraint together with the limit it must respect.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSup {
    pub name: String,
    pub sup: f64,
    pub limit: f64,
}

impl InputSup {
    pub fn slack(&self) -> f64 {
        self.limit - self.sup
    }
}

/// `max_{‖z‖ <= 1} ‖Mz + d‖²`.
///
/// The maximizer lies on the sphere and solves `(G − λI)z = −g` with
/// `G = MᵀM`, `g = Mᵀd` and `λ >= λ_max(G)`; `λ` is the root of the secular
/// equation `Σ g̃_i² / (λ − λ_i)² = 1`, except in the hard case where `g` has
/// no component along the top eigenspace.
pub fn sup_affine_norm_sq(m: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return d.norm_squared();
    }
    let g_mat = m.transpose() * m;
    let g = m.transpose() * d;
    let eig = g_mat.symmetric_eigen();
    let lam = &eig.eigenvalues;
    let q = &eig.eigenvectors;
    let gt = q.transpose() * &g;
    let (imax, lmax) = lam
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, l)| if l > acc.1 { (i, l) } else { acc });
    let gnorm = g.norm();
    let value_at = |z: &DVector<f64>| (m * (q * z) + d).norm_squared();
    if gnorm == 0.0 {
        let mut z = DVector::zeros(n);
        z[imax] = 1.0;
        return value_at(&z);
    }

    let eig_tol = 1e-12 * lmax.abs().max(1.0);
    let top: Vec<bool> = lam.iter().map(|l| *l >= lmax - eig_tol).collect();
    let top_weight: f64 = (0..n).filter(|&i| top[i]).map(|i| gt[i] * gt[i]).sum();
    if top_weight <= (1e-14 * gnorm).powi(2) {
        // possible hard case: λ = λ_max if the remaining components fit
        let mut z = DVector::zeros(n);
        for i in (0..n).filter(|&i| !top[i]) {
            z[i] = gt[i] / (lmax - lam[i]);
        }
        let r2 = z.norm_squared();
        if r2 <= 1.0 {
            z[imax] = (1.0 - r2).sqrt();
            return value_at(&z);
        }
    }

    let phi = |l: f64| -> f64 {
        (0..n)
            .map(|i| {
                let den = l - lam[i];
                gt[i] * gt[i] / (den * den)
            })
            .sum::<f64>()
            - 1.0
    };
    let (mut lo, mut hi) = (lmax, lmax + gnorm);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = phi(mid);
        if v > 0.0 || v.is_nan() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let l = hi;
    let mut z = DVector::from_iterator(n, (0..n).map(|i| gt[i] / (l - lam[i])));
    let nz = z.norm();
    if nz > 0.0 {
        z /= nz;
    }
    value_at(&z)
}

/// Sampling oracle for [`sup_affine_norm_sq`]: `count` random directions on
/// the sphere, the best few polished by the monotone fixed-point ascent
/// `z ← ∇f(z) / ‖∇f(z)‖`. Several starts guard against local maxima.
pub fn sampled_sup_affine_norm_sq(m: &DMatrix<f64>, d: &DVector<f64>, count: usize, rng: &mut ChaCha8Rng) -> f64 {
    const STARTS: usize = 16;
    let n = m.ncols();
    if n == 0 {
        return d.norm_squared();
    }
    let f = |z: &DVector<f64>| (m * z + d).norm_squared();
    let mut samples: Vec<(f64, DVector<f64>)> = Vec::with_capacity(count);
    for _ in 0..count {
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let nz = z.norm();
        if nz == 0.0 {
            continue;
        }
        let z = z / nz;
        samples.push((f(&z), z));
    }
    samples.sort_by(|a, b| b.0.total_cmp(&a.0));
    samples.truncate(STARTS);

    let g_mat = m.transpose() * m;
    let g = m.transpose() * d;
    let mut overall = f64::NEG_INFINITY;
    for (mut best_v, mut best) in samples {
        for _ in 0..2000 {
            let grad = &g_mat * &best + &g;
            let ng = grad.norm();
            if ng == 0.0 {
                break;
            }
            let z = grad / ng;
            let v = f(&z);
            if v <= best_v {
                break;
            }
            best_v = v;
            best = z;
        }
        overall = overall.max(best_v);
    }
    overall
}

/// Lower-triangular `L` with `Ω = LLᵀ`.
pub fn ellipsoid_factor(omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    omega
        .clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or(CbfError::NotPsd {
            min_eig: crate::sdp::lmi::min_eigenvalue(omega),
        })
}

/// Supremum of every input constraint over the certified ellipsoid: `B^c`
/// for local certificates, `{(x − c)ᵀΩ⁻¹(x − c) <= 1}` for global ones with
/// `d = 0` and `Ω ≻ 0`.
///
/// Limits: `ζ − ε` for the norm bounds, `h_i − ε/2` for polytope rows.
pub fn sup_input(controller: &AffineController, cbf: &CbfFunction, bound: &InputBoundSpec) -> Result<Vec<InputSup>> {
    if cbf.orientation == Orientation::SuperLevelSafe && controller.d.iter().any(|v| *v != 0.0) {
        return Err(CbfError::Unsupported(
            "input suprema of global certificates need d = 0".into(),
        ));
    }
    let l = ellipsoid_factor(&cbf.omega).map_err(|_| {
        CbfError::Unsupported("input suprema need a positive definite Ω (bounded ellipsoid)".into())
    })?;
    let mk = &controller.k * &l;
    let d = &controller.d;
    let eps = bound.epsilon;
    let out = match &bound.bound {
        InputBound::None => Vec::new(),
        InputBound::L2 { zeta } => vec![InputSup {
            name: "l2".into(),
            sup: sup_affine_norm_sq(&mk, d),
            limit: zeta - eps,
        }],
        InputBound::Linf { zeta } => (0..d.len())
            .map(|i| {
                let row = mk.row(i).norm();
                InputSup {
                    name: format!("linf{}", i + 1),
                    sup: (d[i].abs() + row).powi(2),
                    limit: zeta - eps,
                }
            })
            .collect(),
        InputBound::Polytope { h_mat, h } => (0..h.len())
            .map(|i| {
                let hi = h_mat.row(i);
                InputSup {
                    name: format!("poly{}", i + 1),
                    sup: (hi * d)[0] + (hi * &mk).norm(),
                    limit: h[i] - eps / 2.0,
                }
            })
            .collect(),
    };
    Ok(out)
}
