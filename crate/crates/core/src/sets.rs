//! Sampling helpers for bounded semi-algebraic sets given by membership tests.
//!
//! These are heuristics for validation and auditing, not proofs: extents are
//! found by marching along rays from an interior point, which is exact for
//! star-shaped sets around that point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::poly::Polynomial;

/// `{x : p_i(x) >= 0 for all i}` (or `> 0` when `strict`).
#[derive(Debug, Clone, PartialEq)]
pub struct BasicSet {
    pub polys: Vec<Polynomial>,
    pub strict: bool,
}

impl BasicSet {
    pub fn new(polys: Vec<Polynomial>, strict: bool) -> Self {
        BasicSet { polys, strict }
    }

    pub fn dim(&self) -> usize {
        self.polys.first().map_or(0, Polynomial::nvars)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.polys.iter().all(|p| {
            let v = p.eval(x).unwrap_or(f64::NAN);
            if self.strict {
                v > 0.0
            } else {
                v >= 0.0
            }
        })
    }

    /// Smallest value of `p_i(x)` over the constraints (membership margin).
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.polys
            .iter()
            .map(|p| p.eval(x).unwrap_or(f64::NAN))
            .fold(f64::INFINITY, f64::min)
    }

    /// Tries the hints, then stationary points of each quadratic constraint,
    /// then those stationary points merged on the variables each constraint
    /// depends on (which finds the centre of product sets such as a disk
    /// times an interval).
    pub fn find_member(&self, hints: &[Vec<f64>]) -> Option<Vec<f64>> {
        let n = self.dim();
        let mut merged = hints.first().cloned().filter(|h| h.len() == n).unwrap_or(vec![0.0; n]);
        for p in &self.polys {
            if let Some(x) = stationary_point(p) {
                for (i, v) in x.iter().enumerate() {
                    if p.depends_on(i) {
                        merged[i] = *v;
                    }
                }
            }
        }
        hints
            .iter()
            .cloned()
            .chain(self.polys.iter().filter_map(stationary_point))
            .chain(std::iter::once(merged))
            .find(|x| x.len() == n && self.contains(x))
    }
}

/// Stationary point of a polynomial of degree ≤ 2 (solving `∇p = 0` over the
/// variables it depends on; the others are set to zero).
pub fn stationary_point(p: &Polynomial) -> Option<Vec<f64>> {
    if p.degree() != 2 {
        return None;
    }
    let n = p.nvars();
    let used: Vec<usize> = (0..n).filter(|&i| p.depends_on(i)).collect();
    let k = used.len();
    let zero = vec![0.0; n];
    let g0 = p.gradient(&zero).ok()?;
    let mut h = nalgebra::DMatrix::zeros(k, k);
    for (a, &i) in used.iter().enumerate() {
        let di = p.derivative(i);
        for (b, &j) in used.iter().enumerate() {
            h[(a, b)] = di.derivative(j).eval(&zero).ok()?;
        }
    }
    let rhs = -nalgebra::DVector::from_iterator(k, used.iter().map(|&i| g0[i]));
    let y = h.lu().solve(&rhs)?;
    let mut x = zero;
    for (a, &i) in used.iter().enumerate() {
        x[i] = y[a];
    }
    Some(x)
}

/// Distance along the unit direction `dir` from `origin` at which the set is
/// first left, or `None` if still inside at `r_max`.
pub fn exit_radius(
    contains: &dyn Fn(&[f64]) -> bool,
    origin: &[f64],
    dir: &[f64],
    r_max: f64,
) -> Option<f64> {
    let at = |r: f64| -> Vec<f64> { origin.iter().zip(dir).map(|(o, d)| o + r * d).collect() };
    let mut lo = 0.0;
    let mut hi = 1e-3;
    while contains(&at(hi)) {
        lo = hi;
        hi *= 2.0;
        if hi > r_max {
            return None;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if contains(&at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

fn unit_directions(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[i] = s;
            dirs.push(d);
        }
    }
    while dirs.len() < 2 * n + count {
        let d: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-3 {
            dirs.push(d.iter().map(|v| v / norm).collect());
        }
    }
    dirs
}

/// Axis-aligned box around the set, from ray marching out of `origin`.
/// `None` when some ray never leaves the set before `r_max`.
pub fn bounding_box(
    contains: &dyn Fn(&[f64]) -> bool,
    origin: &[f64],
    r_max: f64,
    seed: u64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = origin.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lo = origin.to_vec();
    let mut hi = origin.to_vec();
    for d in unit_directions(n, 64 * n, &mut rng) {
        let r = exit_radius(contains, origin, &d, r_max)?;
        for i in 0..n {
            let v = origin[i] + r * d[i];
            lo[i] = lo[i].min(v);
            hi[i] = hi[i].max(v);
        }
    }
    for i in 0..n {
        let pad = 0.05 * (hi[i] - lo[i]).max(1e-9);
        lo[i] -= pad;
        hi[i] += pad;
    }
    Some((lo, hi))
}

/// Rejection samples from the set inside the box. Gives up after
/// `1000 · count` draws and returns what it has.
pub fn rejection_sample(
    contains: &dyn Fn(&[f64]) -> bool,
    lo: &[f64],
    hi: &[f64],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count && tries < 1000 * count.max(1) {
        tries += 1;
        let x: Vec<f64> = lo
            .iter()
            .zip(hi)
            .map(|(l, h)| l + (h - l) * rng.random::<f64>())
            .collect();
        if contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Points on the boundary of a star-shaped set around `origin`, one per
/// random direction.
pub fn boundary_samples(
    contains: &dyn Fn(&[f64]) -> bool,
    origin: &[f64],
    r_max: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n = origin.len();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let d: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        let d: Vec<f64> = d.iter().map(|v| v / norm).collect();
        if let Some(r) = exit_radius(contains, origin, &d, r_max) {
            // the last point still inside, up to bisection resolution
            let r_in = r * (1.0 - 1e-12);
            out.push(origin.iter().zip(&d).map(|(o, di)| o + r_in * di).collect());
        } else {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk() -> BasicSet {
        BasicSet::new(vec![Polynomial::parse("1 - x1^2 - x2^2", 2).unwrap()], false)
    }

    #[test]
    fn disk_box_and_samples() {
        let s = disk();
        let c = |x: &[f64]| s.contains(x);
        let (lo, hi) = bounding_box(&c, &[0.0, 0.0], 1e6, 0).unwrap();
        // extent 2 per axis, padded by 5% on each side
        assert!((lo[0] + 1.1).abs() < 1e-6 && (hi[1] - 1.1).abs() < 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = rejection_sample(&c, &lo, &hi, 100, &mut rng);
        assert_eq!(pts.len(), 100);
        assert!(pts.iter().all(|p| s.contains(p)));
    }

    #[test]
    fn half_plane_is_unbounded() {
        let s = BasicSet::new(vec![Polynomial::parse("x1", 2).unwrap()], false);
        let c = |x: &[f64]| s.contains(x);
        assert!(bounding_box(&c, &[1.0, 0.0], 1e4, 0).is_none());
    }

    #[test]
    fn stationary_point_of_shifted_ball() {
        let p = Polynomial::parse("0.01 - x1^2 + 2 x1 - 1 - x2^2", 2).unwrap();
        let x = stationary_point(&p).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
        let s = BasicSet::new(vec![p], false);
        assert_eq!(s.find_member(&[]), Some(x));
    }

    #[test]
    fn member_of_product_set() {
        let set = BasicSet::new(
            vec![
                Polynomial::parse("-x1^2 + 2 x1 - x2^2 + 2 x2 - 1.99", 4).unwrap(),
                Polynomial::parse("-x3^2 - x3 - 0.15", 4).unwrap(),
                Polynomial::parse("-x4^2 - x4 - 0.15", 4).unwrap(),
            ],
            false,
        );
        let x = set.find_member(&[vec![1.5, 1.5, 0.0, 0.0]]).unwrap();
        assert_eq!(x, vec![1.0, 1.0, -0.5, -0.5]);
    }
}
