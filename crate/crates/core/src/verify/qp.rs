//! Closed-form CBF-QP reference controller and plot-grid scans.

use nalgebra::DVector;

use crate::error::{CbfError, Result};
use crate::model::LinearSystem;
use crate::poly::Polynomial;
use crate::synthesis::CbfFunction;

/// `f(x) = ∇s·Ax + α s(x)` and `g(x) = ∇s·B` for a single-input system.
pub fn cbf_qp_terms(s: &Polynomial, alpha: f64, system: &LinearSystem, x: &[f64]) -> Result<(f64, f64)> {
    if system.m() != 1 {
        return Err(CbfError::Unsupported("the CBF-QP reference needs a single input".into()));
    }
    if x.len() != system.n() || s.nvars() != system.n() {
        return Err(CbfError::DimensionMismatch("state, s and system disagree".into()));
    }
    let grad = DVector::from_vec(s.gradient(x)?);
    let xv = DVector::from_column_slice(x);
    let f = grad.dot(&(system.a() * xv)) + alpha * s.eval(x)?;
    let g = grad.dot(&system.b().column(0));
    Ok((f, g))
}

/// `u_s(x) = −min{0, f(x)} / g(x)`, the minimum-norm input satisfying
/// `ṡ + α s >= 0`.
pub fn cbf_qp_reference(s: &Polynomial, alpha: f64, system: &LinearSystem, x: &[f64]) -> Result<f64> {
    let (f, g) = cbf_qp_terms(s, alpha, system, x)?;
    if f >= 0.0 {
        return Ok(0.0);
    }
    if g == 0.0 {
        return Err(CbfError::UnboundedControl { f });
    }
    Ok(-f / g)
}

/// Evenly spaced axis; a single point sits at the middle of the range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 || !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(CbfError::SpecInvalid(vec![format!(
                "bad grid axis {lo}..{hi} with {count} points"
            )]));
        }
        Ok(Axis { lo, hi, count })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![0.5 * (self.lo + self.hi)];
        }
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.lo + step * i as f64).collect()
    }
}

/// One scan sample `(x1, x2, value)`.
pub type GridRow = [f64; 3];

/// `min(u_s(x)², cap)` over the grid; unbounded points take the cap.
pub fn pathology_scan(
    s: &Polynomial,
    alpha: f64,
    system: &LinearSystem,
    xs: Axis,
    ys: Axis,
    cap: f64,
) -> Result<Vec<GridRow>> {
    if system.n() != 2 {
        return Err(CbfError::Unsupported("pathology scan needs a planar system".into()));
    }
    let mut out = Vec::with_capacity(xs.count * ys.count);
    for &x2 in &ys.points() {
        for &x1 in &xs.points() {
            let v = match cbf_qp_reference(s, alpha, system, &[x1, x2]) {
                Ok(u) => (u * u).min(cap),
                Err(CbfError::UnboundedControl { .. }) => cap,
                Err(e) => return Err(e),
            };
            out.push([x1, x2, v]);
        }
    }
    Ok(out)
}

/// 2-D slice through the state space: coordinates `free.0`, `free.1` vary,
/// the others stay at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub free: (usize, usize),
    pub base: DVector<f64>,
}

impl Slice {
    pub fn new(free: (usize, usize), base: DVector<f64>) -> Result<Self> {
        let n = base.len();
        if free.0 == free.1 || free.0 >= n || free.1 >= n {
            return Err(CbfError::SpecInvalid(vec![format!(
                "slice needs two distinct free coordinates below {n}, got {free:?}"
            )]));
        }
        Ok(Slice { free, base })
    }

    pub fn point(&self, a: f64, b: f64) -> DVector<f64> {
        let mut x = self.base.clone();
        x[self.free.0] = a;
        x[self.free.1] = b;
        x
    }
}

/// `b(x)` over a slice grid.
pub fn level_set_scan(cbf: &CbfFunction, slice: &Slice, xs: Axis, ys: Axis) -> Result<Vec<GridRow>> {
    if slice.base.len() != cbf.n() {
        return Err(CbfError::DimensionMismatch("slice and barrier disagree".into()));
    }
    let mut out = Vec::with_capacity(xs.count * ys.count);
    for &b in &ys.points() {
        for &a in &xs.points() {
            out.push([a, b, cbf.eval(&slice.point(a, b))]);
        }
    }
    Ok(out)
}

/// CSV with header `x1,x2,value`.
pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut out = String::from("x1,x2,value\n");
    for r in rows {
        out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", r[0], r[1], r[2]));
    }
    out
}
