//! Lowering of a [`ConicProblem`] to [`StandardForm`].

use std::f64::consts::SQRT_2;

use crate::expr::AffineExpr;
use crate::sdp::backend::{Cone, StandardForm};
use crate::sdp::problem::ConicProblem;

/// Rows of an LMI whose oriented diagonal entry is identically zero. PSD-ness
/// forces the whole row to vanish, so such rows can be traded for equalities.
pub fn structural_zero_rows(block: &crate::sdp::lmi::LmiBlock) -> Vec<usize> {
    (0..block.dim())
        .filter(|&i| block.oriented_entry(i, i).is_zero())
        .collect()
}

struct Rows {
    a: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
}

impl Rows {
    /// Appends the row `s = scale · expr`, i.e. `b − A x = scale · expr`.
    fn push_slack(&mut self, expr: &AffineExpr, scale: f64) {
        let r = self.b.len();
        self.b.push(scale * expr.constant);
        for (k, v) in expr.terms() {
            self.a.push((r, k, -scale * v));
        }
    }

    /// Appends the row `expr = 0`.
    fn push_equality(&mut self, expr: &AffineExpr) {
        self.push_slack(expr, 1.0);
    }
}

pub fn lower(problem: &ConicProblem) -> StandardForm {
    let n = problem.layout.len();
    let mut q = vec![0.0; n];
    for (k, v) in problem.objective.terms() {
        q[k] += v;
    }

    let mut rows = Rows {
        a: Vec::new(),
        b: Vec::new(),
    };
    let mut cones = Vec::new();

    // Facial reduction: collect kept indices per block and the implied equalities.
    let mut kept: Vec<Vec<usize>> = Vec::with_capacity(problem.lmis.len());
    let mut implied = Vec::new();
    for block in &problem.lmis {
        let zero = structural_zero_rows(block);
        let d = block.dim();
        for &i in &zero {
            for j in 0..d {
                if zero.contains(&j) && j <= i {
                    continue;
                }
                let e = block.oriented_entry(i, j);
                if !e.is_zero() {
                    implied.push(e);
                }
            }
        }
        kept.push((0..d).filter(|i| !zero.contains(i)).collect());
    }

    let mut referenced = vec![false; n];
    let mut mark = |e: &AffineExpr| e.terms().for_each(|(k, _)| referenced[k] = true);
    mark(&problem.objective);
    problem.equalities.iter().chain(&problem.inequalities).for_each(|c| mark(&c.expr));
    for block in &problem.lmis {
        for (k, _) in &block.coeffs {
            referenced[*k] = true;
        }
    }

    let eq_start = rows.b.len();
    for c in &problem.equalities {
        rows.push_equality(&c.expr);
    }
    for e in &implied {
        rows.push_equality(e);
    }
    // orphaned entries (e.g. after a constraint was removed) are pinned to zero
    for (k, used) in referenced.iter().enumerate() {
        if !used {
            rows.push_equality(&AffineExpr::var(k));
        }
    }
    let n_eq = rows.b.len() - eq_start;
    if n_eq > 0 {
        cones.push(Cone::Zero(n_eq));
    }

    if !problem.inequalities.is_empty() {
        for c in &problem.inequalities {
            rows.push_slack(&c.expr, 1.0);
        }
        cones.push(Cone::Nonneg(problem.inequalities.len()));
    }

    for (block, idx) in problem.lmis.iter().zip(&kept) {
        if idx.is_empty() {
            continue;
        }
        let d = idx.len();
        for jj in 0..d {
            for ii in 0..=jj {
                let e = block.oriented_entry(idx[ii], idx[jj]);
                rows.push_slack(&e, if ii == jj { 1.0 } else { SQRT_2 });
            }
        }
        cones.push(Cone::Psd(d));
    }

    StandardForm {
        num_vars: n,
        q,
        q0: problem.objective.constant,
        a: rows.a,
        b: rows.b,
        cones,
    }
}
