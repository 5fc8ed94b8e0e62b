//! Conic problems over a named decision layout, and their solutions.

use crate::error::{CbfError, Result};
use crate::expr::AffineExpr;
use crate::sdp::backend::{SolveStatus, SolverBackend, SolverOptions};
use crate::sdp::layout::DecisionLayout;
use crate::sdp::lmi::{AffineMatrix, LmiBlock, Sense};
use crate::sdp::lower::lower;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub name: String,
    pub expr: AffineExpr,
}

/// `minimize objective` subject to LMIs, `equalities = 0`, `inequalities >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub layout: DecisionLayout,
    pub objective: AffineExpr,
    pub lmis: Vec<LmiBlock>,
    pub equalities: Vec<LinearConstraint>,
    pub inequalities: Vec<LinearConstraint>,
}

impl ConicProblem {
    pub fn new(layout: DecisionLayout) -> Self {
        ConicProblem {
            layout,
            objective: AffineExpr::zero(),
            lmis: Vec::new(),
            equalities: Vec::new(),
            inequalities: Vec::new(),
        }
    }

    pub fn add_lmi(&mut self, name: &str, m: AffineMatrix, sense: Sense) {
        self.lmis.push(m.into_lmi(name, sense));
    }

    pub fn add_equality(&mut self, name: &str, expr: AffineExpr) {
        self.equalities.push(LinearConstraint {
            name: name.to_string(),
            expr,
        });
    }

    pub fn add_inequality(&mut self, name: &str, expr: AffineExpr) {
        self.inequalities.push(LinearConstraint {
            name: name.to_string(),
            expr,
        });
    }

    /// Drops every constraint whose name starts with `prefix`. Variables that
    /// become unreferenced are pinned to zero when the problem is lowered.
    pub fn remove_prefixed(&mut self, prefix: &str) {
        self.lmis.retain(|b| !b.name.starts_with(prefix));
        self.equalities.retain(|c| !c.name.starts_with(prefix));
        self.inequalities.retain(|c| !c.name.starts_with(prefix));
    }

    pub fn lmi(&self, name: &str) -> Option<&LmiBlock> {
        self.lmis.iter().find(|b| b.name == name)
    }

    /// Checks that every constraint refers only to declared entries.
    pub fn check_references(&self) -> Result<()> {
        let n = self.layout.len();
        let bad = |e: &AffineExpr| e.max_index().is_some_and(|k| k >= n);
        let mut errors = Vec::new();
        if bad(&self.objective) {
            errors.push("objective references an undeclared entry".to_string());
        }
        for c in self.equalities.iter().chain(&self.inequalities) {
            if bad(&c.expr) {
                errors.push(format!("constraint `{}` references an undeclared entry", c.name));
            }
        }
        for b in &self.lmis {
            if b.coeffs.iter().any(|(k, _)| *k >= n) {
                errors.push(format!("LMI `{}` references an undeclared entry", b.name));
            }
        }
        if self.lmis.is_empty() {
            errors.push("problem has no LMI block".to_string());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CbfError::SpecInvalid(errors))
        }
    }

    /// Largest constraint violation at `values`, measured as negative
    /// eigenvalue / residual magnitude. Zero means feasible.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for c in &self.equalities {
            v = v.max(c.expr.eval(values).abs());
        }
        for c in &self.inequalities {
            v = v.max(-c.expr.eval(values));
        }
        for b in &self.lmis {
            v = v.max(-b.margin(values));
        }
        v
    }

    pub fn solve(&self, backend: &dyn SolverBackend, options: &SolverOptions) -> Result<Solution> {
        self.check_references()?;
        if !backend.supports_psd() {
            return Err(CbfError::Unsupported(format!(
                "backend `{}` has no PSD cone support",
                backend.name()
            )));
        }
        let sf = lower(self);
        let out = backend.solve_standard(&sf, options)?;
        let lmi_margins = self
            .lmis
            .iter()
            .map(|b| (b.name.clone(), b.margin(&out.x)))
            .collect();
        Ok(Solution {
            status: out.status,
            values: out.x,
            objective: out.objective,
            iterations: out.iterations,
            primal_residual: out.primal_residual,
            dual_residual: out.dual_residual,
            solve_time: out.solve_time,
            lmi_margins,
            detail: out.detail,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    /// One value per decision entry of the problem layout.
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub solve_time: f64,
    /// Minimum oriented eigenvalue of every LMI at `values`.
    pub lmi_margins: Vec<(String, f64)>,
    pub detail: String,
}

impl Solution {
    pub fn min_lmi_margin(&self) -> f64 {
        self.lmi_margins
            .iter()
            .map(|(_, m)| *m)
            .fold(f64::INFINITY, f64::min)
    }
}
