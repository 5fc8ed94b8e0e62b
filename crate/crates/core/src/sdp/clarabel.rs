//! [`SolverBackend`] implementation on top of the Clarabel interior-point solver.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::error::{CbfError, Result};
use crate::sdp::backend::{BackendOutput, Cone, SolveStatus, SolverBackend, SolverOptions, StandardForm};

#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelBackend;

fn map_status(s: SolverStatus) -> SolveStatus {
    match s {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalFailure,
    }
}

impl SolverBackend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn supports_psd(&self) -> bool {
        true
    }

    fn solve_standard(&self, sf: &StandardForm, options: &SolverOptions) -> Result<BackendOutput> {
        let n = sf.num_vars;
        let m = sf.num_rows();
        let p = CscMatrix::<f64>::zeros((n, n));
        let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
        for &(i, j, v) in &sf.a {
            ii.push(i);
            jj.push(j);
            vv.push(v);
        }
        let a = CscMatrix::new_from_triplets(m, n, ii, jj, vv);
        let cones: Vec<SupportedConeT<f64>> = sf
            .cones
            .iter()
            .map(|c| match *c {
                Cone::Zero(k) => SupportedConeT::ZeroConeT(k),
                Cone::Nonneg(k) => SupportedConeT::NonnegativeConeT(k),
                Cone::Psd(d) => SupportedConeT::PSDTriangleConeT(d),
            })
            .collect();
        let settings = DefaultSettingsBuilder::default()
            .verbose(options.verbose)
            .max_iter(options.max_iter)
            .tol_feas(options.tol_feas)
            .tol_gap_abs(options.tol_gap_abs)
            .tol_gap_rel(options.tol_gap_rel)
            .presolve_enable(false)
            .chordal_decomposition_enable(false)
            .build()
            .map_err(|e| CbfError::NumericalFailure(format!("solver settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &sf.q, &a, &sf.b, &cones, settings)
            .map_err(|e| CbfError::NumericalFailure(format!("solver setup: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        Ok(BackendOutput {
            status: map_status(sol.status),
            x: sol.x.clone(),
            objective: sol.obj_val + sf.q0,
            iterations: sol.iterations,
            primal_residual: sol.r_prim,
            dual_residual: sol.r_dual,
            solve_time: sol.solve_time,
            detail: format!("{:?}", sol.status),
        })
    }
}
