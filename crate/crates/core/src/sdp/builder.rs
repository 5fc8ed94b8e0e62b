//! Builders for the global, local and input-constrained synthesis programs.
//!
//! Decision variables are registered under fixed names (see [`names`]) so
//! that downstream code can recover them from the layout alone.

use nalgebra::{DMatrix, DVector};

use crate::error::{CbfError, Result};
use crate::expr::AffineExpr;
use crate::model::{restrict_global, CenterData, Containment, InputBound, Mode, MuMode, ProblemSpec, SafeSetSpec};
use crate::poly::Polynomial;
use crate::sdp::{AffineMatrix, ConicProblem, DecisionLayout, Sense, SymVar};
use crate::sos::{sprocedure_emptiness, AffinePoly, SprocedureCert};

pub mod names {
    pub const OMEGA: &str = "omega";
    pub const OMEGA_BAR: &str = "omega_bar";
    pub const OMEGA_UNDER: &str = "omega_under";
    pub const R: &str = "r";
    pub const Y: &str = "y";
    pub const CONTAIN: &str = "contain";
    pub const INVARIANCE: &str = "invariance";
    pub const SCHUR: &str = "schur";
    pub const INPUT: &str = "input";
}

/// `Ω` as a full `n x n` affine matrix: the local variable, or
/// `blkdiag(Ω̄, Ω̲)` in global programs.
pub fn omega_matrix(problem: &ConicProblem) -> AffineMatrix {
    let l = &problem.layout;
    if let Some(o) = l.symmetric(names::OMEGA) {
        return o.matrix();
    }
    let ob = l
        .symmetric(names::OMEGA_BAR)
        .expect("problem has neither omega nor omega_bar");
    match l.symmetric(names::OMEGA_UNDER) {
        None => ob.matrix(),
        Some(ou) => {
            let obm = ob.matrix();
            let oum = ou.matrix();
            AffineMatrix::blocks(&[vec![Some(&obm), None], vec![None, Some(&oum)]])
        }
    }
}

fn y_matrix(problem: &ConicProblem) -> AffineMatrix {
    problem
        .layout
        .dense(names::Y)
        .expect("problem has no y variable")
        .matrix()
}

fn shifted_identity(v: &SymVar, delta: f64, sign: f64) -> AffineMatrix {
    let m = v.matrix().scale(sign);
    m.sub(&AffineMatrix::constant(&DMatrix::from_diagonal_element(v.n, v.n, delta)))
}

/// `ΩAᵀ + YᵀBᵀ + AΩ + BY`.
fn invariance_matrix(problem: &ConicProblem, spec: &ProblemSpec) -> AffineMatrix {
    let omega = omega_matrix(problem);
    let y = y_matrix(problem);
    let x = omega
        .left_mul(spec.system.a())
        .add(&y.left_mul(spec.system.b()));
    x.add(&x.transpose())
}

fn schur_block(r: &SymVar, omega: &AffineMatrix) -> AffineMatrix {
    let id = AffineMatrix::identity(r.n);
    let rm = r.matrix();
    AffineMatrix::blocks(&[vec![Some(&rm), Some(&id)], vec![Some(&id), Some(omega)]])
}

/// `1 − (x − c)ᵀ R (x − c)` with `R` a decision variable.
fn one_minus_quadratic(r: &SymVar, c: &[f64]) -> AffinePoly {
    let n = r.n;
    let shifted: Vec<Polynomial> = (0..n)
        .map(|i| Polynomial::var(n, i) - Polynomial::constant(n, c[i]))
        .collect();
    let mut p = AffinePoly::from_poly(&Polynomial::constant(n, 1.0));
    for i in 0..n {
        for j in 0..n {
            let q = &shifted[i] * &shifted[j];
            p = p.sub(&AffinePoly::scaled_poly(&q, &r.entry(i, j)));
        }
    }
    p
}

fn check_center(spec: &ProblemSpec, center: &CenterData) -> Result<()> {
    if center.c.len() != spec.n() || center.d.len() != spec.m() {
        return Err(CbfError::DimensionMismatch(format!(
            "center data has dimensions ({}, {}), expected ({}, {})",
            center.c.len(),
            center.d.len(),
            spec.n(),
            spec.m()
        )));
    }
    Ok(())
}

/// Global program: minimize `Tr Ω̄` subject to `Ω̄ ⪰ δI`, `−Ω̲ ⪰ δI`,
/// invariance `⪰ 0`, `[[R, I], [I, Ω̄]] ⪰ 0`, and the containment
/// certificate selected in the spec.
pub fn build_global(spec: &ProblemSpec, center: &CenterData) -> Result<ConicProblem> {
    if spec.mode != Mode::Global {
        return Err(CbfError::SpecInvalid(vec!["build_global needs a global-mode spec".into()]));
    }
    check_center(spec, center)?;
    let nb = spec.partition.n_bar;
    let nu = spec.partition.n_under;
    let (n, m) = (spec.n(), spec.m());
    if nb + nu != n {
        return Err(CbfError::SpecInvalid(vec!["partition does not match the state dimension".into()]));
    }
    let delta = spec.options.delta;

    let mut layout = DecisionLayout::new();
    let ob = layout.add_symmetric(names::OMEGA_BAR, nb);
    let ou = (nu > 0).then(|| layout.add_symmetric(names::OMEGA_UNDER, nu));
    let r = layout.add_symmetric(names::R, nb);
    layout.add_dense(names::Y, m, n);
    let mut p = ConicProblem::new(layout);
    p.objective = ob.trace();

    p.add_lmi("omega_bar_pd", shifted_identity(&ob, delta, 1.0), Sense::Psd);
    if let Some(ou) = &ou {
        p.add_lmi("omega_under_nd", shifted_identity(ou, delta, -1.0), Sense::Psd);
    }
    let inv = invariance_matrix(&p, spec);
    p.add_lmi(names::INVARIANCE, inv, Sense::Psd);
    p.add_lmi(names::SCHUR, schur_block(&r, &ob.matrix()), Sense::Psd);

    let c_bar: Vec<f64> = center.c.rows(0, nb).iter().copied().collect();
    match &spec.containment {
        Containment::Sos => {
            add_sos_containment_global(&mut p, spec, &c_bar)?;
        }
        Containment::Vertices(vs) => {
            add_vertex_containment(&mut p, vs, &DVector::from_vec(c_bar))?;
        }
    }
    Ok(p)
}

/// `1 − x̄_cᵀ R x̄_c + Σ σ_i s_i − ε ∈ Σ[x̄]`.
pub fn add_sos_containment_global(
    problem: &mut ConicProblem,
    spec: &ProblemSpec,
    c_bar: &[f64],
) -> Result<SprocedureCert> {
    let SafeSetSpec::GlobalUnion(polys) = &spec.safe_set else {
        return Err(CbfError::SpecInvalid(vec!["global containment needs a union safe set".into()]));
    };
    let r = problem
        .layout
        .symmetric(names::R)
        .ok_or_else(|| CbfError::SpecInvalid(vec!["problem has no R variable".into()]))?;
    let target = one_minus_quadratic(&r, c_bar);
    let region = polys
        .iter()
        .map(|s| restrict_global(s, spec.partition.n_bar).map(|q| -&q))
        .collect::<Result<Vec<_>>>()?;
    sprocedure_emptiness(
        problem,
        names::CONTAIN,
        &target,
        &region,
        spec.options.multiplier_degree,
        &AffineExpr::constant(spec.options.epsilon),
    )
}

/// Replaces the SOS containment certificate by `1 − (v − c̄)ᵀR(v − c̄) >= 0`
/// at every vertex of the unsafe set's projection.
pub fn add_vertex_containment(problem: &mut ConicProblem, vertices: &[DVector<f64>], c_bar: &DVector<f64>) -> Result<()> {
    if vertices.is_empty() {
        return Err(CbfError::EmptyVertexList);
    }
    let r = problem
        .layout
        .symmetric(names::R)
        .ok_or_else(|| CbfError::SpecInvalid(vec!["problem has no R variable".into()]))?;
    if vertices.iter().any(|v| v.len() != r.n) || c_bar.len() != r.n {
        return Err(CbfError::DimensionMismatch(format!(
            "vertices and center must have length {}",
            r.n
        )));
    }
    problem.remove_prefixed(names::CONTAIN);
    for (k, v) in vertices.iter().enumerate() {
        let w = v - c_bar;
        let mut e = AffineExpr::constant(1.0);
        for i in 0..r.n {
            for j in 0..r.n {
                e.add_term(r.index(i, j), -w[i] * w[j]);
            }
        }
        problem.add_inequality(&format!("{}.vertex{}", names::CONTAIN, k + 1), e);
    }
    Ok(())
}

/// Local program: minimize `Tr Ω` subject to `Ω ⪰ δI`, invariance `⪯ 0`,
/// `[[R, I], [I, Ω]] ⪰ 0`, `1 − x_cᵀRx_c − Σσ_i w_i ∈ Σ[x]` and
/// `1 − â_iᵀΩâ_i >= 0` per halfspace.
pub fn build_local(spec: &ProblemSpec, center: &CenterData) -> Result<ConicProblem> {
    if spec.mode != Mode::Local {
        return Err(CbfError::SpecInvalid(vec!["build_local needs a local-mode spec".into()]));
    }
    check_center(spec, center)?;
    let SafeSetSpec::LocalHalfspaces(hs) = &spec.safe_set else {
        return Err(CbfError::SpecInvalid(vec!["local mode needs a halfspace safe set".into()]));
    };
    let init = spec
        .initial_set
        .as_ref()
        .ok_or_else(|| CbfError::SpecInvalid(vec!["initial set required in local mode".into()]))?;
    let (n, m) = (spec.n(), spec.m());

    let mut layout = DecisionLayout::new();
    let om = layout.add_symmetric(names::OMEGA, n);
    let r = layout.add_symmetric(names::R, n);
    layout.add_dense(names::Y, m, n);
    let mut p = ConicProblem::new(layout);
    p.objective = om.trace();

    p.add_lmi("omega_pd", shifted_identity(&om, spec.options.delta, 1.0), Sense::Psd);
    let inv = invariance_matrix(&p, spec);
    p.add_lmi(names::INVARIANCE, inv, Sense::Nsd);
    p.add_lmi(names::SCHUR, schur_block(&r, &om.matrix()), Sense::Psd);

    let c: Vec<f64> = center.c.iter().copied().collect();
    let target = one_minus_quadratic(&r, &c);
    sprocedure_emptiness(
        &mut p,
        names::CONTAIN,
        &target,
        &init.polys,
        spec.options.multiplier_degree,
        &AffineExpr::zero(),
    )?;

    for (i, h) in hs.iter().enumerate() {
        let a = h.relative_to(&center.c)?;
        let mut e = AffineExpr::constant(1.0);
        for j in 0..n {
            for k in 0..n {
                e.add_term(om.index(j, k), -a[j] * a[k]);
            }
        }
        p.add_inequality(&format!("halfspace{}", i + 1), e);
    }
    Ok(p)
}

/// Record of the scalar μ used by one input-bound block.
#[derive(Debug, Clone, PartialEq)]
pub enum MuChoice {
    Fixed(f64),
    /// Flat index of the decision scalar.
    Free(usize),
}

/// Block for `‖row·u‖`-type bounds shared by the L2 and L∞ variants:
/// `rows` selects the output (`I_m` for L2, `e_iᵀ` for L∞).
#[allow(clippy::too_many_arguments)]
fn add_norm_block(
    problem: &mut ConicProblem,
    name: &str,
    rows: &DMatrix<f64>,
    d: &DVector<f64>,
    gamma: f64,
    mu_mode: MuMode,
    delta: f64,
) -> MuChoice {
    let omega = omega_matrix(problem);
    let oy = y_matrix(problem).left_mul(rows); // O_i Y
    let od = rows * d; // O_i d
    let k = rows.nrows();
    // (O_i Y)ᵀ (O_i d): Yᵀd for L2, Y_iᵀ d_i for component i
    let ytd = oy.transpose().right_mul(&DMatrix::from_column_slice(k, 1, od.as_slice()));
    let n = omega.rows();
    match mu_mode {
        MuMode::Fixed => {
            let mu = gamma / 2.0;
            let corner = AffineMatrix::constant(&DMatrix::from_element(1, 1, mu * (gamma - mu)));
            let mu_i = AffineMatrix::constant(&DMatrix::from_diagonal_element(k, k, mu));
            let oyt = oy.transpose();
            let dty = ytd.transpose();
            let blk = AffineMatrix::blocks(&[
                vec![Some(&omega), Some(&ytd), Some(&oyt)],
                vec![Some(&dty), Some(&corner), None],
                vec![Some(&oy), None, Some(&mu_i)],
            ]);
            problem.add_lmi(name, blk, Sense::Psd);
            MuChoice::Fixed(mu)
        }
        MuMode::Free => {
            let mu = problem.layout.add_scalar(&format!("{name}.mu"));
            let mu_e = mu.expr();
            let corner = AffineMatrix::from_fn(1, 1, |_, _| mu_e.scale(gamma));
            let mu_i = AffineMatrix::from_fn(k, k, |i, j| if i == j { mu_e.clone() } else { AffineExpr::zero() });
            let oyt = oy.transpose();
            let dty = ytd.transpose();
            let p11 = AffineMatrix::blocks(&[
                vec![Some(&omega), Some(&ytd), Some(&oyt)],
                vec![Some(&dty), Some(&corner), None],
                vec![Some(&oy), None, Some(&mu_i)],
            ]);
            let s = n + 1 + k;
            let p12 = AffineMatrix::from_fn(s, s, |i, j| if i == n && j == n { mu_e.clone() } else { AffineExpr::zero() });
            let id = AffineMatrix::identity(s);
            let p12t = p12.transpose();
            let blk = AffineMatrix::blocks(&[vec![Some(&p11), Some(&p12)], vec![Some(&p12t), Some(&id)]]);
            problem.add_lmi(name, blk, Sense::Psd);
            problem.add_inequality(&format!("{name}.mu_lower"), &mu_e - &AffineExpr::constant(delta));
            problem.add_inequality(&format!("{name}.mu_upper"), &AffineExpr::constant(gamma - delta) - &mu_e);
            MuChoice::Free(mu.0)
        }
    }
}

fn budget(zeta: f64, eps: f64, d: &DVector<f64>) -> Result<f64> {
    let gamma = -d.dot(d) + zeta - eps;
    if gamma > 0.0 {
        Ok(gamma)
    } else {
        Err(CbfError::BudgetExhausted(format!(
            "-dᵀd + ζ - ε = {gamma:.6e} <= 0 (‖d‖² = {:.6e}, ζ = {zeta}, ε = {eps})",
            d.dot(d)
        )))
    }
}

/// `‖u‖₂² <= ζ − ε` on `B^c`.
pub fn add_input_bound_l2(
    problem: &mut ConicProblem,
    zeta: f64,
    eps: f64,
    d: &DVector<f64>,
    mu_mode: MuMode,
    delta: f64,
) -> Result<Vec<MuChoice>> {
    let gamma = budget(zeta, eps, d)?;
    let m = d.len();
    let name = format!("{}.l2", names::INPUT);
    Ok(vec![add_norm_block(problem, &name, &DMatrix::identity(m, m), d, gamma, mu_mode, delta)])
}

/// `|u_i|² <= ζ − ε` on `B^c` for every component, one block per component.
pub fn add_input_bound_linf(
    problem: &mut ConicProblem,
    zeta: f64,
    eps: f64,
    d: &DVector<f64>,
    mu_mode: MuMode,
    delta: f64,
) -> Result<Vec<MuChoice>> {
    let gamma = budget(zeta, eps, d)?;
    let m = d.len();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut sel = DMatrix::zeros(1, m);
        sel[(0, i)] = 1.0;
        let name = format!("{}.linf{}", names::INPUT, i + 1);
        out.push(add_norm_block(problem, &name, &sel, d, gamma, mu_mode, delta));
    }
    Ok(out)
}

/// `H_i u <= h_i − ε/2` on `B^c`, one block per row of `H`.
#[allow(clippy::too_many_arguments)]
pub fn add_input_bound_polytope(
    problem: &mut ConicProblem,
    h_mat: &DMatrix<f64>,
    h: &DVector<f64>,
    eps: f64,
    d: &DVector<f64>,
    mu_mode: MuMode,
    delta: f64,
) -> Result<Vec<MuChoice>> {
    if h_mat.nrows() != h.len() || h_mat.ncols() != d.len() {
        return Err(CbfError::DimensionMismatch("H, h and d disagree".into()));
    }
    let omega = omega_matrix(problem);
    let y = y_matrix(problem);
    let n = omega.rows();
    let mut out = Vec::with_capacity(h.len());
    for i in 0..h.len() {
        let hi = h_mat.rows(i, 1).into_owned();
        let g = -2.0 * (hi.clone() * d)[0] + 2.0 * h[i] - eps;
        if g <= 0.0 {
            return Err(CbfError::BudgetExhausted(format!(
                "row {}: h_i - H_i d = {:.6e} <= ε/2",
                i + 1,
                h[i] - (hi.clone() * d)[0]
            )));
        }
        let hy = y.left_mul(&hi); // 1 x n
        let hyt = hy.transpose();
        let name = format!("{}.poly{}", names::INPUT, i + 1);
        match mu_mode {
            MuMode::Fixed => {
                let mu = g / 2.0;
                let corner = AffineMatrix::constant(&DMatrix::from_element(1, 1, mu * (g - mu)));
                let blk = AffineMatrix::blocks(&[vec![Some(&omega), Some(&hyt)], vec![Some(&hy), Some(&corner)]]);
                problem.add_lmi(&name, blk, Sense::Psd);
                out.push(MuChoice::Fixed(mu));
            }
            MuMode::Free => {
                let mu = problem.layout.add_scalar(&format!("{name}.mu"));
                let mu_e = mu.expr();
                let corner = AffineMatrix::from_fn(1, 1, |_, _| mu_e.scale(g));
                let x11 = AffineMatrix::blocks(&[vec![Some(&omega), Some(&hyt)], vec![Some(&hy), Some(&corner)]]);
                let s = n + 1;
                let x12 = AffineMatrix::from_fn(s, s, |a, b| if a == n && b == n { mu_e.clone() } else { AffineExpr::zero() });
                let x12t = x12.transpose();
                let id = AffineMatrix::identity(s);
                let blk = AffineMatrix::blocks(&[vec![Some(&x11), Some(&x12)], vec![Some(&x12t), Some(&id)]]);
                problem.add_lmi(&name, blk, Sense::Psd);
                problem.add_inequality(&format!("{name}.mu_lower"), &mu_e - &AffineExpr::constant(delta));
                out.push(MuChoice::Free(mu.0));
            }
        }
    }
    Ok(out)
}

/// `[[(ζ − ε) I_m, Y], [Yᵀ, Ω]] ⪰ 0`, i.e. `KΩKᵀ ⪯ (ζ − ε) I` for a global
/// program with `d = 0` and no x̲ block.
pub fn add_global_input_bound_l2(problem: &mut ConicProblem, zeta: f64, eps: f64, d: &DVector<f64>) -> Result<()> {
    if d.iter().any(|v| *v != 0.0) {
        return Err(CbfError::Unsupported(
            "global input bound needs a center with d = 0".into(),
        ));
    }
    if problem.layout.symmetric(names::OMEGA_UNDER).is_some() {
        return Err(CbfError::Unsupported(
            "global input bound needs n_under = 0 (Ω must be positive definite)".into(),
        ));
    }
    let budget = zeta - eps;
    if budget <= 0.0 {
        return Err(CbfError::BudgetExhausted(format!("ζ - ε = {budget:.6e} <= 0")));
    }
    let omega = omega_matrix(problem);
    let y = y_matrix(problem);
    let m = y.rows();
    let top = AffineMatrix::constant(&DMatrix::from_diagonal_element(m, m, budget));
    let yt = y.transpose();
    let blk = AffineMatrix::blocks(&[vec![Some(&top), Some(&y)], vec![Some(&yt), Some(&omega)]]);
    problem.add_lmi(&format!("{}.global_l2", names::INPUT), blk, Sense::Psd);
    Ok(())
}

/// Full program for a spec: mode-specific base, containment certificate and
/// input bound.
pub fn build(spec: &ProblemSpec, center: &CenterData) -> Result<(ConicProblem, Vec<MuChoice>)> {
    let mut p = match spec.mode {
        Mode::Global => build_global(spec, center)?,
        Mode::Local => build_local(spec, center)?,
    };
    let ib = &spec.input_bound;
    let (mu_mode, delta) = (spec.options.mu_mode, spec.options.delta);
    let mus = match (spec.mode, &ib.bound) {
        (_, InputBound::None) => Vec::new(),
        (Mode::Global, InputBound::L2 { zeta }) => {
            add_global_input_bound_l2(&mut p, *zeta, ib.epsilon, &center.d)?;
            Vec::new()
        }
        (Mode::Global, _) => {
            return Err(CbfError::Unsupported("global mode supports only an L2 input bound".into()))
        }
        (Mode::Local, InputBound::L2 { zeta }) => add_input_bound_l2(&mut p, *zeta, ib.epsilon, &center.d, mu_mode, delta)?,
        (Mode::Local, InputBound::Linf { zeta }) => {
            add_input_bound_linf(&mut p, *zeta, ib.epsilon, &center.d, mu_mode, delta)?
        }
        (Mode::Local, InputBound::Polytope { h_mat, h }) => {
            add_input_bound_polytope(&mut p, h_mat, h, ib.epsilon, &center.d, mu_mode, delta)?
        }
    };
    Ok((p, mus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::example1_spec;
    use crate::model::{prepare_center, Halfspace, InitialSetSpec, InputBoundSpec, LinearSystem, StatePartition};
    use crate::sdp::{ClarabelBackend, SolveStatus, SolverOptions};

    fn solve(p: &ConicProblem) -> crate::sdp::Solution {
        p.solve(&ClarabelBackend, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn example1_optimum_and_structure() {
        let spec = example1_spec();
        let center = prepare_center(&spec.system, &DVector::zeros(2), 1e-9).unwrap();
        let p = build_global(&spec, &center).unwrap();
        assert!(p.layout.symmetric(names::OMEGA_UNDER).is_some());
        let sol = solve(&p);
        assert_eq!(sol.status, SolveStatus::Optimal, "{}", sol.detail);
        let ob = p.layout.symmetric(names::OMEGA_BAR).unwrap().value(&sol.values)[(0, 0)];
        let ou = p.layout.symmetric(names::OMEGA_UNDER).unwrap().value(&sol.values)[(0, 0)];
        let y = p.layout.dense(names::Y).unwrap().value(&sol.values);
        assert!(ob > 1.0 && ob <= 1.1, "Ω̄ = {ob}");
        assert!((ou + y[(0, 0)]).abs() <= 1e-6 * ou.abs(), "Ω̲ = {ou}, Y1 = {}", y[(0, 0)]);
        assert!(y[(0, 1)] >= -1e-9);
        assert!(sol.min_lmi_margin() >= -1e-8, "{:?}", sol.lmi_margins);
    }

    #[test]
    fn no_under_block_when_partition_is_full() {
        let mut spec = example1_spec();
        spec.partition = StatePartition::full(2);
        spec.safe_set = SafeSetSpec::GlobalUnion(vec![Polynomial::parse("x1^2 + x2^2 - 1", 2).unwrap()]);
        let center = prepare_center(&spec.system, &DVector::zeros(2), 1e-9).unwrap();
        let p = build_global(&spec, &center).unwrap();
        assert!(p.layout.symmetric(names::OMEGA_UNDER).is_none());
        assert_eq!(omega_matrix(&p), p.layout.symmetric(names::OMEGA_BAR).unwrap().matrix());
    }

    fn zero_dynamics_local() -> ProblemSpec {
        let sys = LinearSystem::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 2)).unwrap();
        let hs = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
            .iter()
            .map(|&(a, b)| Halfspace::new(DVector::from_vec(vec![a, b]), 1.0))
            .collect();
        ProblemSpec {
            system: sys,
            partition: StatePartition::full(2),
            mode: Mode::Local,
            safe_set: SafeSetSpec::LocalHalfspaces(hs),
            initial_set: Some(InitialSetSpec {
                polys: vec![Polynomial::parse("0.01 - x1^2 - x2^2", 2).unwrap()],
            }),
            input_bound: InputBoundSpec::none(),
            center: Some(DVector::zeros(2)),
            containment: Containment::Sos,
            options: Default::default(),
        }
    }

    #[test]
    fn local_zero_dynamics_is_feasible() {
        let spec = zero_dynamics_local();
        let center = prepare_center(&spec.system, &DVector::zeros(2), 1e-9).unwrap();
        let p = build_local(&spec, &center).unwrap();
        let sol = solve(&p);
        assert_eq!(sol.status, SolveStatus::Optimal, "{}", sol.detail);
        let om = p.layout.symmetric(names::OMEGA).unwrap().value(&sol.values);
        // Tr Ω is minimized down to the initial ball: Ω ≈ 0.01 I
        assert!((om.trace() - 0.02).abs() < 1e-4, "{om}");
        for c in &p.inequalities {
            assert!(c.expr.eval(&sol.values) >= -1e-9, "{}", c.name);
        }
    }

    #[test]
    fn global_and_local_invariance_blocks_differ_by_sign() {
        let sys = LinearSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.3, 1.0, -0.2, 0.5]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        let mut g = example1_spec();
        g.system = sys.clone();
        g.partition = StatePartition::full(2);
        g.safe_set = SafeSetSpec::GlobalUnion(vec![Polynomial::parse("x1^2 + x2^2 - 1", 2).unwrap()]);
        let mut l = zero_dynamics_local();
        l.system = sys.clone();
        l.input_bound = InputBoundSpec::none();
        let center = prepare_center(&sys, &DVector::zeros(2), 1e-9).unwrap();
        let pg = build_global(&g, &center).unwrap();
        let pl = build_local(&l, &center).unwrap();
        let bg = pg.lmi(names::INVARIANCE).unwrap();
        let bl = pl.lmi(names::INVARIANCE).unwrap();
        assert_eq!((bg.sense, bl.sense), (Sense::Psd, Sense::Nsd));
        // same matrix, opposite cone; Ω̄/Ω and Y sit at different flat indices
        assert_eq!(bg.constant, bl.constant);
        let ob = pg.layout.symmetric(names::OMEGA_BAR).unwrap();
        let om = pl.layout.symmetric(names::OMEGA).unwrap();
        let (yg, yl) = (pg.layout.dense(names::Y).unwrap(), pl.layout.dense(names::Y).unwrap());
        let coeff = |b: &crate::sdp::LmiBlock, k: usize| {
            b.coeffs.iter().find(|(i, _)| *i == k).map(|(_, m)| m.clone())
        };
        for i in 0..2 {
            for j in i..2 {
                assert_eq!(coeff(bg, ob.index(i, j)), coeff(bl, om.index(i, j)));
            }
            assert_eq!(coeff(bg, yg.index(0, i)), coeff(bl, yl.index(0, i)));
        }
    }

    #[test]
    fn vertex_square_caps_r_at_one_half() {
        let mut spec = example1_spec();
        spec.partition = StatePartition::full(2);
        spec.system = LinearSystem::new(-DMatrix::identity(2, 2), DMatrix::identity(2, 2)).unwrap();
        spec.safe_set = SafeSetSpec::GlobalUnion(vec![Polynomial::parse("x1^2 - 1", 2).unwrap()]);
        let center = prepare_center(&spec.system, &DVector::zeros(2), 1e-9).unwrap();
        let mut p = build_global(&spec, &center).unwrap();
        let verts: Vec<DVector<f64>> = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .iter()
            .map(|&(a, b)| DVector::from_vec(vec![a, b]))
            .collect();
        add_vertex_containment(&mut p, &verts, &DVector::zeros(2)).unwrap();
        assert!(p.lmis.iter().all(|b| !b.name.starts_with(names::CONTAIN)));
        assert_eq!(p.inequalities.len(), 4);
        let r = p.layout.symmetric(names::R).unwrap();
        let at = |rv: f64| {
            let mut v = vec![0.0; p.layout.len()];
            v[r.index(0, 0)] = rv;
            v[r.index(1, 1)] = rv;
            p.inequalities.iter().all(|c| c.expr.eval(&v) >= 0.0)
        };
        assert!(at(0.5) && at(0.3) && !at(0.5 + 1e-9));
        assert!(matches!(
            add_vertex_containment(&mut p, &[], &DVector::zeros(2)),
            Err(CbfError::EmptyVertexList)
        ));
    }

    #[test]
    fn fixed_mu_value_and_budget_errors() {
        let spec = zero_dynamics_local();
        let center = prepare_center(&spec.system, &DVector::zeros(2), 1e-9).unwrap();
        let mut p = build_local(&spec, &center).unwrap();
        let mus = add_input_bound_l2(&mut p, 4.0, 1e-3, &DVector::zeros(2), MuMode::Fixed, 1e-6).unwrap();
        assert_eq!(mus, vec![MuChoice::Fixed((4.0 - 1e-3) / 2.0)]);
        let d = DVector::from_vec(vec![2.0, 0.0]);
        assert!(matches!(
            add_input_bound_l2(&mut p, 4.0, 1e-3, &d, MuMode::Fixed, 1e-6),
            Err(CbfError::BudgetExhausted(_))
        ));
        assert!(matches!(
            add_input_bound_linf(&mut p, 4.0, 1e-3, &d, MuMode::Free, 1e-6),
            Err(CbfError::BudgetExhausted(_))
        ));
        let h_mat = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(matches!(
            add_input_bound_polytope(&mut p, &h_mat, &DVector::from_element(1, 2.0), 1e-3, &d, MuMode::Fixed, 1e-6),
            Err(CbfError::BudgetExhausted(_))
        ));
    }

    #[test]
    fn input_bound_variants_solve() {
        for mode in [MuMode::Fixed, MuMode::Free] {
            let spec = zero_dynamics_local();
            let center = prepare_center(&spec.system, &DVector::zeros(2), 1e-9).unwrap();
            let d = DVector::zeros(2);
            let mut p = build_local(&spec, &center).unwrap();
            add_input_bound_l2(&mut p, 0.5, 1e-3, &d, mode, 1e-6).unwrap();
            add_input_bound_linf(&mut p, 0.5, 1e-3, &d, mode, 1e-6).unwrap();
            let h_mat = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, 0.0]);
            add_input_bound_polytope(&mut p, &h_mat, &DVector::from_vec(vec![0.5, 0.5]), 1e-3, &d, mode, 1e-6)
                .unwrap();
            let sol = solve(&p);
            assert_eq!(sol.status, SolveStatus::Optimal, "{mode:?}: {}", sol.detail);
            assert!(sol.min_lmi_margin() > -1e-7, "{:?}", sol.lmi_margins);
        }
    }

    #[test]
    fn global_l2_requires_zero_offset() {
        let mut spec = example1_spec();
        spec.partition = StatePartition::full(2);
        spec.safe_set = SafeSetSpec::GlobalUnion(vec![Polynomial::parse("x1^2 + x2^2 - 1", 2).unwrap()]);
        let center = prepare_center(&spec.system, &DVector::zeros(2), 1e-9).unwrap();
        let mut p = build_global(&spec, &center).unwrap();
        assert!(add_global_input_bound_l2(&mut p, 8.0, 1e-3, &DVector::from_element(1, 0.1)).is_err());
        assert!(matches!(
            add_global_input_bound_l2(&mut p, 1e-3, 1e-3, &DVector::zeros(1)),
            Err(CbfError::BudgetExhausted(_))
        ));
        add_global_input_bound_l2(&mut p, 8.0, 1e-3, &DVector::zeros(1)).unwrap();
        // Y = 0 leaves Ω ⪰ 0
        let blk = p.lmi("input.global_l2").unwrap();
        let mut v = vec![0.0; p.layout.len()];
        let ob = p.layout.symmetric(names::OMEGA_BAR).unwrap();
        v[ob.index(0, 0)] = 1.0;
        v[ob.index(1, 1)] = 1.0;
        assert!(blk.margin(&v) >= 0.0);
    }
}
