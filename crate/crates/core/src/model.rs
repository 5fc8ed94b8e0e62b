//! Problem data: linear systems, safe/initial sets, input bounds, options,
//! and the center/offset preprocessing shared by every program.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{CbfError, Result};
use crate::poly::Polynomial;
use crate::sdp::{ClarabelBackend, ConicProblem, DecisionLayout, SolveStatus, SolverOptions};
use crate::sdp::{AffineMatrix, Sense};
use crate::sets::{bounding_box, BasicSet};

/// `ẋ = A x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(CbfError::DimensionMismatch(format!(
                "A must be square and nonempty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != a.nrows() || b.ncols() == 0 {
            return Err(CbfError::DimensionMismatch(format!(
                "B must be {}xm with m >= 1, got {}x{}",
                a.nrows(),
                b.nrows(),
                b.ncols()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(CbfError::SpecInvalid(vec!["system matrices contain non-finite entries".into()]));
        }
        Ok(LinearSystem { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// PBH test: `rank [A − λI, B] = n` for every eigenvalue with `Re λ >= 0`.
    pub fn is_stabilizable(&self, tol: f64) -> bool {
        let n = self.n();
        let m = self.m();
        let eigs = self.a.complex_eigenvalues();
        eigs.iter().filter(|l| l.re >= -tol).all(|l: &Complex<f64>| {
            // real embedding of the complex matrix [A − λI, B]
            let mut big = DMatrix::zeros(2 * n, 2 * (n + m));
            for i in 0..n {
                for j in 0..n {
                    let re = self.a[(i, j)] - if i == j { l.re } else { 0.0 };
                    let im = if i == j { -l.im } else { 0.0 };
                    big[(i, j)] = re;
                    big[(i, n + m + j)] = -im;
                    big[(n + i, j)] = im;
                    big[(n + i, n + m + j)] = re;
                }
                for j in 0..m {
                    big[(i, n + j)] = self.b[(i, j)];
                    big[(n + i, n + m + n + j)] = self.b[(i, j)];
                }
            }
            let sv = big.singular_values();
            let smax = sv.max();
            sv.iter().filter(|s| **s > tol.max(1e-12) * smax.max(1.0)).count() == 2 * n
        })
    }
}

/// `x = [x̄; x̲]` with `dim x̄ = n_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatePartition {
    pub n_bar: usize,
    pub n_under: usize,
}

impl StatePartition {
    pub fn new(n_bar: usize, n_under: usize) -> Self {
        StatePartition { n_bar, n_under }
    }

    pub fn full(n: usize) -> Self {
        StatePartition { n_bar: n, n_under: 0 }
    }

    pub fn n(&self) -> usize {
        self.n_bar + self.n_under
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Global,
    Local,
}

/// Halfspace `aᵀx + offset >= 0` in absolute coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub a: DVector<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(a: DVector<f64>, offset: f64) -> Self {
        Halfspace { a, offset }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.a.dot(x) + self.offset
    }

    /// Rescales to the form `âᵀ(x − c) + 1 >= 0`; needs `c` strictly inside.
    pub fn relative_to(&self, c: &DVector<f64>) -> Result<DVector<f64>> {
        let v = self.value(c);
        if v <= 0.0 || !v.is_finite() {
            return Err(CbfError::SpecInvalid(vec![format!(
                "center violates halfspace (value {v:.3e}); it must lie strictly inside the safe set"
            )]));
        }
        Ok(&self.a / v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SafeSetSpec {
    /// `S = ∪ {s_i >= 0}`; polynomials over the full state, depending on x̄ only.
    GlobalUnion(Vec<Polynomial>),
    /// `S = ∩ {a_iᵀx + o_i >= 0}`.
    LocalHalfspaces(Vec<Halfspace>),
}

/// `I = ∩ {w_i >= 0}` over the full state.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSetSpec {
    pub polys: Vec<Polynomial>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputBound {
    None,
    /// `‖u‖₂² <= ζ`.
    L2 { zeta: f64 },
    /// `|u_i|² <= ζ` for every component.
    Linf { zeta: f64 },
    /// `H u <= h`.
    Polytope { h_mat: DMatrix<f64>, h: DVector<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputBoundSpec {
    pub bound: InputBound,
    pub epsilon: f64,
}

impl InputBoundSpec {
    pub fn none() -> Self {
        InputBoundSpec {
            bound: InputBound::None,
            epsilon: 1e-3,
        }
    }

    pub fn is_none(&self) -> bool {
        self.bound == InputBound::None
    }
}

/// How the input-bound scalar μ is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuMode {
    /// μ pinned to its maximizer; reduced block.
    Fixed,
    /// μ a decision variable in the lifted block.
    Free,
}

/// How the global program certifies that the unsafe set avoids `B`.
#[derive(Debug, Clone, PartialEq)]
pub enum Containment {
    Sos,
    /// Vertices of the projection of `S^c` onto the x̄ coordinates.
    Vertices(Vec<DVector<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    /// Degree of the S-procedure multipliers (even).
    pub multiplier_degree: u32,
    /// SOS margin.
    pub epsilon: f64,
    /// Closure margin for strict LMIs.
    pub delta: f64,
    pub mu_mode: MuMode,
    /// Relative tolerance of the rank condition in [`prepare_center`].
    pub rank_tol: f64,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            multiplier_degree: 2,
            epsilon: 1e-6,
            delta: 1e-6,
            mu_mode: MuMode::Fixed,
            rank_tol: 1e-9,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub system: LinearSystem,
    pub partition: StatePartition,
    pub mode: Mode,
    pub safe_set: SafeSetSpec,
    pub initial_set: Option<InitialSetSpec>,
    pub input_bound: InputBoundSpec,
    /// `None` selects the default center (see [`resolve_center`]).
    pub center: Option<DVector<f64>>,
    pub containment: Containment,
    pub options: SynthesisOptions,
}

impl ProblemSpec {
    pub fn n(&self) -> usize {
        self.system.n()
    }

    pub fn m(&self) -> usize {
        self.system.m()
    }

    /// Global unsafe-set projection `S^c = {x̄ : s_i(x̄) < 0 ∀i}` as a set
    /// over the x̄ coordinates.
    pub fn unsafe_projection(&self) -> Result<BasicSet> {
        match &self.safe_set {
            SafeSetSpec::GlobalUnion(ps) => {
                let polys = ps
                    .iter()
                    .map(|p| restrict_global(p, self.partition.n_bar).map(|q| -&q))
                    .collect::<Result<Vec<_>>>()?;
                Ok(BasicSet::new(polys, true))
            }
            SafeSetSpec::LocalHalfspaces(_) => Err(CbfError::Unsupported(
                "unsafe projection is defined for global specs only".into(),
            )),
        }
    }

    pub fn initial_basic_set(&self) -> Option<BasicSet> {
        self.initial_set
            .as_ref()
            .map(|i| BasicSet::new(i.polys.clone(), false))
    }
}

/// Brings a global safe-set polynomial onto the x̄ coordinates.
pub fn restrict_global(p: &Polynomial, n_bar: usize) -> Result<Polynomial> {
    if p.nvars() == n_bar {
        Ok(p.clone())
    } else {
        p.restrict_to_leading(n_bar)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn into_result(self) -> Result<ValidationReport> {
        if self.is_valid() {
            Ok(self)
        } else {
            Err(CbfError::SpecInvalid(self.errors))
        }
    }
}

const BOUNDEDNESS_RADIUS: f64 = 1e6;

pub fn validate_spec(spec: &ProblemSpec) -> ValidationReport {
    let mut r = ValidationReport::default();
    let n = spec.n();
    let m = spec.m();
    let part = spec.partition;
    let opts = &spec.options;

    if part.n() != n {
        r.errors.push(format!(
            "partition n_bar + n_under = {} but the state has dimension {n}",
            part.n()
        ));
    }
    if part.n_bar == 0 {
        r.errors.push("n_bar must be at least 1".into());
    }
    if spec.mode == Mode::Local && part.n_under != 0 {
        r.errors.push("local mode requires n_bar = n".into());
    }
    if !opts.multiplier_degree.is_multiple_of(2) {
        r.errors.push(format!(
            "multiplier_degree must be even, got {}",
            opts.multiplier_degree
        ));
    }
    for (name, v) in [("epsilon", opts.epsilon), ("delta", opts.delta), ("rank_tol", opts.rank_tol)] {
        if !(v > 0.0 && v.is_finite()) {
            r.errors.push(format!("{name} must be positive, got {v}"));
        }
    }
    if let Some(c) = &spec.center {
        if c.len() != n {
            r.errors.push(format!("center has length {} but n = {n}", c.len()));
        } else if c.iter().any(|v| !v.is_finite()) {
            r.errors.push("center has non-finite entries".into());
        }
    }

    match (&spec.mode, &spec.safe_set) {
        (Mode::Global, SafeSetSpec::GlobalUnion(ps)) => {
            if ps.is_empty() {
                r.errors.push("global safe set needs at least one polynomial".into());
            }
            for (i, p) in ps.iter().enumerate() {
                if p.nvars() != n && p.nvars() != part.n_bar {
                    r.errors.push(format!(
                        "safe-set polynomial {} has {} variables, expected {n}",
                        i + 1,
                        p.nvars()
                    ));
                } else if p.nvars() == n {
                    if let Some(v) = (part.n_bar..n).find(|&v| p.depends_on(v)) {
                        r.errors.push(format!(
                            "safe-set polynomial {} depends on x{} outside the constrained coordinates",
                            i + 1,
                            v + 1
                        ));
                    }
                }
            }
        }
        (Mode::Local, SafeSetSpec::LocalHalfspaces(hs)) => {
            for (i, h) in hs.iter().enumerate() {
                if h.a.len() != n {
                    r.errors.push(format!("halfspace {} has length {}, expected {n}", i + 1, h.a.len()));
                } else if h.a.iter().chain([&h.offset]).any(|v| !v.is_finite()) {
                    r.errors.push(format!("halfspace {} has non-finite entries", i + 1));
                } else if h.a.norm() == 0.0 {
                    r.errors.push(format!("halfspace {} has a zero normal", i + 1));
                }
            }
        }
        (Mode::Global, _) => r.errors.push("global mode needs a union-form safe set".into()),
        (Mode::Local, _) => r.errors.push("local mode needs a halfspace safe set".into()),
    }

    match (&spec.mode, &spec.initial_set) {
        (Mode::Local, None) => r.errors.push("initial set required in local mode".into()),
        (_, Some(init)) => {
            if init.polys.is_empty() {
                r.errors.push("initial set needs at least one polynomial".into());
            }
            for (i, p) in init.polys.iter().enumerate() {
                if p.nvars() != n {
                    r.errors.push(format!(
                        "initial-set polynomial {} has {} variables, expected {n}",
                        i + 1,
                        p.nvars()
                    ));
                }
            }
        }
        _ => {}
    }

    validate_input_bound(spec, m, &mut r);

    if let Containment::Vertices(vs) = &spec.containment {
        if spec.mode != Mode::Global {
            r.errors.push("vertex containment applies to global mode only".into());
        }
        if vs.is_empty() {
            r.errors.push("vertex list is empty".into());
        }
        if vs.iter().any(|v| v.len() != part.n_bar) {
            r.errors.push(format!("vertices must have length n_bar = {}", part.n_bar));
        }
    }

    if !r.is_valid() {
        return r;
    }

    // Assumptions on boundedness, checked by ray marching.
    match spec.mode {
        Mode::Global => {
            if let Ok(sc) = spec.unsafe_projection() {
                let hint: Vec<f64> = spec
                    .center
                    .as_ref()
                    .map(|c| c.rows(0, part.n_bar).iter().copied().collect())
                    .unwrap_or_else(|| vec![0.0; part.n_bar]);
                match sc.find_member(&[hint]) {
                    Some(x0) => {
                        let f = |x: &[f64]| sc.contains(x);
                        if bounding_box(&f, &x0, BOUNDEDNESS_RADIUS, opts.seed).is_none() {
                            r.errors.push("unsafe set is unbounded on the constrained coordinates".into());
                        }
                    }
                    None => r.warnings.push(
                        "could not locate a point of the unsafe set; boundedness not checked".into(),
                    ),
                }
            }
        }
        Mode::Local => {
            if let Some(init) = spec.initial_basic_set() {
                let hint: Vec<Vec<f64>> = spec
                    .center
                    .iter()
                    .map(|c| c.iter().copied().collect())
                    .collect();
                match init.find_member(&hint) {
                    Some(x0) => {
                        let f = |x: &[f64]| init.contains(x);
                        if bounding_box(&f, &x0, BOUNDEDNESS_RADIUS, opts.seed).is_none() {
                            r.errors.push("initial set is unbounded".into());
                        }
                    }
                    None => r.warnings.push(
                        "could not locate a point of the initial set; boundedness not checked".into(),
                    ),
                }
            }
        }
    }

    if !spec.system.is_stabilizable(1e-9) {
        r.warnings.push("system (A, B) does not appear stabilizable".into());
    }
    r
}

fn validate_input_bound(spec: &ProblemSpec, m: usize, r: &mut ValidationReport) {
    let ib = &spec.input_bound;
    if ib.is_none() {
        return;
    }
    if !(ib.epsilon > 0.0 && ib.epsilon.is_finite()) {
        r.errors.push(format!("input-bound epsilon must be positive, got {}", ib.epsilon));
    }
    match &ib.bound {
        InputBound::None => {}
        InputBound::L2 { zeta } | InputBound::Linf { zeta } => {
            if !(*zeta > 0.0 && zeta.is_finite()) {
                r.errors.push(format!("input bound zeta must be positive, got {zeta}"));
            }
        }
        InputBound::Polytope { h_mat, h } => {
            if h_mat.ncols() != m {
                r.errors.push(format!("H has {} columns, expected m = {m}", h_mat.ncols()));
            }
            if h_mat.nrows() != h.len() || h.is_empty() {
                r.errors.push("H and h must have the same, nonzero, number of rows".into());
            }
            for i in 0..h_mat.nrows() {
                if h_mat.row(i).iter().all(|v| *v == 0.0) {
                    r.errors.push(format!("row {} of H is all zero", i + 1));
                }
            }
        }
    }
    if spec.mode == Mode::Global && !matches!(ib.bound, InputBound::L2 { .. }) {
        r.errors.push("global mode supports only an L2 input bound".into());
    }
}

/// Center `c` and the offset input `d` with `Bd + Ac = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterData {
    pub c: DVector<f64>,
    pub d: DVector<f64>,
    pub residual: f64,
}

/// Least-squares `d = argmin ‖Bd + Ac‖₂` via SVD, after checking
/// `rank [B, Ac] = rank B` at threshold `tol · σ_max`.
pub fn prepare_center(system: &LinearSystem, c: &DVector<f64>, tol: f64) -> Result<CenterData> {
    let n = system.n();
    if c.len() != n {
        return Err(CbfError::DimensionMismatch(format!(
            "center has length {} but n = {n}",
            c.len()
        )));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(CbfError::SpecInvalid(vec!["center has non-finite entries".into()]));
    }
    let ac = system.a() * c;
    let b = system.b();
    let m = system.m();
    let mut aug = DMatrix::zeros(n, m + 1);
    aug.columns_mut(0, m).copy_from(b);
    aug.set_column(m, &ac);
    let sv_aug = aug.clone().singular_values();
    let smax = sv_aug.max();
    let thresh = tol * smax;
    let rank = |sv: &DVector<f64>| sv.iter().filter(|s| **s > thresh).count();
    let sv_b = b.clone().singular_values();
    let svd = b.clone().svd(true, true);
    let d = svd
        .solve(&(-&ac), thresh.max(f64::MIN_POSITIVE))
        .map_err(|e| CbfError::NumericalFailure(e.to_string()))?;
    let residual = (b * &d + &ac).norm();
    if rank(&sv_aug) != rank(&sv_b) || residual > tol * ac.norm().max(1.0) {
        return Err(CbfError::RankConditionViolated { residual });
    }
    Ok(CenterData {
        c: c.clone(),
        d,
        residual,
    })
}

/// Chebyshev center of `∩ {a_iᵀx + o_i >= 0}` restricted to centers with
/// `Ac ∈ range(B)`, so that [`prepare_center`] succeeds.
pub fn chebyshev_center(
    system: &LinearSystem,
    halfspaces: &[Halfspace],
    solver: &SolverOptions,
) -> Result<DVector<f64>> {
    let n = system.n();
    let mut layout = DecisionLayout::new();
    let x = layout.add_dense("x", n, 1);
    let r = layout.add_scalar("r");
    let mut prob = ConicProblem::new(layout);
    prob.objective = -&r.expr();
    let xm = x.matrix();
    for (i, h) in halfspaces.iter().enumerate() {
        let mut e = crate::expr::AffineExpr::constant(h.offset);
        for j in 0..n {
            e.axpy(h.a[j], xm.get(j, 0));
        }
        e.axpy(-h.a.norm(), &r.expr());
        prob.add_inequality(&format!("halfspace_{}", i + 1), e);
    }
    // (I − B B⁺) A x = 0
    let b = system.b();
    let pinv = b
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| CbfError::NumericalFailure(e.to_string()))?;
    let proj = (DMatrix::identity(n, n) - b * pinv) * system.a();
    let px = xm.left_mul(&proj);
    for i in 0..n {
        let e = px.get(i, 0).clone();
        if !e.is_constant() {
            prob.add_equality(&format!("range_{}", i + 1), e);
        }
    }
    prob.add_lmi("radius", AffineMatrix::from_fn(1, 1, |_, _| r.expr()), Sense::Psd);
    let sol = prob.solve(&ClarabelBackend, solver)?;
    match sol.status {
        SolveStatus::Optimal => {
            let radius = sol.values[r.0];
            if radius <= 0.0 {
                return Err(CbfError::SpecInvalid(vec![
                    "safe set has empty interior on the admissible centers".into(),
                ]));
            }
            Ok(DVector::from_iterator(n, (0..n).map(|i| sol.values[x.index(i, 0)])))
        }
        SolveStatus::Unbounded => Err(CbfError::SpecInvalid(vec![
            "safe set contains arbitrarily large balls; no Chebyshev center".into(),
        ])),
        status => Err(CbfError::Infeasible {
            status,
            detail: "Chebyshev center program".into(),
        }),
    }
}

/// The center used for synthesis: user-supplied, else the Chebyshev center
/// (local mode) or the origin (global mode).
pub fn resolve_center(spec: &ProblemSpec) -> Result<DVector<f64>> {
    if let Some(c) = &spec.center {
        return Ok(c.clone());
    }
    match &spec.safe_set {
        SafeSetSpec::LocalHalfspaces(hs) => chebyshev_center(&spec.system, hs, &spec.options.solver),
        SafeSetSpec::GlobalUnion(_) => Ok(DVector::zeros(spec.n())),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    fn car() -> LinearSystem {
        LinearSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap()
    }

    pub(crate) fn example1_spec() -> ProblemSpec {
        ProblemSpec {
            system: car(),
            partition: StatePartition::new(1, 1),
            mode: Mode::Global,
            safe_set: SafeSetSpec::GlobalUnion(vec![Polynomial::parse("x1^2 - 1", 2).unwrap()]),
            initial_set: None,
            input_bound: InputBoundSpec::none(),
            center: Some(DVector::zeros(2)),
            containment: Containment::Sos,
            options: SynthesisOptions::default(),
        }
    }

    #[test]
    fn example1_is_valid() {
        let r = validate_spec(&example1_spec());
        assert!(r.is_valid(), "{:?}", r.errors);
    }

    #[test]
    fn local_without_initial_set_is_invalid() {
        let mut s = example1_spec();
        s.mode = Mode::Local;
        s.partition = StatePartition::full(2);
        s.safe_set = SafeSetSpec::LocalHalfspaces(vec![Halfspace::new(DVector::from_vec(vec![1.0, 0.0]), 1.0)]);
        let r = validate_spec(&s);
        assert!(r.errors.iter().any(|e| e.contains("initial set required")));
    }

    #[test]
    fn partition_violation_is_invalid() {
        let mut s = example1_spec();
        s.safe_set = SafeSetSpec::GlobalUnion(vec![Polynomial::parse("x1^2 + x2 - 1", 2).unwrap()]);
        let r = validate_spec(&s);
        assert!(r.errors.iter().any(|e| e.contains("x2")), "{:?}", r.errors);
    }

    #[test]
    fn unbounded_unsafe_set_is_rejected() {
        let mut s = example1_spec();
        s.partition = StatePartition::full(2);
        s.safe_set = SafeSetSpec::GlobalUnion(vec![Polynomial::parse("x1^2 - 1", 2).unwrap()]);
        let r = validate_spec(&s);
        assert!(r.errors.iter().any(|e| e.contains("unbounded")), "{:?}", r.errors);
    }

    #[test]
    fn center_examples() {
        let sys = car();
        let z = prepare_center(&sys, &DVector::zeros(2), 1e-9).unwrap();
        assert_eq!(z.d, DVector::zeros(1));
        assert_eq!(z.residual, 0.0);
        let c = prepare_center(&sys, &DVector::from_vec(vec![0.7, 0.0]), 1e-9).unwrap();
        assert_eq!(c.d[0], 0.0);
        assert_eq!(c.residual, 0.0);
        let bad = prepare_center(&sys, &DVector::from_vec(vec![0.0, 1.0]), 1e-9);
        assert!(matches!(bad, Err(CbfError::RankConditionViolated { .. })));
    }

    #[test]
    fn offset_recovered_for_nonzero_ac() {
        // ẋ1 = x1 + u: center 2 needs d = −2.
        let sys = LinearSystem::new(DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let c = prepare_center(&sys, &DVector::from_element(1, 2.0), 1e-9).unwrap();
        assert!((c.d[0] + 2.0).abs() < 1e-12);
        let again = prepare_center(&sys, &c.c, 1e-9).unwrap();
        assert_eq!(again.d, c.d);
    }

    #[test]
    fn stabilizability() {
        assert!(car().is_stabilizable(1e-9));
        let unctrl = LinearSystem::new(DMatrix::identity(2, 2), DMatrix::from_row_slice(2, 1, &[1.0, 0.0])).unwrap();
        assert!(!unctrl.is_stabilizable(1e-9));
    }

    #[test]
    fn chebyshev_center_of_box_with_zero_velocity() {
        let sys = car();
        let hs = vec![
            Halfspace::new(DVector::from_vec(vec![1.0, 0.0]), 1.0),
            Halfspace::new(DVector::from_vec(vec![-1.0, 0.0]), 3.0),
            Halfspace::new(DVector::from_vec(vec![0.0, 1.0]), 1.0),
            Halfspace::new(DVector::from_vec(vec![0.0, -1.0]), 1.0),
        ];
        let c = chebyshev_center(&sys, &hs, &SolverOptions::default()).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-6, "{c}");
        assert!(c[1].abs() < 1e-9);
    }
}
