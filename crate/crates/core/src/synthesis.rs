//! End-to-end synthesis: validate, pick the center, build, solve, recover the
//! barrier and controller, then audit the certificate.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{CbfError, Result};
use crate::model::{
    prepare_center, resolve_center, validate_spec, CenterData, Containment, InputBound, Mode, MuMode,
    ProblemSpec,
};
use crate::poly::Polynomial;
use crate::sdp::builder::{build, names, omega_matrix, MuChoice};
use crate::sdp::{ConicProblem, Solution, SolveStatus, SolverBackend};
use crate::sos::build_basis;
use crate::verify::{check_certificate, CertificateReport, Tolerances};

/// Largest condition number of `Ω` accepted when inverting it.
pub const MAX_CONDITION: f64 = 1e12;

/// Which level set of `b` is the certified invariant set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Global design: `B = {b >= 0}` is invariant and avoids the unsafe set.
    SuperLevelSafe,
    /// Local design: `B^c = {b <= 0}` is invariant and inside the safe set.
    SubLevelSafe,
}

impl Orientation {
    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Global => Orientation::SuperLevelSafe,
            Mode::Local => Orientation::SubLevelSafe,
        }
    }
}

/// `b(x) = (x − c)ᵀ Ω⁻¹ (x − c) − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CbfFunction {
    pub c: DVector<f64>,
    pub omega: DMatrix<f64>,
    /// `P = Ω⁻¹`.
    pub p: DMatrix<f64>,
    pub orientation: Orientation,
}

/// 2-norm condition number from the singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn checked_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(CbfError::DimensionMismatch(format!("{what} must be square")));
    }
    let cond = condition_number(m);
    if cond.is_nan() || cond > MAX_CONDITION {
        return Err(CbfError::IllConditioned { cond });
    }
    let n = m.nrows();
    m.clone()
        .lu()
        .solve(&DMatrix::identity(n, n))
        .ok_or(CbfError::IllConditioned { cond })
}

impl CbfFunction {
    pub fn new(c: DVector<f64>, omega: DMatrix<f64>, orientation: Orientation) -> Result<Self> {
        if omega.nrows() != c.len() {
            return Err(CbfError::DimensionMismatch("Ω and c disagree".into()));
        }
        let p = symmetrize(&checked_inverse(&omega, "Ω")?);
        Ok(CbfFunction { c, omega, p, orientation })
    }

    /// From the quadratic-form matrix `P` directly, as in published certificates.
    pub fn from_p(c: DVector<f64>, p: DMatrix<f64>, orientation: Orientation) -> Result<Self> {
        if p.nrows() != c.len() {
            return Err(CbfError::DimensionMismatch("P and c disagree".into()));
        }
        let omega = symmetrize(&checked_inverse(&p, "P")?);
        Ok(CbfFunction { c, omega, p, orientation })
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        let xc = x - &self.c;
        xc.dot(&(&self.p * &xc)) - 1.0
    }

    pub fn eval_slice(&self, x: &[f64]) -> f64 {
        self.eval(&DVector::from_column_slice(x))
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.p * (x - &self.c)) * 2.0
    }

    pub fn to_polynomial(&self) -> Polynomial {
        let c: Vec<f64> = self.c.iter().copied().collect();
        &Polynomial::quadratic_form(&self.p, &c) - &Polynomial::constant(self.n(), 1.0)
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `u(x) = K (x − c) + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineController {
    pub k: DMatrix<f64>,
    pub d: DVector<f64>,
    pub c: DVector<f64>,
}

impl AffineController {
    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.k * (x - &self.c) + &self.d
    }

    /// Closed-loop matrix `A + BK`.
    pub fn closed_loop(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        a + b * &self.k
    }
}

/// `K = YΩ⁻¹` by a linear solve with `Ω`.
pub fn recover_controller(
    omega: &DMatrix<f64>,
    y: &DMatrix<f64>,
    c: &DVector<f64>,
    d: &DVector<f64>,
) -> Result<AffineController> {
    let n = omega.nrows();
    if !omega.is_square() || y.ncols() != n || c.len() != n || d.len() != y.nrows() {
        return Err(CbfError::DimensionMismatch(format!(
            "Ω is {}x{}, Y is {}x{}, c has {}, d has {}",
            omega.nrows(),
            omega.ncols(),
            y.nrows(),
            y.ncols(),
            c.len(),
            d.len()
        )));
    }
    let cond = condition_number(omega);
    if cond.is_nan() || cond > MAX_CONDITION {
        return Err(CbfError::IllConditioned { cond });
    }
    // KΩ = Y  ⇔  Ωᵀ Kᵀ = Yᵀ
    let kt = omega
        .transpose()
        .lu()
        .solve(&y.transpose())
        .ok_or(CbfError::IllConditioned { cond })?;
    Ok(AffineController {
        k: kt.transpose(),
        d: d.clone(),
        c: c.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainmentKind {
    Sos,
    Vertices,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    None,
    L2,
    Linf,
    Polytope,
    GlobalL2,
}

/// Which program variant produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProgramTag {
    pub mode: Mode,
    pub containment: ContainmentKind,
    pub input: InputKind,
    /// `None` when no μ-carrying input block was emitted.
    pub mu_mode: Option<MuMode>,
}

impl ProgramTag {
    pub fn for_spec(spec: &ProblemSpec) -> Self {
        let input = match (&spec.input_bound.bound, spec.mode) {
            (InputBound::None, _) => InputKind::None,
            (InputBound::L2 { .. }, Mode::Global) => InputKind::GlobalL2,
            (InputBound::L2 { .. }, Mode::Local) => InputKind::L2,
            (InputBound::Linf { .. }, _) => InputKind::Linf,
            (InputBound::Polytope { .. }, _) => InputKind::Polytope,
        };
        let containment = match (&spec.containment, spec.mode) {
            (Containment::Vertices(_), Mode::Global) => ContainmentKind::Vertices,
            _ => ContainmentKind::Sos,
        };
        let mu_mode = match input {
            InputKind::L2 | InputKind::Linf | InputKind::Polytope => Some(spec.options.mu_mode),
            InputKind::None | InputKind::GlobalL2 => None,
        };
        ProgramTag {
            mode: spec.mode,
            containment,
            input,
            mu_mode,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let err = || CbfError::Parse(format!("bad program tag `{text}`"));
        let parts: Vec<&str> = text.split('/').collect();
        let [mode, containment, input, mu] = parts.as_slice() else {
            return Err(err());
        };
        Ok(ProgramTag {
            mode: match *mode {
                "global" => Mode::Global,
                "local" => Mode::Local,
                _ => return Err(err()),
            },
            containment: match *containment {
                "sos" => ContainmentKind::Sos,
                "vertices" => ContainmentKind::Vertices,
                _ => return Err(err()),
            },
            input: match *input {
                "none" => InputKind::None,
                "l2" => InputKind::L2,
                "linf" => InputKind::Linf,
                "polytope" => InputKind::Polytope,
                "global_l2" => InputKind::GlobalL2,
                _ => return Err(err()),
            },
            mu_mode: match *mu {
                "-" => None,
                "fixed" => Some(MuMode::Fixed),
                "free" => Some(MuMode::Free),
                _ => return Err(err()),
            },
        })
    }
}

impl fmt::Display for ProgramTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match self.mode {
            Mode::Global => "global",
            Mode::Local => "local",
        };
        let containment = match self.containment {
            ContainmentKind::Sos => "sos",
            ContainmentKind::Vertices => "vertices",
        };
        let input = match self.input {
            InputKind::None => "none",
            InputKind::L2 => "l2",
            InputKind::Linf => "linf",
            InputKind::Polytope => "polytope",
            InputKind::GlobalL2 => "global_l2",
        };
        let mu = match self.mu_mode {
            None => "-",
            Some(MuMode::Fixed) => "fixed",
            Some(MuMode::Free) => "free",
        };
        write!(f, "{mode}/{containment}/{input}/{mu}")
    }
}

/// Numeric S-procedure certificate: Gram matrices of the multipliers and of
/// the master polynomial, over full graded-lex bases.
#[derive(Debug, Clone, PartialEq)]
pub struct SosCertificate {
    pub nvars: usize,
    pub multiplier_degree: u32,
    pub multipliers: Vec<DMatrix<f64>>,
    pub master: DMatrix<f64>,
    /// Constant subtracted from the master polynomial.
    pub margin: f64,
}

impl SosCertificate {
    /// Half-degree of the master Gram basis, recovered from its size.
    pub fn master_half_degree(&self) -> Option<u32> {
        (0..=32u32).find(|&d| build_basis(self.nvars, d).len() == self.master.nrows())
    }
}

/// Solver diagnostics kept with a result.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveSummary {
    pub status: SolveStatus,
    pub objective: f64,
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub solve_time: f64,
    pub min_lmi_margin: f64,
}

impl From<&Solution> for SolveSummary {
    fn from(s: &Solution) -> Self {
        SolveSummary {
            status: s.status,
            objective: s.objective,
            iterations: s.iterations,
            primal_residual: s.primal_residual,
            dual_residual: s.dual_residual,
            solve_time: s.solve_time,
            min_lmi_margin: s.min_lmi_margin(),
        }
    }
}

/// A barrier/controller pair with everything needed to re-audit it.
/// Externally supplied certificates leave the solver-side fields empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub spec: ProblemSpec,
    pub center: CenterData,
    pub cbf: CbfFunction,
    pub controller: AffineController,
    pub tag: ProgramTag,
    pub r: Option<DMatrix<f64>>,
    pub y: Option<DMatrix<f64>>,
    pub sos: Option<SosCertificate>,
    /// Values of μ per input block, in emission order.
    pub mus: Vec<f64>,
    pub solve: Option<SolveSummary>,
    pub report: CertificateReport,
}

impl SynthesisResult {
    /// Wraps a certificate that did not come from our solver and audits it.
    pub fn external(
        spec: ProblemSpec,
        center: CenterData,
        cbf: CbfFunction,
        controller: AffineController,
        tol: &Tolerances,
    ) -> Self {
        let tag = ProgramTag::for_spec(&spec);
        let mut res = SynthesisResult {
            spec,
            center,
            cbf,
            controller,
            tag,
            r: None,
            y: None,
            sos: None,
            mus: Vec::new(),
            solve: None,
            report: CertificateReport::default(),
        };
        res.report = check_certificate(&res, tol);
        res
    }

    pub fn verified(&self) -> bool {
        self.report.passed()
    }
}

fn gram_value(problem: &ConicProblem, name: &str, values: &[f64]) -> Option<DMatrix<f64>> {
    problem.layout.symmetric(name).map(|v| v.value(values))
}

fn extract_sos(problem: &ConicProblem, spec: &ProblemSpec, values: &[f64]) -> Option<SosCertificate> {
    let prefix = names::CONTAIN;
    let master = gram_value(problem, &format!("{prefix}.gram"), values)?;
    let multipliers = (1..)
        .map_while(|i| gram_value(problem, &format!("{prefix}.sigma{i}"), values))
        .collect();
    let (nvars, margin) = match spec.mode {
        Mode::Global => (spec.partition.n_bar, spec.options.epsilon),
        Mode::Local => (spec.n(), 0.0),
    };
    Some(SosCertificate {
        nvars,
        multiplier_degree: spec.options.multiplier_degree,
        multipliers,
        master,
        margin,
    })
}

/// Runs the whole pipeline on `backend`. The certificate is audited with
/// default tolerances; check [`SynthesisResult::verified`].
pub fn synthesize(spec: &ProblemSpec, backend: &dyn SolverBackend) -> Result<SynthesisResult> {
    synthesize_with(spec, backend, &Tolerances::default())
}

pub fn synthesize_with(spec: &ProblemSpec, backend: &dyn SolverBackend, tol: &Tolerances) -> Result<SynthesisResult> {
    validate_spec(spec).into_result()?;
    let c = resolve_center(spec)?;
    let center = prepare_center(&spec.system, &c, spec.options.rank_tol)?;
    let (problem, mus) = build(spec, &center)?;
    let sol = problem.solve(backend, &spec.options.solver)?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible | SolveStatus::Unbounded => {
            return Err(CbfError::Infeasible {
                status: sol.status,
                detail: sol.detail.clone(),
            })
        }
        SolveStatus::NumericalFailure => return Err(CbfError::NumericalFailure(sol.detail.clone())),
    }
    let v = &sol.values;
    let omega = omega_matrix(&problem).eval(v);
    let y = problem
        .layout
        .dense(names::Y)
        .expect("builder always declares Y")
        .value(v);
    let r = gram_value(&problem, names::R, v);
    let cbf = CbfFunction::new(center.c.clone(), symmetrize(&omega), Orientation::for_mode(spec.mode))?;
    let controller = recover_controller(&cbf.omega, &y, &center.c, &center.d)?;
    let sos = match spec.containment {
        Containment::Vertices(_) if spec.mode == Mode::Global => None,
        _ => extract_sos(&problem, spec, v),
    };
    let mus = mus
        .iter()
        .map(|m| match m {
            MuChoice::Fixed(x) => *x,
            MuChoice::Free(k) => v[*k],
        })
        .collect();
    let mut res = SynthesisResult {
        spec: spec.clone(),
        center,
        cbf,
        controller,
        tag: ProgramTag::for_spec(spec),
        r,
        y: Some(y),
        sos,
        mus,
        solve: Some(SolveSummary::from(&sol)),
        report: CertificateReport::default(),
    };
    res.report = check_certificate(&res, tol);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_gain_from_forced_values() {
        // Ω = diag(Ω̄, Ω̲) = diag(2, −4), Y = [4, 4]
        let omega = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -4.0]);
        let y = DMatrix::from_row_slice(1, 2, &[4.0, 4.0]);
        let k = recover_controller(&omega, &y, &DVector::zeros(2), &DVector::zeros(1)).unwrap();
        assert!((k.k[(0, 0)] - 2.0).abs() < 1e-14 && (k.k[(0, 1)] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_y_gives_constant_input() {
        let omega = DMatrix::identity(3, 3);
        let d = DVector::from_vec(vec![0.5, -1.0]);
        let k = recover_controller(&omega, &DMatrix::zeros(2, 3), &DVector::zeros(3), &d).unwrap();
        assert_eq!(k.k, DMatrix::zeros(2, 3));
        assert_eq!(k.eval(&DVector::from_vec(vec![1.0, 2.0, 3.0])), d);
    }

    #[test]
    fn ill_conditioned_omega_is_refused() {
        let omega = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-13]));
        let r = recover_controller(&omega, &DMatrix::zeros(1, 2), &DVector::zeros(2), &DVector::zeros(1));
        assert!(matches!(r, Err(CbfError::IllConditioned { .. })));
    }

    #[test]
    fn cbf_from_p_round_trips() {
        let p = DMatrix::from_row_slice(2, 2, &[0.88391, -0.253835, -0.253835, 0.25205]);
        let b = CbfFunction::from_p(DVector::zeros(2), p.clone(), Orientation::SuperLevelSafe).unwrap();
        assert!(((&b.p * &b.omega) - DMatrix::identity(2, 2)).norm() < 1e-8);
        assert_eq!(b.eval(&DVector::zeros(2)), -1.0);
        let x = DVector::from_vec(vec![0.3, -1.2]);
        assert!((b.to_polynomial().eval(x.as_slice()).unwrap() - b.eval(&x)).abs() < 1e-12);
    }

    #[test]
    fn tag_round_trip() {
        let t = ProgramTag {
            mode: Mode::Local,
            containment: ContainmentKind::Sos,
            input: InputKind::Polytope,
            mu_mode: Some(MuMode::Free),
        };
        assert_eq!(t.to_string(), "local/sos/polytope/free");
        assert_eq!(ProgramTag::parse(&t.to_string()).unwrap(), t);
        assert!(ProgramTag::parse("local/sos").is_err());
    }

    #[test]
    fn example1_end_to_end() {
        let spec = crate::model::tests::example1_spec();
        let res = synthesize(&spec, &crate::sdp::ClarabelBackend).unwrap();
        println!("{}", res.report);
        assert!(res.verified());
        assert!(res.sos.is_some());
        assert!(res.report.get("containment.sos_witness").unwrap().passed);
    }
}
