//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. The
//! process fails if any criterion fails, except the ones listed in
//! `EXPECTED_RED`, which are reported but tolerated.

use std::time::Instant;

use cbf_core::io::parse_problem;
use cbf_core::model::{CenterData, Containment, InputBound, ProblemSpec, SafeSetSpec};
use cbf_core::poly::Polynomial;
use cbf_core::sdp::{ClarabelBackend, ConicProblem, DecisionLayout, SolveStatus, SolverOptions};
use cbf_core::sos::{build_basis, GramParameterization, coefficient_error, extract_sos_witness, gram_constraints, sum_of_squares, AffinePoly};
use cbf_core::synthesis::{recover_controller, synthesize, AffineController, CbfFunction, Orientation, SynthesisResult};
use cbf_core::verify::simulate::{expm_endpoint, rk4_endpoint};
use cbf_core::verify::{
    initial_set_oracle, invariance_matrix, simulate_closed_loop, sup_input, Tolerances,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Criteria allowed to fail; see the README for the reason.
const EXPECTED_RED: &[u32] = &[4];

const EXAMPLE1: &str = include_str!("../../cli/examples/example1.prob");
const CASE1: &str = include_str!("../../cli/examples/case1.prob");
const CASE2: &str = include_str!("../../cli/examples/case2.prob");
const OMNI_GLOBAL: &str = include_str!("../../cli/examples/omni_global.prob");
const OMNI_LOCAL: &str = include_str!("../../cli/examples/omni_local.prob");
const PENTAGON: &str = include_str!("../../cli/examples/pentagon.prob");

type Criterion = (u32, &'static str, fn() -> Outcome);
type Scalar = Box<dyn Fn(&DVector<f64>) -> f64>;

struct Outcome {
    clauses: Vec<(String, bool)>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { clauses: Vec::new() }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.clauses.push((what.into(), ok));
    }

    fn passed(&self) -> bool {
        !self.clauses.is_empty() && self.clauses.iter().all(|(_, ok)| *ok)
    }
}

fn sym_eigs(m: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new((m + m.transpose()) * 0.5).eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

fn published(spec: ProblemSpec, p: DMatrix<f64>, k: DMatrix<f64>, tol: &Tolerances) -> SynthesisResult {
    let n = spec.n();
    let m = spec.m();
    let cbf = CbfFunction::from_p(DVector::zeros(n), p, Orientation::SuperLevelSafe).unwrap();
    let ctrl = AffineController {
        k,
        d: DVector::zeros(m),
        c: DVector::zeros(n),
    };
    let center = CenterData {
        c: DVector::zeros(n),
        d: DVector::zeros(m),
        residual: 0.0,
    };
    SynthesisResult::external(spec, center, cbf, ctrl, tol)
}

fn criterion1() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let p = DMatrix::from_row_slice(2, 2, &[0.88391, -0.253835, -0.253835, 0.25205]);
    let k = DMatrix::from_row_slice(1, 2, &[1.4164, 0.59702]);
    let res = published(parse_problem(CASE1).unwrap(), p.clone(), k.clone(), &Tolerances::default());
    let elapsed = start.elapsed().as_secs_f64();

    // independent oracle: explicit 2x2 algebra
    let a = DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, 0.0, -1.0]);
    let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
    let acl = &a + &b * &k;
    let m = acl.transpose() * &p + &p * &acl;
    let min_m = sym_eigs(&m)[0];
    let max_p = sym_eigs(&p)[1];
    let det = p[(0, 0)] * p[(1, 1)] - p[(0, 1)] * p[(1, 0)];
    let pinv = DMatrix::from_row_slice(2, 2, &[p[(1, 1)], -p[(0, 1)], -p[(1, 0)], p[(0, 0)]]) / det;
    let kok = (&k * &pinv * k.transpose())[(0, 0)];
    let sup = sup_input(&res.controller, &res.cbf, &res.spec.input_bound).unwrap()[0].sup;

    o.check(format!("invariance min eig {min_m:+.3e} >= -1e-4"), min_m >= -1e-4);
    o.check(format!("max eig(P) {max_p:.4} <= 1"), max_p <= 1.0);
    o.check(
        format!("sup u^2 = {sup:.4} (K P^-1 K^T = {kok:.4}) in 7.89 +- 0.05 and <= 8"),
        (sup - 7.89).abs() <= 0.05 && sup <= 8.0 && (sup - kok).abs() <= 1e-9 * kok,
    );
    o.check("certificate verified at 1e-6", res.verified());
    o.check(format!("runtime {elapsed:.3} s < 1 s"), elapsed < 1.0);
    o
}

fn criterion2() -> Outcome {
    let mut o = Outcome::new();
    let spec = parse_problem(CASE2).unwrap();
    let p = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -0.0129]));
    let k = DMatrix::from_row_slice(2, 3, &[-2.0, 38.9, 0.0, 76.8, 0.0, -0.5]);
    let strict = published(spec.clone(), p.clone(), k.clone(), &Tolerances::default());
    let loose = published(spec.clone(), p.clone(), k.clone(), &Tolerances::paper());
    let min_m = sym_eigs(&invariance_matrix(&spec.system, &strict.controller, &p))[0];
    o.check(format!("invariance min eig {min_m:+.3e} >= -1e-2"), min_m >= -1e-2);
    o.check("rejected at the default tolerance 1e-6", !strict.verified());
    o.check("accepted at the loose tolerance 1e-2", loose.verified());

    // seeds just inside B: b(x0) = 1e-3
    let s = Polynomial::parse("x1^2 + x2^2 - 1", 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = f64::INFINITY;
    let mut escaped = 0;
    for _ in 0..50 {
        let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let x3: f64 = rng.random_range(-1.0..1.0);
        let rho = (1.0 + 1e-3 + 0.0129 * x3 * x3).sqrt();
        let x0 = DVector::from_vec(vec![rho * th.cos(), rho * th.sin(), x3]);
        let tr = simulate_closed_loop(&spec.system, &loose.controller, &x0, 10.0, 1e-3, None).unwrap();
        if tr.blow_up.is_some() {
            escaped += 1;
        }
        for x in &tr.x {
            worst = worst.min(s.eval(x.as_slice()).unwrap());
        }
    }
    o.check(
        format!("50 seeds over T = 10: min s(x(t)) = {worst:+.3e} > -1e-3 ({escaped} diverged away)"),
        worst > -1e-3,
    );
    o
}

fn criterion3() -> Outcome {
    let mut o = Outcome::new();
    let res = synthesize(&parse_problem(EXAMPLE1).unwrap(), &ClarabelBackend).unwrap();
    let om_bar = res.cbf.omega[(0, 0)];
    let om_under = res.cbf.omega[(1, 1)];
    let y1 = res.y.as_ref().unwrap()[(0, 0)];
    o.check(format!("Omega_bar = {om_bar:.8} in (1, 1.1]"), om_bar > 1.0 && om_bar <= 1.1);
    let gap = (om_under + y1).abs();
    o.check(
        format!("|Omega_under + Y1| = {gap:.2e} <= 1e-6 |Omega_under|"),
        gap <= 1e-6 * om_under.abs(),
    );
    o.check("certificate verified", res.verified());

    let omega = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -4.0]);
    let y = DMatrix::from_row_slice(1, 2, &[4.0, 4.0]);
    let ctrl = recover_controller(&omega, &y, &DVector::zeros(2), &DVector::zeros(1)).unwrap();
    let x0 = DVector::from_vec(vec![2.0, 0.0]);
    let tr = simulate_closed_loop(&res.spec.system, &ctrl, &x0, 1.0, 1e-3, None).unwrap();
    // x(t) = (2/3)(e^{-2t} + 2e^t, -2e^{-2t} + 2e^t)
    let (e1, em2) = (1f64.exp(), (-2f64).exp());
    let want = DVector::from_vec(vec![2.0 / 3.0 * (em2 + 2.0 * e1), 2.0 / 3.0 * (-2.0 * em2 + 2.0 * e1)]);
    let err = (tr.final_state() - &want).norm();
    o.check(format!("x(1) error {err:.2e} <= 1e-6"), err <= 1e-6);
    o
}

fn criterion4() -> Outcome {
    let mut o = Outcome::new();
    let spec = parse_problem(OMNI_GLOBAL).unwrap();
    match synthesize(&spec, &ClarabelBackend) {
        Ok(res) => {
            o.check("synthesis optimal", res.solve.as_ref().map(|s| s.status) == Some(SolveStatus::Optimal));
            o.check("own certificate verified at 1e-6", res.verified());
        }
        Err(e) => o.check(format!("synthesis: {e}"), false),
    }
    let mut p = DMatrix::zeros(4, 4);
    p[(0, 0)] = 2.4104;
    p[(0, 1)] = -0.67042 / 2.0;
    p[(1, 0)] = -0.67042 / 2.0;
    p[(1, 1)] = 1.3229;
    p[(2, 2)] = -859.4863;
    p[(3, 3)] = -859.4863;
    let k = DMatrix::from_row_slice(2, 4, &[369.6, 93.6, -0.5, 0.0, 93.6, 673.4, 0.0, -0.5]);
    let res = published(spec, p, k, &Tolerances::paper());
    let inv = res.report.get("invariance").unwrap();
    o.check(
        format!("published b, K verified at 1e-2 (invariance margin {:+.3e})", inv.margin),
        res.verified(),
    );
    o
}

fn criterion5() -> Outcome {
    let mut o = Outcome::new();
    let spec = parse_problem(OMNI_LOCAL).unwrap();
    let res = match synthesize(&spec, &ClarabelBackend) {
        Ok(r) => r,
        Err(e) => {
            o.check(format!("synthesis: {e}"), false);
            return o;
        }
    };
    o.check("synthesis feasible", true);
    let eps = spec.input_bound.epsilon;
    let zeta = match spec.input_bound.bound {
        InputBound::L2 { zeta } => zeta,
        _ => f64::NAN,
    };
    let sup = sup_input(&res.controller, &res.cbf, &spec.input_bound).unwrap()[0].sup;
    o.check(
        format!("sup |u|^2 = {sup:.6} <= {zeta} - eps + 1e-6"),
        sup <= zeta - eps + 1e-6,
    );
    let init = spec.initial_basic_set().unwrap();
    let out = initial_set_oracle(&res.cbf, &init, 10_000, 5, 0.0).unwrap();
    o.check(
        format!("I inside B^c: {} violations in {} samples", out.violation_count, out.samples),
        out.violation_count == 0 && out.samples == 10_000,
    );
    let SafeSetSpec::LocalHalfspaces(hs) = &spec.safe_set else { unreachable!() };
    let worst = hs
        .iter()
        .map(|h| {
            let a = h.relative_to(&res.cbf.c).unwrap();
            1.0 - a.dot(&(&res.cbf.omega * &a))
        })
        .fold(f64::INFINITY, f64::min);
    o.check(format!("5 halfspaces: min 1 - a^T Omega a = {worst:+.3e} >= -1e-9"), hs.len() == 5 && worst >= -1e-9);
    o
}

fn random_poly(rng: &mut ChaCha8Rng, n: usize, deg: u32) -> Polynomial {
    let mut p = Polynomial::zero(n);
    for m in build_basis(n, deg).monomials() {
        p.add_term(m.clone(), rng.sample::<f64, _>(StandardNormal));
    }
    p
}

fn criterion6() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let opts = SolverOptions::default();
    let (mut feasible, mut worst) = (0, 0.0f64);
    for _ in 0..200 {
        let n = rng.random_range(1..=3usize);
        let half = rng.random_range(1..=2u32);
        let terms = rng.random_range(1..=3usize);
        let squares: Vec<Polynomial> = (0..terms).map(|_| random_poly(&mut rng, n, half)).collect();
        let target = sum_of_squares(&squares, n);
        let basis = build_basis(n, half);
        let mut prob = ConicProblem::new(DecisionLayout::new());
        let (q, _) = gram_constraints(&mut prob, "g", &AffinePoly::from_poly(&target), &basis).unwrap();
        let sol = prob.solve(&ClarabelBackend, &opts).unwrap();
        if sol.status != SolveStatus::Optimal {
            continue;
        }
        feasible += 1;
        let qv = GramParameterization::new(basis.clone())
            .refine(&q.value(&sol.values), &target, 1e-12, 20_000)
            .unwrap();
        let w = extract_sos_witness(&qv, &basis, 1e-9).unwrap();
        worst = worst.max(coefficient_error(&sum_of_squares(&w, n), &target));
    }
    o.check(format!("Gram feasibility {feasible}/200"), feasible == 200);
    o.check(format!("witness round-trip coefficient error {worst:.2e} <= 1e-8"), worst <= 1e-8);

    let odd = Polynomial::parse("x1^3 + x1^2 + 1", 1).unwrap();
    let mut prob = ConicProblem::new(DecisionLayout::new());
    gram_constraints(&mut prob, "g", &AffinePoly::from_poly(&odd), &build_basis(1, 2)).unwrap();
    let st = prob.solve(&ClarabelBackend, &opts).unwrap().status;
    o.check(format!("x1^3 + x1^2 + 1 reported {}", st.as_str()), st == SolveStatus::Infeasible);
    o
}

fn criterion7() -> Outcome {
    let mut o = Outcome::new();
    let vertex_spec = parse_problem(PENTAGON).unwrap();
    let Containment::Vertices(vs) = vertex_spec.containment.clone() else { unreachable!() };
    let mut sos_spec = vertex_spec.clone();
    sos_spec.containment = Containment::Sos;
    for (label, spec) in [("vertex path", vertex_spec), ("SOS path", sos_spec)] {
        match synthesize(&spec, &ClarabelBackend) {
            Ok(res) => {
                let r = res.r.expect("global programs carry R");
                let worst = vs.iter().map(|v| 1.0 - v.dot(&(&r * v))).fold(f64::INFINITY, f64::min);
                o.check(
                    format!("{label}: feasible, min vertex margin {worst:+.3e} >= -1e-6"),
                    worst >= -1e-6,
                );
            }
            Err(e) => o.check(format!("{label}: {e}"), false),
        }
    }
    o
}

/// max over the unit sphere of `f(z)` by sampling, then projected gradient
/// ascent from the best sample.
fn sphere_search(n: usize, count: usize, rng: &mut ChaCha8Rng, f: &dyn Fn(&DVector<f64>) -> f64) -> f64 {
    let unit = |rng: &mut ChaCha8Rng| {
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let nz = z.norm();
        z / nz
    };
    let mut best = unit(rng);
    let mut best_v = f(&best);
    for _ in 1..count {
        let z = unit(rng);
        let v = f(&z);
        if v > best_v {
            best = z;
            best_v = v;
        }
    }
    let mut step = 1e-2;
    for _ in 0..2000 {
        let h = 1e-7;
        let g = DVector::from_iterator(
            n,
            (0..n).map(|i| {
                let mut zp = best.clone();
                zp[i] += h;
                (f(&zp) - best_v) / h
            }),
        );
        let cand = (&best + g * step).normalize();
        let v = f(&cand);
        if v > best_v {
            best = cand;
            best_v = v;
        } else {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
    }
    best_v
}

fn criterion8() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_sup = 0.0f64;
    for inst in 0..100 {
        let n = rng.random_range(2..=4usize);
        let m = rng.random_range(1..=3usize);
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let omega = &g * g.transpose() + DMatrix::identity(n, n) * 0.1;
        let k = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let d = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let c = DVector::zeros(n);
        let cbf = CbfFunction::new(c.clone(), omega.clone(), Orientation::SubLevelSafe).unwrap();
        let ctrl = AffineController { k: k.clone(), d: d.clone(), c };
        let h_mat = DMatrix::from_fn(2, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let bound = match inst % 3 {
            0 => InputBound::L2 { zeta: 1.0 },
            1 => InputBound::Linf { zeta: 1.0 },
            _ => InputBound::Polytope {
                h_mat: h_mat.clone(),
                h: DVector::from_element(2, 1.0),
            },
        };
        let spec = cbf_core::model::InputBoundSpec { bound: bound.clone(), epsilon: 0.0 };
        let sups = sup_input(&ctrl, &cbf, &spec).unwrap();
        // square root of Ω by eigendecomposition, independent of the library's Cholesky route
        let e = SymmetricEigen::new(omega.clone());
        let half = &e.eigenvectors * DMatrix::from_diagonal(&e.eigenvalues.map(f64::sqrt)) * e.eigenvectors.transpose();
        let km = &k * &half;
        for (j, s) in sups.iter().enumerate() {
            let (km, d) = (km.clone(), d.clone());
            let f: Scalar = match &bound {
                InputBound::L2 { .. } => Box::new(move |z: &DVector<f64>| (&km * z + &d).norm_squared()),
                InputBound::Linf { .. } => Box::new(move |z: &DVector<f64>| {
                    let v = (km.row(j) * z)[(0, 0)] + d[j];
                    v * v
                }),
                _ => {
                    let hk = h_mat.row(j) * &km;
                    let hd = (h_mat.row(j) * &d)[(0, 0)];
                    Box::new(move |z: &DVector<f64>| (&hk * z)[(0, 0)] + hd)
                }
            };
            let oracle = sphere_search(n, 100_000, &mut rng, &*f);
            let rel = (s.sup - oracle).abs() / oracle.abs().max(1e-12);
            worst_sup = worst_sup.max(rel);
        }
    }
    o.check(format!("sup_input vs 1e5-sample search: worst relative gap {worst_sup:.2e} <= 1e-3"), worst_sup <= 1e-3);

    let mut worst_sim = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=4usize);
        let f = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let f0 = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x0 = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let exact = expm_endpoint(&f, &f0, &x0, 1.0);
        let rk = rk4_endpoint(&f, &f0, &x0, 1.0, 1e-3);
        worst_sim = worst_sim.max((rk - &exact).norm() / exact.norm());
    }
    o.check(format!("RK4 vs matrix exponential: worst relative error {worst_sim:.2e} <= 1e-8"), worst_sim <= 1e-8);
    o
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "Case 1 published certificate", criterion1),
        (2, "Case 2 published certificate", criterion2),
        (3, "Example 1 end to end", criterion3),
        (4, "omni-directional vehicle, global design", criterion4),
        (5, "omni-directional vehicle, local design with |u|^2 <= 4", criterion5),
        (6, "SOS compiler", criterion6),
        (7, "vertex and SOS containment on the pentagon", criterion7),
        (8, "oracle agreement", criterion8),
    ];
    let mut unexpected = Vec::new();
    for (id, title, run) in criteria {
        let start = Instant::now();
        let out = run();
        let ok = out.passed();
        let tag = match (ok, EXPECTED_RED.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
        };
        println!("criterion {id} {tag}: {title} [{:.2} s]", start.elapsed().as_secs_f64());
        for (what, good) in &out.clauses {
            println!("    {} {what}", if *good { "ok  " } else { "FAIL" });
        }
        if !ok && !EXPECTED_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
