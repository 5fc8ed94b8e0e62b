use cbf_core::io::{parse_problem, write_problem};
use cbf_core::model::{prepare_center, LinearSystem};
use cbf_core::poly::{Monomial, Polynomial};
use cbf_core::sos::{build_basis, coefficient_error, extract_sos_witness, sum_of_squares};
use cbf_core::synthesis::{recover_controller, AffineController, CbfFunction, Orientation};
use cbf_core::verify::simulate::{expm_endpoint, rk4_endpoint};
use cbf_core::verify::sup::{sampled_sup_affine_norm_sq, sup_affine_norm_sq};
use cbf_core::verify::invariance_matrix;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXAMPLE1: &str = include_str!("../../cli/examples/example1.prob");

fn matrix(r: usize, c: usize, scale: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-scale..scale, r * c).prop_map(move |v| DMatrix::from_row_slice(r, c, &v))
}

fn vector(n: usize, scale: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-scale..scale, n).prop_map(DVector::from_vec)
}

fn spd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    matrix(n, n, 1.0).prop_map(move |g| &g * g.transpose() + DMatrix::identity(n, n) * 0.2)
}

fn polynomial(n: usize, deg: u32) -> impl Strategy<Value = Polynomial> {
    let monos: Vec<Monomial> = build_basis(n, deg).monomials().to_vec();
    prop::collection::vec(-3.0..3.0f64, monos.len()).prop_map(move |cs| {
        let mut p = Polynomial::zero(n);
        for (m, c) in monos.iter().zip(cs) {
            p.add_term(m.clone(), c);
        }
        p
    })
}

fn gram_poly(q: &DMatrix<f64>, n: usize, deg: u32) -> Polynomial {
    let z = build_basis(n, deg);
    let mut p = Polynomial::zero(n);
    for (i, zi) in z.monomials().iter().enumerate() {
        for (j, zj) in z.monomials().iter().enumerate() {
            p.add_term(zi.mul(zj), q[(i, j)]);
        }
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sos_witness_round_trip(g in matrix(6, 6, 1.0), rank in 1usize..=6) {
        // basis of 2 variables up to degree 2 has 6 monomials
        let g = g.columns(0, rank).into_owned();
        let q = &g * g.transpose();
        let w = extract_sos_witness(&q, &build_basis(2, 2), 1e-12).unwrap();
        prop_assert!(w.len() <= rank);
        let target = gram_poly(&q, 2, 2);
        prop_assert!(coefficient_error(&sum_of_squares(&w, 2), &target) <= 1e-10 * target.max_abs_coeff().max(1.0));
    }

    #[test]
    fn eval_is_linear(p in polynomial(3, 3), q in polynomial(3, 3), a in -5.0..5.0f64, x in vector(3, 2.0)) {
        let lhs = (&p.scale(a) + &q).eval(x.as_slice()).unwrap();
        let rhs = a * p.eval(x.as_slice()).unwrap() + q.eval(x.as_slice()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn prepare_center_is_idempotent(a in matrix(3, 3, 2.0), b in matrix(3, 2, 2.0), w in vector(2, 2.0)) {
        let sys = LinearSystem::new(a.clone(), b.clone()).unwrap();
        prop_assume!(a.clone().singular_values().min() > 1e-2);
        let c = a.clone().lu().solve(&(&b * &w)).unwrap();
        let first = prepare_center(&sys, &c, 1e-9).unwrap();
        let again = prepare_center(&sys, &first.c, 1e-9).unwrap();
        prop_assert_eq!(&first, &again);
        prop_assert!((&b * &first.d + &a * &c).norm() <= 1e-8 * (1.0 + (&a * &c).norm()));
    }

    #[test]
    fn controller_is_scale_invariant(omega in spd(3), y in matrix(2, 3, 3.0), s in 0.01..100.0f64) {
        let c = DVector::zeros(3);
        let d = DVector::zeros(2);
        let k1 = recover_controller(&omega, &y, &c, &d).unwrap().k;
        let k2 = recover_controller(&(&omega * s), &(&y * s), &c, &d).unwrap().k;
        prop_assert!((&k1 - &k2).norm() <= 1e-8 * k1.norm().max(1.0));
    }

    #[test]
    fn invariance_matrix_matches_barrier_derivative(
        a in matrix(3, 3, 2.0),
        b in matrix(3, 2, 2.0),
        k in matrix(2, 3, 2.0),
        omega in spd(3),
        x in vector(3, 3.0),
    ) {
        let sys = LinearSystem::new(a.clone(), b.clone()).unwrap();
        let ctrl = AffineController { k: k.clone(), d: DVector::zeros(2), c: DVector::zeros(3) };
        let cbf = CbfFunction::new(DVector::zeros(3), omega, Orientation::SubLevelSafe).unwrap();
        let m = invariance_matrix(&sys, &ctrl, &cbf.p);
        let xdot = &a * &x + &b * ctrl.eval(&x);
        let bdot = cbf.gradient(&x).dot(&xdot);
        let quad = x.dot(&(&m * &x));
        prop_assert!((bdot - quad).abs() <= 1e-9 * (1.0 + quad.abs()));
    }

    #[test]
    fn sup_bounds_every_sample(m in matrix(2, 3, 3.0), d in vector(2, 3.0), seed in any::<u64>()) {
        let exact = sup_affine_norm_sq(&m, &d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sampled = sampled_sup_affine_norm_sq(&m, &d, 2000, &mut rng);
        prop_assert!(sampled <= exact * (1.0 + 1e-9) + 1e-12);
        prop_assert!(sampled >= exact * (1.0 - 1e-3));
    }

    #[test]
    fn rk4_converges_at_fourth_order(f in matrix(3, 3, 1.5), f0 in vector(3, 1.0), x0 in vector(3, 2.0)) {
        let exact = expm_endpoint(&f, &f0, &x0, 1.0);
        let scale = exact.norm().max(1e-6);
        let coarse = (rk4_endpoint(&f, &f0, &x0, 1.0, 0.05) - &exact).norm() / scale;
        let fine = (rk4_endpoint(&f, &f0, &x0, 1.0, 0.025) - &exact).norm() / scale;
        let dense = (rk4_endpoint(&f, &f0, &x0, 1.0, 1e-3) - &exact).norm() / scale;
        prop_assert!(dense <= 1e-8);
        // below ~1e-13 the error is rounding, not truncation
        prop_assert!(coarse < 1e-12 || fine * 8.0 <= coarse, "coarse {coarse:e} fine {fine:e}");
    }

    #[test]
    fn problem_text_round_trips(a in matrix(2, 2, 10.0), b in matrix(2, 1, 10.0), eps in 1e-9..1.0f64) {
        let mut spec = parse_problem(EXAMPLE1).unwrap();
        spec.system = LinearSystem::new(a, b).unwrap();
        spec.options.epsilon = eps;
        let text = write_problem(&spec);
        let back = parse_problem(&text).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(write_problem(&back), text);
    }
}
