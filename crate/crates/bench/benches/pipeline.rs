use std::hint::black_box;

use cbf_core::io::parse_problem;
use cbf_core::poly::Polynomial;
use cbf_core::sdp::{ClarabelBackend, ConicProblem, DecisionLayout};
use cbf_core::sos::{build_basis, gram_constraints, AffinePoly};
use cbf_core::synthesis::synthesize;
use cbf_core::verify::sup_affine_norm_sq;
use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::{DMatrix, DVector};

const EXAMPLE1: &str = include_str!("../../cli/examples/example1.prob");
const OMNI_GLOBAL: &str = include_str!("../../cli/examples/omni_global.prob");
const OMNI_LOCAL: &str = include_str!("../../cli/examples/omni_local.prob");

fn synthesis(c: &mut Criterion) {
    let mut g = c.benchmark_group("synthesize");
    g.sample_size(20);
    for (name, text) in [("example1", EXAMPLE1), ("omni_global", OMNI_GLOBAL), ("omni_local", OMNI_LOCAL)] {
        let spec = parse_problem(text).unwrap();
        g.bench_function(name, |b| b.iter(|| synthesize(black_box(&spec), &ClarabelBackend).unwrap()));
    }
    g.finish();
}

fn sos_compile(c: &mut Criterion) {
    let p = Polynomial::parse("x1^4 + x2^4 + x3^4 + x1^2 x2^2 + 2 x1 x3 + 1", 3).unwrap();
    let basis = build_basis(3, 2);
    c.bench_function("gram_constraints n=3 deg=4", |b| {
        b.iter(|| {
            let mut prob = ConicProblem::new(DecisionLayout::new());
            gram_constraints(&mut prob, "g", &AffinePoly::from_poly(black_box(&p)), &basis).unwrap();
            prob
        })
    });
}

fn sup(c: &mut Criterion) {
    let m = DMatrix::from_fn(3, 4, |i, j| ((i * 4 + j) as f64).sin());
    let d = DVector::from_vec(vec![0.3, -0.2, 0.5]);
    c.bench_function("sup_affine_norm_sq 3x4", |b| b.iter(|| sup_affine_norm_sq(black_box(&m), black_box(&d))));
}

criterion_group!(benches, synthesis, sos_compile, sup);
criterion_main!(benches);
