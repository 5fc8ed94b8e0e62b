//! The certificate audit run after every synthesis and by `cbf verify`.

use nalgebra::DMatrix;

use crate::model::{restrict_global, Containment, LinearSystem, Mode, SafeSetSpec};
use crate::poly::Polynomial;
use crate::sdp::lmi::{max_eigenvalue, min_eigenvalue};
use crate::sos::{build_basis, coefficient_error, extract_sos_witness, sum_of_squares, MonomialBasis};
use crate::synthesis::{AffineController, Orientation, SynthesisResult};
use crate::verify::containment::{ellipsoid_boundary_oracle, initial_set_oracle, projected_form, unsafe_set_oracle};
use crate::verify::sup::sup_input;
use crate::verify::{CertificateReport, Check, Tolerances};

/// `(A + BK)ᵀP + P(A + BK)`: `ḃ(x) = (x − c)ᵀ M (x − c)` along the closed loop.
pub fn invariance_matrix(system: &LinearSystem, ctrl: &AffineController, p: &DMatrix<f64>) -> DMatrix<f64> {
    let acl = ctrl.closed_loop(system.a(), system.b());
    let m = acl.transpose() * p + p * acl;
    (&m + m.transpose()) * 0.5
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    max_eigenvalue(m).abs().max(min_eigenvalue(m).abs())
}

struct Checks(Vec<Check>);

impl Checks {
    fn add(&mut self, name: &str, condition: &str, margin: f64, passed: bool, detail: String) {
        self.0.push(Check {
            name: name.to_string(),
            condition: condition.to_string(),
            passed,
            margin,
            mandatory: true,
            detail,
        });
    }

    fn info(&mut self, name: &str, condition: &str, margin: f64) {
        self.0.push(Check {
            name: name.to_string(),
            condition: condition.to_string(),
            passed: true,
            margin,
            mandatory: false,
            detail: String::new(),
        });
    }

    /// `margin >= −slack`, with NaN failing.
    fn slack(&mut self, name: &str, condition: &str, margin: f64, slack: f64) {
        self.add(name, condition, margin, margin >= -slack, String::new());
    }
}

pub fn check_certificate(res: &SynthesisResult, tol: &Tolerances) -> CertificateReport {
    let t = tol.active();
    let spec = &res.spec;
    let cbf = &res.cbf;
    let ctrl = &res.controller;
    let omega = &cbf.omega;
    let n = cbf.n();
    let nb = match spec.mode {
        Mode::Global => spec.partition.n_bar.min(n),
        Mode::Local => n,
    };
    let mut ck = Checks(Vec::new());

    // structure of Ω
    match spec.mode {
        Mode::Global => {
            let ob = omega.view((0, 0), (nb, nb)).into_owned();
            let m = min_eigenvalue(&ob);
            ck.add("structure.omega_bar_pd", "Ω̄ ≻ 0", m, m > 0.0, String::new());
            if nb < n {
                let nu = n - nb;
                let ou = omega.view((nb, nb), (nu, nu)).into_owned();
                let m = min_eigenvalue(&(-ou));
                ck.add("structure.omega_under_nd", "Ω̲ ≺ 0", m, m > 0.0, String::new());
                let off = omega.view((0, nb), (nb, nu)).amax();
                ck.slack(
                    "structure.block_diagonal",
                    "Ω off-diagonal blocks vanish",
                    -off,
                    t * spectral_norm(omega),
                );
            }
        }
        Mode::Local => {
            let m = min_eigenvalue(omega);
            ck.add("structure.omega_pd", "Ω ≻ 0", m, m > 0.0, String::new());
        }
    }
    let inv_err = (&cbf.p * omega - DMatrix::identity(n, n)).amax();
    ck.slack("structure.inverse", "PΩ = I", -inv_err, 1e-8);

    let ac = spec.system.a() * &ctrl.c;
    let offset = (spec.system.b() * &ctrl.d + &ac).norm();
    ck.slack(
        "structure.center_offset",
        "Bd + Ac = 0",
        -offset,
        spec.options.rank_tol * ac.norm().max(1.0),
    );

    // invariance: ḃ >= 0 on all of ℝⁿ (global) or ḃ <= 0 (local)
    let mm = invariance_matrix(&spec.system, ctrl, &cbf.p);
    let scale = spectral_norm(&mm);
    match cbf.orientation {
        Orientation::SuperLevelSafe => {
            ck.slack("invariance", "(A+BK)ᵀP + P(A+BK) ⪰ 0", min_eigenvalue(&mm), t * scale);
        }
        Orientation::SubLevelSafe => {
            ck.slack("invariance", "(A+BK)ᵀP + P(A+BK) ⪯ 0", -max_eigenvalue(&mm), t * scale);
        }
    }

    if let Some(r) = &res.r {
        if r.nrows() == nb {
            let ob = omega.view((0, 0), (nb, nb)).into_owned();
            let mut blk = DMatrix::zeros(2 * nb, 2 * nb);
            blk.view_mut((0, 0), (nb, nb)).copy_from(r);
            blk.view_mut((0, nb), (nb, nb)).fill_with_identity();
            blk.view_mut((nb, 0), (nb, nb)).fill_with_identity();
            blk.view_mut((nb, nb), (nb, nb)).copy_from(&ob);
            ck.slack("schur", "[[R, I], [I, Ω̄]] ⪰ 0", min_eigenvalue(&blk), t * spectral_norm(&blk));
        } else {
            ck.add("schur", "[[R, I], [I, Ω̄]] ⪰ 0", f64::NEG_INFINITY, false, "R has the wrong size".into());
        }
    }

    match spec.mode {
        Mode::Global => global_containment(res, tol, nb, &mut ck),
        Mode::Local => local_containment(res, tol, &mut ck),
    }
    if let Some(sos) = &res.sos {
        sos_witness(res, sos, t, &mut ck);
    }

    if !spec.input_bound.is_none() {
        match sup_input(ctrl, cbf, &spec.input_bound) {
            Ok(sups) => {
                for s in sups {
                    let cond = if s.name.starts_with("poly") {
                        "sup H_i u <= h_i − ε/2 on the ellipsoid"
                    } else {
                        "sup of the input norm <= ζ − ε on the ellipsoid"
                    };
                    ck.0.push(Check {
                        name: format!("input.{}", s.name),
                        condition: cond.to_string(),
                        passed: s.slack() >= -t * s.limit.abs().max(1.0),
                        margin: s.slack(),
                        mandatory: true,
                        detail: format!("sup {:.6e}, limit {:.6e}", s.sup, s.limit),
                    });
                }
            }
            Err(e) => ck.add("input", "input suprema computable", f64::NEG_INFINITY, false, e.to_string()),
        }
    }

    if let Some(sv) = &res.solve {
        ck.info("solver.lmi_margin", "smallest LMI eigenvalue at the solver point", sv.min_lmi_margin);
    }

    let mut checks = ck.0;
    for c in &mut checks {
        // adding +0.0 maps -0.0 to +0.0 so exact margins print unsigned
        c.margin += 0.0;
    }
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    CertificateReport {
        checks,
        tolerance: t,
        seed: tol.seed,
    }
}

fn global_containment(res: &SynthesisResult, tol: &Tolerances, nb: usize, ck: &mut Checks) {
    let t = tol.active();
    let spec = &res.spec;
    let cbf = &res.cbf;
    let name = "containment.unsafe_sampled";
    let cond = "b < 0 on sampled points of the unsafe set";
    match spec
        .unsafe_projection()
        .and_then(|set| unsafe_set_oracle(cbf, &set, nb, tol.sample_count, tol.seed_for(name), t))
    {
        Ok(o) => ck.add(
            name,
            cond,
            o.worst_margin,
            o.passed(),
            format!("{} samples, {} violations", o.samples, o.violation_count),
        ),
        Err(e) => ck.add(name, cond, f64::NEG_INFINITY, false, e.to_string()),
    }

    if let Containment::Vertices(vs) = &spec.containment {
        let c_bar = cbf.c.rows(0, nb).into_owned();
        let quad_margin = |q: &DMatrix<f64>| {
            vs.iter()
                .map(|v| {
                    let w = v - &c_bar;
                    1.0 - w.dot(&(q * &w))
                })
                .fold(f64::INFINITY, f64::min)
        };
        match projected_form(&cbf.p, nb) {
            Some(pbar) => ck.slack(
                "containment.vertices",
                "b <= 0 at every vertex of the unsafe polytope",
                quad_margin(&pbar),
                t,
            ),
            None => ck.add(
                "containment.vertices",
                "b <= 0 at every vertex of the unsafe polytope",
                f64::NEG_INFINITY,
                false,
                "P is not negative definite on the x̲ block".into(),
            ),
        }
        if let Some(r) = &res.r {
            ck.slack(
                "containment.vertices_r",
                "1 − (v − c̄)ᵀR(v − c̄) >= 0 at every vertex",
                quad_margin(r),
                t,
            );
        }
    }
}

fn local_containment(res: &SynthesisResult, tol: &Tolerances, ck: &mut Checks) {
    let t = tol.active();
    let spec = &res.spec;
    let cbf = &res.cbf;
    let SafeSetSpec::LocalHalfspaces(hs) = &spec.safe_set else {
        ck.add("containment", "halfspace safe set", f64::NEG_INFINITY, false, "local certificate without halfspaces".into());
        return;
    };
    for (i, h) in hs.iter().enumerate() {
        let name = format!("containment.halfspace{}", i + 1);
        let cond = "1 − âᵀΩâ >= 0";
        match h.relative_to(&cbf.c) {
            Ok(a) => ck.slack(&name, cond, 1.0 - a.dot(&(&cbf.omega * &a)), t),
            Err(e) => ck.add(&name, cond, f64::NEG_INFINITY, false, e.to_string()),
        }
    }

    let name = "containment.boundary_sampled";
    let cond = "sampled ellipsoid boundary inside the safe set";
    match ellipsoid_boundary_oracle(cbf, hs, tol.sample_count, tol.seed_for(name), t) {
        Ok(o) => ck.add(name, cond, o.worst_margin, o.passed(), format!("{} samples", o.samples)),
        Err(e) => ck.add(name, cond, f64::NEG_INFINITY, false, e.to_string()),
    }

    let name = "containment.initial_sampled";
    let cond = "b <= 0 on sampled points of the initial set";
    match spec.initial_basic_set() {
        Some(init) => match initial_set_oracle(cbf, &init, tol.sample_count, tol.seed_for(name), t) {
            Ok(o) => ck.add(
                name,
                cond,
                o.worst_margin,
                o.passed(),
                format!("{} samples, {} violations", o.samples, o.violation_count),
            ),
            Err(e) => ck.add(name, cond, f64::NEG_INFINITY, false, e.to_string()),
        },
        None => ck.add(name, cond, f64::NEG_INFINITY, false, "no initial set".into()),
    }
}

/// `zᵀGz` for a numeric Gram matrix.
fn gram_polynomial(g: &DMatrix<f64>, basis: &MonomialBasis) -> Polynomial {
    let mono = basis.monomials();
    let mut p = Polynomial::zero(basis.nvars());
    for i in 0..mono.len() {
        for j in 0..mono.len() {
            p.add_term(mono[i].mul(&mono[j]), g[(i, j)]);
        }
    }
    p
}

/// Rebuilds the S-procedure master polynomial from `R` and the multiplier
/// Grams, then re-factors the master Gram and compares coefficients.
fn sos_witness(res: &SynthesisResult, sos: &crate::synthesis::SosCertificate, t: f64, ck: &mut Checks) {
    let name = "containment.sos_witness";
    let cond = "S-procedure polynomial equals a sum of squares";
    let fail = |ck: &mut Checks, why: String| ck.add(name, cond, f64::NEG_INFINITY, false, why);
    let Some(r) = &res.r else {
        return fail(ck, "no R matrix stored".into());
    };
    let spec = &res.spec;
    let nv = sos.nvars;
    let c: Vec<f64> = res.cbf.c.iter().take(nv).copied().collect();
    if r.nrows() != nv || c.len() != nv {
        return fail(ck, "R and the certificate variables disagree".into());
    }
    let region: Vec<Polynomial> = match (&spec.mode, &spec.safe_set, &spec.initial_set) {
        (Mode::Global, SafeSetSpec::GlobalUnion(ps), _) => {
            match ps.iter().map(|s| restrict_global(s, nv).map(|q| -&q)).collect() {
                Ok(v) => v,
                Err(e) => return fail(ck, e.to_string()),
            }
        }
        (Mode::Local, _, Some(init)) => init.polys.clone(),
        _ => return fail(ck, "certificate does not match the spec".into()),
    };
    if region.len() != sos.multipliers.len() {
        return fail(ck, format!("{} multipliers for {} constraints", sos.multipliers.len(), region.len()));
    }
    let target = &Polynomial::constant(nv, 1.0) - &Polynomial::quadratic_form(r, &c);
    let mbasis = build_basis(nv, sos.multiplier_degree / 2);
    let mut expected = &target - &Polynomial::constant(nv, sos.margin);
    let mut worst_eig = f64::INFINITY;
    for (g, q) in sos.multipliers.iter().zip(&region) {
        if g.nrows() != mbasis.len() {
            return fail(ck, "multiplier Gram has the wrong size".into());
        }
        worst_eig = worst_eig.min(min_eigenvalue(g) / spectral_norm(g).max(1.0));
        expected = &expected - &(&gram_polynomial(g, &mbasis) * q);
    }
    let Some(half) = sos.master_half_degree() else {
        return fail(ck, "master Gram size matches no basis".into());
    };
    let basis = build_basis(nv, half);
    let qn = spectral_norm(&sos.master).max(1.0);
    worst_eig = worst_eig.min(min_eigenvalue(&sos.master) / qn);
    let witness = match extract_sos_witness(&sos.master, &basis, t * qn) {
        Ok(w) => w,
        Err(e) => return fail(ck, e.to_string()),
    };
    let scale = expected.max_abs_coeff().max(1.0);
    let err = coefficient_error(&expected, &sum_of_squares(&witness, nv)) / scale;
    let margin = worst_eig.min(-err);
    let passed = worst_eig >= -t && err <= t;
    ck.add(
        name,
        cond,
        margin,
        passed,
        format!("relative coefficient error {err:.3e}, {} squares", witness.len()),
    );
}
