//! Fixed-step RK4 simulation of the closed loop, cross-checked against the
//! matrix exponential.

use nalgebra::{DMatrix, DVector};

use crate::error::{CbfError, Result};
use crate::model::LinearSystem;
use crate::synthesis::{AffineController, CbfFunction, Orientation};

/// A state is considered diverged once `‖x‖` exceeds this multiple of
/// `max(1, ‖x0‖)`.
pub const BLOW_UP_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    /// `b(x(t))`, empty when no barrier was supplied.
    pub b: Vec<f64>,
    /// Time at which the state left the divergence bound, if it did.
    pub blow_up: Option<f64>,
    /// `min_t b` for global barriers, `max_t b` for local ones.
    pub barrier_extremum: Option<f64>,
    /// First time the state left the certified set, if it started inside.
    pub first_violation: Option<f64>,
    /// `‖x_rk4(T) − x_exp(T)‖ / ‖x_exp(T)‖`; `None` after a blow-up.
    pub expm_rel_error: Option<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.x.last().expect("trajectory has at least one sample")
    }
}

/// `ẋ = F x + f0` with `F = A + BK`, `f0 = B(d − Kc)`.
pub fn closed_loop_affine(system: &LinearSystem, ctrl: &AffineController) -> (DMatrix<f64>, DVector<f64>) {
    let f = ctrl.closed_loop(system.a(), system.b());
    let f0 = system.b() * (&ctrl.d - &ctrl.k * &ctrl.c);
    (f, f0)
}

/// One classical RK4 step for `ẋ = F x + f0`.
pub fn rk4_step(f: &DMatrix<f64>, f0: &DVector<f64>, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let rhs = |y: &DVector<f64>| f * y + f0;
    let k1 = rhs(x);
    let k2 = rhs(&(x + &k1 * (h / 2.0)));
    let k3 = rhs(&(x + &k2 * (h / 2.0)));
    let k4 = rhs(&(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Number of steps and step length covering `[0, t_final]` exactly.
pub fn step_grid(t_final: f64, dt: f64) -> (usize, f64) {
    if t_final == 0.0 {
        return (0, 0.0);
    }
    let steps = (t_final / dt).ceil().max(1.0) as usize;
    (steps, t_final / steps as f64)
}

/// RK4 endpoint at `t_final`.
pub fn rk4_endpoint(f: &DMatrix<f64>, f0: &DVector<f64>, x0: &DVector<f64>, t_final: f64, dt: f64) -> DVector<f64> {
    let (steps, h) = step_grid(t_final, dt);
    let mut x = x0.clone();
    for _ in 0..steps {
        x = rk4_step(f, f0, &x, h);
    }
    x
}

/// Exact solution `x(t)` via the exponential of the augmented matrix
/// `[[F, f0], [0, 0]]`.
pub fn expm_endpoint(f: &DMatrix<f64>, f0: &DVector<f64>, x0: &DVector<f64>, t: f64) -> DVector<f64> {
    let n = f.nrows();
    let mut aug = DMatrix::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&(f * t));
    aug.view_mut((0, n), (n, 1)).copy_from(&(f0 * t));
    let e = aug.exp();
    let mut z = DVector::zeros(n + 1);
    z.rows_mut(0, n).copy_from(x0);
    z[n] = 1.0;
    (e * z).rows(0, n).into_owned()
}

pub fn simulate_closed_loop(
    system: &LinearSystem,
    ctrl: &AffineController,
    x0: &DVector<f64>,
    t_final: f64,
    dt: f64,
    cbf: Option<&CbfFunction>,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(CbfError::SpecInvalid(vec![format!(
            "simulation needs dt > 0 and T >= 0 (got dt = {dt}, T = {t_final})"
        )]));
    }
    if x0.len() != system.n() || ctrl.k.nrows() != system.m() || ctrl.k.ncols() != system.n() {
        return Err(CbfError::DimensionMismatch(
            "initial state, controller and system disagree".into(),
        ));
    }
    let (f, f0) = closed_loop_affine(system, ctrl);
    let (steps, h) = step_grid(t_final, dt);
    let limit = BLOW_UP_FACTOR * x0.norm().max(1.0);

    let mut traj = Trajectory {
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        b: Vec::new(),
        blow_up: None,
        barrier_extremum: None,
        first_violation: None,
        expm_rel_error: None,
    };
    let mut x = x0.clone();
    for k in 0..=steps {
        let t = k as f64 * h;
        let diverged = x.iter().any(|v| !v.is_finite()) || x.norm() > limit;
        if diverged {
            traj.blow_up = Some(t);
            break;
        }
        traj.t.push(t);
        traj.u.push(ctrl.eval(&x));
        traj.x.push(x.clone());
        if k < steps {
            x = rk4_step(&f, &f0, &x, h);
        }
    }

    if let Some(b) = cbf {
        traj.b = traj.x.iter().map(|x| b.eval(x)).collect();
        let (inside, ext): (fn(f64) -> bool, f64) = match b.orientation {
            Orientation::SuperLevelSafe => (|v| v >= 0.0, traj.b.iter().copied().fold(f64::INFINITY, f64::min)),
            Orientation::SubLevelSafe => (|v| v <= 0.0, traj.b.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        };
        traj.barrier_extremum = Some(ext);
        if inside(traj.b[0]) {
            traj.first_violation = traj
                .b
                .iter()
                .position(|v| !inside(*v))
                .map(|i| traj.t[i]);
        }
    }

    if traj.blow_up.is_none() {
        let exact = expm_endpoint(&f, &f0, x0, t_final);
        let diff = (traj.final_state() - &exact).norm();
        let scale = exact.norm();
        traj.expm_rel_error = Some(if scale > 0.0 { diff / scale } else { diff });
    }
    Ok(traj)
}

/// CSV with columns `t, x1..xn, b, u1..um` (the `b` column is omitted when
/// no barrier was evaluated).
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.x.first().map_or(0, |x| x.len());
    let m = traj.u.first().map_or(0, |u| u.len());
    let mut head = vec!["t".to_string()];
    head.extend((1..=n).map(|i| format!("x{i}")));
    if !traj.b.is_empty() {
        head.push("b".into());
    }
    head.extend((1..=m).map(|i| format!("u{i}")));
    let mut out = head.join(",");
    out.push('\n');
    for k in 0..traj.t.len() {
        let mut row = vec![format!("{:.16e}", traj.t[k])];
        row.extend(traj.x[k].iter().map(|v| format!("{v:.16e}")));
        if !traj.b.is_empty() {
            row.push(format!("{:.16e}", traj.b[k]));
        }
        row.extend(traj.u[k].iter().map(|v| format!("{v:.16e}")));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
