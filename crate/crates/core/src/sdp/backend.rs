//! Standard conic form and the solver backend contract.
//!
//! A backend receives
//!
//! ```text
//! minimize    qᵀx + q0
//! subject to  b − A x ∈ K,   K = K_1 × … × K_p
//! ```
//!
//! where each `K_i` is a zero cone, a nonnegative orthant, or a PSD cone of
//! side `d` acting on the scaled upper triangle `svec(S)` (column-major, off
//! diagonals multiplied by √2). Decision entries of the [`ConicProblem`]
//! (see [`super::ConicProblem`]) map one-to-one onto `x`.

use std::fmt::Write as _;

use crate::error::{CbfError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero(usize),
    Nonneg(usize),
    /// PSD cone of side `d`; occupies `d(d+1)/2` rows.
    Psd(usize),
}

impl Cone {
    pub fn rows(&self) -> usize {
        match *self {
            Cone::Zero(k) | Cone::Nonneg(k) => k,
            Cone::Psd(d) => d * (d + 1) / 2,
        }
    }
}

/// Sparse standard-form conic program.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub num_vars: usize,
    pub q: Vec<f64>,
    pub q0: f64,
    /// Triplets `(row, col, value)` of `A`.
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl StandardForm {
    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// Flat text serialization:
    ///
    /// ```text
    /// conic-standard-form 1
    /// vars <n>
    /// rows <m>
    /// q0 <value>
    /// q <j> <value>                 (nonzeros only)
    /// cone zero|nonneg|psd <size>   (in row order)
    /// b <i> <value>                 (nonzeros only)
    /// a <i> <j> <value>
    /// end
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "conic-standard-form 1");
        let _ = writeln!(s, "vars {}", self.num_vars);
        let _ = writeln!(s, "rows {}", self.num_rows());
        let _ = writeln!(s, "q0 {:.17e}", self.q0);
        for (j, v) in self.q.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            let _ = writeln!(s, "q {j} {v:.17e}");
        }
        for c in &self.cones {
            let (kind, k) = match *c {
                Cone::Zero(k) => ("zero", k),
                Cone::Nonneg(k) => ("nonneg", k),
                Cone::Psd(d) => ("psd", d),
            };
            let _ = writeln!(s, "cone {kind} {k}");
        }
        for (i, v) in self.b.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            let _ = writeln!(s, "b {i} {v:.17e}");
        }
        for (i, j, v) in &self.a {
            let _ = writeln!(s, "a {i} {j} {v:.17e}");
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<StandardForm> {
        let err = |line: usize, msg: &str| CbfError::Parse(format!("line {}: {msg}", line + 1));
        let mut sf = StandardForm {
            num_vars: 0,
            q: Vec::new(),
            q0: 0.0,
            a: Vec::new(),
            b: Vec::new(),
            cones: Vec::new(),
        };
        let mut rows = 0usize;
        let mut seen_end = false;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            let num = |k: usize| -> Result<f64> {
                tok.get(k)
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| err(ln, "expected a number"))
            };
            let idx = |k: usize| -> Result<usize> {
                tok.get(k)
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| err(ln, "expected an index"))
            };
            match tok[0] {
                "conic-standard-form" if ln == 0 => {
                    if tok.get(1) != Some(&"1") {
                        return Err(err(ln, "unsupported format version"));
                    }
                }
                "vars" => {
                    sf.num_vars = idx(1)?;
                    sf.q = vec![0.0; sf.num_vars];
                }
                "rows" => {
                    rows = idx(1)?;
                    sf.b = vec![0.0; rows];
                }
                "q0" => sf.q0 = num(1)?,
                "q" => {
                    let j = idx(1)?;
                    *sf.q.get_mut(j).ok_or_else(|| err(ln, "q index out of range"))? = num(2)?;
                }
                "cone" => {
                    let k = idx(2)?;
                    sf.cones.push(match tok.get(1).copied() {
                        Some("zero") => Cone::Zero(k),
                        Some("nonneg") => Cone::Nonneg(k),
                        Some("psd") => Cone::Psd(k),
                        _ => return Err(err(ln, "unknown cone kind")),
                    });
                }
                "b" => {
                    let i = idx(1)?;
                    *sf.b.get_mut(i).ok_or_else(|| err(ln, "b index out of range"))? = num(2)?;
                }
                "a" => {
                    let (i, j, v) = (idx(1)?, idx(2)?, num(3)?);
                    if i >= rows || j >= sf.num_vars {
                        return Err(err(ln, "a index out of range"));
                    }
                    sf.a.push((i, j, v));
                }
                "end" => {
                    seen_end = true;
                    break;
                }
                _ => return Err(err(ln, "unknown record")),
            }
        }
        if !seen_end {
            return Err(CbfError::Parse("missing `end`".into()));
        }
        let cone_rows: usize = sf.cones.iter().map(Cone::rows).sum();
        if cone_rows != rows {
            return Err(CbfError::Parse(format!(
                "cones cover {cone_rows} rows but {rows} declared"
            )));
        }
        Ok(sf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol_feas: f64,
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_feas: 1e-9,
            tol_gap_abs: 1e-9,
            tol_gap_rel: 1e-9,
            max_iter: 200,
            verbose: false,
        }
    }
}

/// Raw output of a backend on a [`StandardForm`].
#[derive(Debug, Clone, PartialEq)]
pub struct BackendOutput {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub solve_time: f64,
    /// Backend-specific status text.
    pub detail: String,
}

pub trait SolverBackend {
    fn name(&self) -> &str;

    fn supports_psd(&self) -> bool;

    fn solve_standard(&self, problem: &StandardForm, options: &SolverOptions) -> Result<BackendOutput>;
}
