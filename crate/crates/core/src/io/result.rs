//! The `.result` text format: a flat `key = value` document with the
//! problem embedded between `begin problem` / `end problem`.
//!
//! Matrices are written as `key = matrix <rows> <cols>` followed by one line
//! per row. All numbers carry 17 significant digits so that a result read
//! back audits to bit-identical margins.

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::{CbfError, Result};
use crate::io::problem::{fmt_num, fmt_row, parse_problem, write_problem};
use crate::model::{CenterData, ProblemSpec};
use crate::sdp::SolveStatus;
use crate::synthesis::{
    AffineController, CbfFunction, Orientation, ProgramTag, SolveSummary, SosCertificate, SynthesisResult,
};
use crate::verify::{check_certificate, CertificateReport, Tolerances};

const FORMAT: &str = "cbf-result 1";

/// SHA-256 (hex) of the canonical problem text.
pub fn spec_hash(spec: &ProblemSpec) -> String {
    hash_text(&write_problem(spec))
}

fn hash_text(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn put_matrix(out: &mut String, key: &str, m: &DMatrix<f64>) {
    out.push_str(&format!("{key} = matrix {} {}\n", m.nrows(), m.ncols()));
    for i in 0..m.nrows() {
        out.push_str(&fmt_row(m.row(i).iter().copied()));
        out.push('\n');
    }
}

pub fn write_result(res: &SynthesisResult) -> String {
    let problem = write_problem(&res.spec);
    let mut out = String::new();
    out.push_str(&format!("format = {FORMAT}\n"));
    out.push_str(&format!("tag = {}\n", res.tag));
    out.push_str(&format!("spec_sha256 = {}\n", hash_text(&problem)));
    out.push_str("begin problem\n");
    out.push_str(&problem);
    out.push_str("end problem\n");
    out.push_str(&format!("center.c = {}\n", fmt_row(res.center.c.iter().copied())));
    out.push_str(&format!("center.d = {}\n", fmt_row(res.center.d.iter().copied())));
    out.push_str(&format!("center.residual = {}\n", fmt_num(res.center.residual)));
    put_matrix(&mut out, "omega", &res.cbf.omega);
    put_matrix(&mut out, "k", &res.controller.k);
    if let Some(y) = &res.y {
        put_matrix(&mut out, "y", y);
    }
    if let Some(r) = &res.r {
        put_matrix(&mut out, "r", r);
    }
    if !res.mus.is_empty() {
        out.push_str(&format!("mu = {}\n", fmt_row(res.mus.iter().copied())));
    }
    if let Some(s) = &res.sos {
        out.push_str(&format!("sos.nvars = {}\n", s.nvars));
        out.push_str(&format!("sos.multiplier_degree = {}\n", s.multiplier_degree));
        out.push_str(&format!("sos.margin = {}\n", fmt_num(s.margin)));
        put_matrix(&mut out, "sos.master", &s.master);
        for (i, g) in s.multipliers.iter().enumerate() {
            put_matrix(&mut out, &format!("sos.sigma{}", i + 1), g);
        }
    }
    if let Some(s) = &res.solve {
        out.push_str(&format!("solver.status = {}\n", s.status.as_str()));
        out.push_str(&format!("solver.objective = {}\n", fmt_num(s.objective)));
        out.push_str(&format!("solver.iterations = {}\n", s.iterations));
        out.push_str(&format!("solver.primal_residual = {}\n", fmt_num(s.primal_residual)));
        out.push_str(&format!("solver.dual_residual = {}\n", fmt_num(s.dual_residual)));
        out.push_str(&format!("solver.solve_time = {}\n", fmt_num(s.solve_time)));
        out.push_str(&format!("solver.min_lmi_margin = {}\n", fmt_num(s.min_lmi_margin)));
    }
    out.push_str(&res.report.to_kv());
    out
}

/// A check line as stored in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredCheck {
    pub name: String,
    pub status: String,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultFile {
    /// The result, re-audited at the requested tolerances.
    pub result: SynthesisResult,
    /// Checks recorded when the file was written (empty for hand-written files).
    pub stored: Vec<StoredCheck>,
}

fn at(line: usize, msg: impl std::fmt::Display) -> CbfError {
    CbfError::Parse(format!("line {line}: {msg}"))
}

fn num(line: usize, t: &str) -> Result<f64> {
    t.parse::<f64>().map_err(|_| at(line, format!("bad number `{t}`")))
}

fn nums(line: usize, t: &str) -> Result<Vec<f64>> {
    t.split_whitespace().map(|x| num(line, x)).collect()
}

#[derive(Default)]
struct Fields {
    tag: Option<ProgramTag>,
    hash: Option<String>,
    problem: Option<String>,
    c: Option<DVector<f64>>,
    d: Option<DVector<f64>>,
    residual: f64,
    omega: Option<DMatrix<f64>>,
    p: Option<DMatrix<f64>>,
    k: Option<DMatrix<f64>>,
    y: Option<DMatrix<f64>>,
    r: Option<DMatrix<f64>>,
    mus: Vec<f64>,
    sos_nvars: Option<usize>,
    sos_degree: Option<u32>,
    sos_margin: f64,
    sos_master: Option<DMatrix<f64>>,
    sos_sigmas: Vec<(usize, DMatrix<f64>)>,
    solver: Vec<(String, String, usize)>,
    stored: Vec<StoredCheck>,
}

/// Parses a result file and re-runs the certificate audit with `tol`.
/// Files may give `p = P` instead of `omega`, as published certificates do;
/// missing `center.*` entries default to the origin.
pub fn parse_result(text: &str, tol: &Tolerances) -> Result<ResultFile> {
    let lines: Vec<&str> = text.lines().collect();
    let mut f = Fields::default();
    let mut i = 0;
    while i < lines.len() {
        let line = i + 1;
        let content = lines[i].split('#').next().unwrap_or("").trim();
        i += 1;
        if content.is_empty() {
            continue;
        }
        if content == "begin problem" {
            let start = i;
            while i < lines.len() && lines[i].trim() != "end problem" {
                i += 1;
            }
            if i == lines.len() {
                return Err(at(line, "`begin problem` without `end problem`"));
            }
            let mut body = lines[start..i].join("\n");
            body.push('\n');
            f.problem = Some(body);
            i += 1;
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| at(line, format!("expected `key = value`, found `{content}`")))?;

        let read_matrix = |i: &mut usize| -> Result<DMatrix<f64>> {
            let dims: Vec<&str> = value.split_whitespace().collect();
            let (r, c) = match dims.as_slice() {
                ["matrix", r, c] => (
                    r.parse::<usize>().map_err(|_| at(line, "bad row count"))?,
                    c.parse::<usize>().map_err(|_| at(line, "bad column count"))?,
                ),
                _ => return Err(at(line, format!("`{key}` must read `matrix <rows> <cols>`"))),
            };
            let mut data = Vec::with_capacity(r * c);
            for _ in 0..r {
                let l = *i + 1;
                let row = lines
                    .get(*i)
                    .ok_or_else(|| at(l, format!("`{key}` ends early")))?;
                let v = nums(l, row)?;
                if v.len() != c {
                    return Err(at(l, format!("row has {} entries, expected {c}", v.len())));
                }
                data.extend(v);
                *i += 1;
            }
            Ok(DMatrix::from_row_slice(r, c, &data))
        };

        match key {
            "format" => {
                if value != FORMAT {
                    return Err(at(line, format!("unsupported format `{value}`")));
                }
            }
            "tag" => f.tag = Some(ProgramTag::parse(value).map_err(|e| at(line, e))?),
            "spec_sha256" => f.hash = Some(value.to_string()),
            "center.c" => f.c = Some(DVector::from_vec(nums(line, value)?)),
            "center.d" => f.d = Some(DVector::from_vec(nums(line, value)?)),
            "center.residual" => f.residual = num(line, value)?,
            "omega" => f.omega = Some(read_matrix(&mut i)?),
            "p" => f.p = Some(read_matrix(&mut i)?),
            "k" => f.k = Some(read_matrix(&mut i)?),
            "y" => f.y = Some(read_matrix(&mut i)?),
            "r" => f.r = Some(read_matrix(&mut i)?),
            "mu" => f.mus = nums(line, value)?,
            "sos.nvars" => f.sos_nvars = Some(value.parse().map_err(|_| at(line, "bad integer"))?),
            "sos.multiplier_degree" => f.sos_degree = Some(value.parse().map_err(|_| at(line, "bad integer"))?),
            "sos.margin" => f.sos_margin = num(line, value)?,
            "sos.master" => f.sos_master = Some(read_matrix(&mut i)?),
            "report.tolerance" | "report.seed" | "report.passed" => {}
            _ if key.starts_with("sos.sigma") => {
                let k: usize = key["sos.sigma".len()..]
                    .parse()
                    .map_err(|_| at(line, format!("unknown key `{key}`")))?;
                f.sos_sigmas.push((k, read_matrix(&mut i)?));
            }
            _ if key.starts_with("solver.") => f.solver.push((key[7..].to_string(), value.to_string(), line)),
            _ if key.starts_with("check.") => {
                let (status, margin) = value
                    .split_once(' ')
                    .ok_or_else(|| at(line, "check lines read `pass|fail|info <margin>`"))?;
                f.stored.push(StoredCheck {
                    name: key[6..].to_string(),
                    status: status.to_string(),
                    margin: num(line, margin.trim())?,
                });
            }
            _ => return Err(at(line, format!("unknown key `{key}`"))),
        }
    }
    assemble(f, tol)
}

fn solve_summary(entries: &[(String, String, usize)]) -> Result<Option<SolveSummary>> {
    if entries.is_empty() {
        return Ok(None);
    }
    let mut s = SolveSummary {
        status: SolveStatus::Optimal,
        objective: f64::NAN,
        iterations: 0,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        solve_time: f64::NAN,
        min_lmi_margin: f64::NAN,
    };
    for (k, v, line) in entries {
        let line = *line;
        match k.as_str() {
            "status" => {
                s.status = [
                    SolveStatus::Optimal,
                    SolveStatus::Infeasible,
                    SolveStatus::Unbounded,
                    SolveStatus::NumericalFailure,
                ]
                .into_iter()
                .find(|st| st.as_str() == v)
                .ok_or_else(|| at(line, format!("unknown solver status `{v}`")))?
            }
            "objective" => s.objective = num(line, v)?,
            "iterations" => s.iterations = v.parse().map_err(|_| at(line, "bad integer"))?,
            "primal_residual" => s.primal_residual = num(line, v)?,
            "dual_residual" => s.dual_residual = num(line, v)?,
            "solve_time" => s.solve_time = num(line, v)?,
            "min_lmi_margin" => s.min_lmi_margin = num(line, v)?,
            _ => return Err(at(line, format!("unknown key `solver.{k}`"))),
        }
    }
    Ok(Some(s))
}

fn assemble(f: Fields, tol: &Tolerances) -> Result<ResultFile> {
    let missing = |what: &str| CbfError::Parse(format!("result file has no `{what}`"));
    let problem = f.problem.ok_or_else(|| missing("begin problem"))?;
    if let Some(h) = &f.hash {
        let actual = hash_text(&problem);
        if *h != actual {
            return Err(CbfError::Parse(format!(
                "spec_sha256 mismatch: file says {h}, embedded problem hashes to {actual}"
            )));
        }
    }
    let spec = parse_problem(&problem)?;
    let n = spec.n();
    let m = spec.m();
    let c = f.c.unwrap_or_else(|| DVector::zeros(n));
    let d = f.d.unwrap_or_else(|| DVector::zeros(m));
    if c.len() != n || d.len() != m {
        return Err(CbfError::DimensionMismatch("center.c / center.d do not fit the system".into()));
    }
    let orientation = Orientation::for_mode(spec.mode);
    let cbf = match (f.omega, f.p) {
        (Some(o), None) => CbfFunction::new(c.clone(), o, orientation)?,
        (None, Some(p)) => CbfFunction::from_p(c.clone(), p, orientation)?,
        _ => return Err(CbfError::Parse("result file needs exactly one of `omega` and `p`".into())),
    };
    let k = f.k.ok_or_else(|| missing("k"))?;
    if k.nrows() != m || k.ncols() != n {
        return Err(CbfError::DimensionMismatch(format!("k must be {m}x{n}")));
    }
    let sos = match (f.sos_master, f.sos_nvars) {
        (Some(master), Some(nvars)) => {
            let mut sig = f.sos_sigmas;
            sig.sort_by_key(|(i, _)| *i);
            if sig.iter().enumerate().any(|(j, (i, _))| *i != j + 1) {
                return Err(CbfError::Parse("sos.sigma entries must be numbered 1, 2, ...".into()));
            }
            Some(SosCertificate {
                nvars,
                multiplier_degree: f.sos_degree.unwrap_or(spec.options.multiplier_degree),
                multipliers: sig.into_iter().map(|(_, g)| g).collect(),
                master,
                margin: f.sos_margin,
            })
        }
        (None, None) => None,
        _ => return Err(CbfError::Parse("sos certificate needs both `sos.nvars` and `sos.master`".into())),
    };
    let tag = f.tag.unwrap_or_else(|| ProgramTag::for_spec(&spec));
    let mut result = SynthesisResult {
        center: CenterData {
            c: c.clone(),
            d: d.clone(),
            residual: f.residual,
        },
        controller: AffineController { k, d, c },
        cbf,
        tag,
        r: f.r,
        y: f.y,
        sos,
        mus: f.mus,
        solve: solve_summary(&f.solver)?,
        report: CertificateReport::default(),
        spec,
    };
    result.report = check_certificate(&result, tol);
    Ok(ResultFile {
        result,
        stored: f.stored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::ClarabelBackend;
    use crate::synthesis::synthesize;

    #[test]
    fn synthesized_result_round_trips() {
        let spec = crate::model::tests::example1_spec();
        let res = synthesize(&spec, &ClarabelBackend).unwrap();
        let text = write_result(&res);
        let back = parse_result(&text, &Tolerances::default()).unwrap();
        assert_eq!(back.result, res);
        assert_eq!(write_result(&back.result), text);
        assert_eq!(back.stored.len(), res.report.checks.len());
        for (s, c) in back.stored.iter().zip(&res.report.checks) {
            assert_eq!(s.name, c.name);
            assert_eq!(s.margin.to_bits(), c.margin.to_bits());
        }
    }

    #[test]
    fn tampered_problem_is_detected() {
        let spec = crate::model::tests::example1_spec();
        let res = synthesize(&spec, &ClarabelBackend).unwrap();
        let text = write_result(&res).replace("n_bar = 1", "n_bar = 2");
        let e = parse_result(&text, &Tolerances::default()).unwrap_err().to_string();
        assert!(e.contains("spec_sha256"), "{e}");
    }

    #[test]
    fn published_form_with_p() {
        let text = "\
begin problem
[system]
A = -1 -1; 0 -1
B = 1; 1
[safe_set]
poly = x1^2 + x2^2 - 1
[input_bound]
type = l2
zeta = 8
epsilon = 0
end problem
p = matrix 2 2
0.88391 -0.253835
-0.253835 0.25205
k = matrix 1 2
1.4164 0.59702
";
        let f = parse_result(text, &Tolerances::default()).unwrap();
        assert!(f.stored.is_empty());
        assert!(f.result.verified(), "{}", f.result.report);
        let bad = text.replace("k = matrix 1 2\n", "k = matrix 1 3\n");
        assert!(parse_result(&bad, &Tolerances::default()).unwrap_err().to_string().contains("line"));
    }
}
