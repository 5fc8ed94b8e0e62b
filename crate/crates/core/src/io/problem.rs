//! The `.prob` text format.
//!
//! ```text
//! # comment
//! [system]
//! A = 0 1; 0 0
//! B = 0; 1
//! [partition]
//! n_bar = 1
//! [mode]
//! mode = global
//! [safe_set]
//! poly = x1^2 - 1
//! [options]
//! epsilon = 1e-6
//! ```
//!
//! Matrices are row-major with rows separated by `;`. `poly`, `halfspace`
//! and `vertex` may repeat; every other key appears at most once.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{CbfError, Result};
use crate::model::{
    Containment, Halfspace, InitialSetSpec, InputBound, InputBoundSpec, LinearSystem, Mode, MuMode, ProblemSpec,
    SafeSetSpec, StatePartition, SynthesisOptions,
};
use crate::poly::Polynomial;

const SECTIONS: &[(&str, &[&str])] = &[
    ("system", &["A", "B"]),
    ("partition", &["n_bar"]),
    ("mode", &["mode"]),
    ("safe_set", &["poly", "halfspace"]),
    ("initial_set", &["poly"]),
    ("input_bound", &["type", "zeta", "epsilon", "H", "h"]),
    ("center", &["c"]),
    ("containment", &["method", "vertex"]),
    (
        "options",
        &[
            "multiplier_degree",
            "epsilon",
            "delta",
            "mu",
            "rank_tol",
            "seed",
            "tol_feas",
            "tol_gap_abs",
            "tol_gap_rel",
            "max_iter",
        ],
    ),
];

const REPEATABLE: &[&str] = &["poly", "halfspace", "vertex"];

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

fn at(line: usize, msg: impl std::fmt::Display) -> CbfError {
    CbfError::Parse(format!("line {line}: {msg}"))
}

/// Entries grouped by `(section, key)`, in file order.
struct Document {
    entries: BTreeMap<(String, String), Vec<Entry>>,
    last_line: usize,
}

impl Document {
    fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<(String, String), Vec<Entry>> = BTreeMap::new();
        let mut section: Option<&str> = None;
        let mut seen_sections: Vec<&str> = Vec::new();
        let mut last_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| at(line, "section header missing `]`"))?
                    .trim();
                let known = SECTIONS
                    .iter()
                    .find(|(s, _)| *s == name)
                    .ok_or_else(|| at(line, format!("unknown section `[{name}]`")))?;
                if seen_sections.contains(&known.0) {
                    return Err(at(line, format!("section `[{name}]` appears twice")));
                }
                seen_sections.push(known.0);
                section = Some(known.0);
                continue;
            }
            let sec = section.ok_or_else(|| at(line, "key outside of any section"))?;
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| at(line, format!("expected `key = value`, found `{content}`")))?;
            let key = key.trim();
            let keys = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !keys.contains(&key) {
                return Err(at(line, format!("unknown key `{key}` in section `[{sec}]`")));
            }
            let slot = entries.entry((sec.to_string(), key.to_string())).or_default();
            if !slot.is_empty() && !REPEATABLE.contains(&key) {
                return Err(at(line, format!("duplicate key `{key}` in section `[{sec}]`")));
            }
            slot.push(Entry {
                line,
                value: value.trim().to_string(),
            });
        }
        Ok(Document { entries, last_line })
    }

    fn all(&self, sec: &str, key: &str) -> &[Entry] {
        self.entries
            .get(&(sec.to_string(), key.to_string()))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    fn get(&self, sec: &str, key: &str) -> Option<&Entry> {
        self.all(sec, key).first()
    }

    fn require(&self, sec: &str, key: &str) -> Result<&Entry> {
        self.get(sec, key)
            .ok_or_else(|| at(self.last_line, format!("missing `{key}` in section `[{sec}]`")))
    }

    fn has_section(&self, sec: &str) -> bool {
        self.entries.keys().any(|(s, _)| s == sec)
    }
}

fn number(e: &Entry, tok: &str) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| at(e.line, format!("bad number `{tok}`")))?;
    if !v.is_finite() {
        return Err(at(e.line, format!("non-finite number `{tok}`")));
    }
    Ok(v)
}

fn scalar(e: &Entry) -> Result<f64> {
    number(e, e.value.trim())
}

fn integer<T: std::str::FromStr>(e: &Entry) -> Result<T> {
    e.value
        .trim()
        .parse()
        .map_err(|_| at(e.line, format!("expected a nonnegative integer, found `{}`", e.value)))
}

fn row(e: &Entry, text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| number(e, t))
        .collect()
}

fn vector(e: &Entry) -> Result<DVector<f64>> {
    let v = row(e, &e.value)?;
    if v.is_empty() {
        return Err(at(e.line, "empty vector"));
    }
    Ok(DVector::from_vec(v))
}

fn matrix(e: &Entry) -> Result<DMatrix<f64>> {
    let rows = e
        .value
        .split(';')
        .map(|r| row(e, r))
        .collect::<Result<Vec<_>>>()?;
    let cols = rows.first().map_or(0, |r| r.len());
    if cols == 0 {
        return Err(at(e.line, "empty matrix"));
    }
    if let Some(k) = rows.iter().position(|r| r.len() != cols) {
        return Err(at(
            e.line,
            format!("matrix row {} has {} entries, expected {cols}", k + 1, rows[k].len()),
        ));
    }
    let flat: Vec<f64> = rows.concat();
    Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
}

fn polynomial(e: &Entry, n: usize) -> Result<Polynomial> {
    Polynomial::parse(&e.value, n).map_err(|err| at(e.line, err))
}

fn halfspace(e: &Entry, n: usize) -> Result<Halfspace> {
    let (a, o) = e
        .value
        .split_once('|')
        .ok_or_else(|| at(e.line, "halfspace must read `a1 a2 ... | offset`"))?;
    let a = row(e, a)?;
    if a.len() != n {
        return Err(at(e.line, format!("halfspace normal has {} entries, state has {n}", a.len())));
    }
    Ok(Halfspace::new(DVector::from_vec(a), number(e, o.trim())?))
}

fn sized(e: &Entry, v: DVector<f64>, n: usize, what: &str) -> Result<DVector<f64>> {
    if v.len() != n {
        return Err(at(e.line, format!("{what} has {} entries, expected {n}", v.len())));
    }
    Ok(v)
}

/// Parses a problem file. Errors name the offending line.
pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let doc = Document::parse(text)?;

    let ae = doc.require("system", "A")?;
    let be = doc.require("system", "B")?;
    let a = matrix(ae)?;
    let b = matrix(be)?;
    let system = LinearSystem::new(a, b).map_err(|err| at(be.line, err))?;
    let n = system.n();
    let m = system.m();

    let mode = match doc.get("mode", "mode") {
        None => Mode::Global,
        Some(e) => match e.value.as_str() {
            "global" => Mode::Global,
            "local" => Mode::Local,
            other => return Err(at(e.line, format!("mode must be `global` or `local`, found `{other}`"))),
        },
    };

    let partition = match doc.get("partition", "n_bar") {
        Some(e) => {
            let nb: usize = integer(e)?;
            if nb == 0 || nb > n {
                return Err(at(e.line, format!("n_bar must lie in 1..={n}")));
            }
            StatePartition::new(nb, n - nb)
        }
        None => StatePartition::full(n),
    };

    let polys = doc.all("safe_set", "poly");
    let hs = doc.all("safe_set", "halfspace");
    let safe_set = match (polys.is_empty(), hs.is_empty()) {
        (false, true) => SafeSetSpec::GlobalUnion(polys.iter().map(|e| polynomial(e, n)).collect::<Result<_>>()?),
        (true, false) => SafeSetSpec::LocalHalfspaces(hs.iter().map(|e| halfspace(e, n)).collect::<Result<_>>()?),
        (false, false) => {
            return Err(at(hs[0].line, "safe set mixes `poly` and `halfspace` entries"));
        }
        (true, true) => return Err(at(doc.last_line, "section `[safe_set]` needs `poly` or `halfspace` entries")),
    };

    let init = doc.all("initial_set", "poly");
    let initial_set = if init.is_empty() {
        None
    } else {
        Some(InitialSetSpec {
            polys: init.iter().map(|e| polynomial(e, n)).collect::<Result<_>>()?,
        })
    };

    let input_bound = parse_input_bound(&doc, m)?;

    let center = doc
        .get("center", "c")
        .map(|e| vector(e).and_then(|v| sized(e, v, n, "center")))
        .transpose()?;

    let vertices = doc.all("containment", "vertex");
    let method = doc.get("containment", "method");
    let use_vertices = match method.map(|e| (e, e.value.as_str())) {
        None => !vertices.is_empty(),
        Some((_, "sos")) => false,
        Some((_, "vertices")) => true,
        Some((e, other)) => {
            return Err(at(e.line, format!("method must be `sos` or `vertices`, found `{other}`")));
        }
    };
    let containment = if use_vertices {
        if vertices.is_empty() {
            return Err(at(doc.last_line, "vertex containment needs `vertex` entries"));
        }
        let nb = partition.n_bar;
        Containment::Vertices(
            vertices
                .iter()
                .map(|e| vector(e).and_then(|v| sized(e, v, nb, "vertex")))
                .collect::<Result<_>>()?,
        )
    } else {
        Containment::Sos
    };

    let mut options = SynthesisOptions::default();
    if let Some(e) = doc.get("options", "multiplier_degree") {
        options.multiplier_degree = integer(e)?;
    }
    if let Some(e) = doc.get("options", "epsilon") {
        options.epsilon = scalar(e)?;
    }
    if let Some(e) = doc.get("options", "delta") {
        options.delta = scalar(e)?;
    }
    if let Some(e) = doc.get("options", "mu") {
        options.mu_mode = match e.value.as_str() {
            "fixed" => MuMode::Fixed,
            "free" => MuMode::Free,
            other => return Err(at(e.line, format!("mu must be `fixed` or `free`, found `{other}`"))),
        };
    }
    if let Some(e) = doc.get("options", "rank_tol") {
        options.rank_tol = scalar(e)?;
    }
    if let Some(e) = doc.get("options", "seed") {
        options.seed = integer(e)?;
    }
    if let Some(e) = doc.get("options", "tol_feas") {
        options.solver.tol_feas = scalar(e)?;
    }
    if let Some(e) = doc.get("options", "tol_gap_abs") {
        options.solver.tol_gap_abs = scalar(e)?;
    }
    if let Some(e) = doc.get("options", "tol_gap_rel") {
        options.solver.tol_gap_rel = scalar(e)?;
    }
    if let Some(e) = doc.get("options", "max_iter") {
        options.solver.max_iter = integer(e)?;
    }

    Ok(ProblemSpec {
        system,
        partition,
        mode,
        safe_set,
        initial_set,
        input_bound,
        center,
        containment,
        options,
    })
}

fn parse_input_bound(doc: &Document, m: usize) -> Result<InputBoundSpec> {
    let mut spec = InputBoundSpec::none();
    if !doc.has_section("input_bound") {
        return Ok(spec);
    }
    if let Some(e) = doc.get("input_bound", "epsilon") {
        spec.epsilon = scalar(e)?;
    }
    let te = doc.require("input_bound", "type")?;
    let zeta = || scalar(doc.require("input_bound", "zeta")?);
    spec.bound = match te.value.as_str() {
        "none" => InputBound::None,
        "l2" => InputBound::L2 { zeta: zeta()? },
        "linf" => InputBound::Linf { zeta: zeta()? },
        "polytope" => {
            let he = doc.require("input_bound", "H")?;
            let h_mat = matrix(he)?;
            if h_mat.ncols() != m {
                return Err(at(he.line, format!("H has {} columns, the input has {m}", h_mat.ncols())));
            }
            let ve = doc.require("input_bound", "h")?;
            let h = sized(ve, vector(ve)?, h_mat.nrows(), "h")?;
            InputBound::Polytope { h_mat, h }
        }
        other => {
            return Err(at(
                te.line,
                format!("type must be one of none, l2, linf, polytope; found `{other}`"),
            ))
        }
    };
    Ok(spec)
}

pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn fmt_row(v: impl IntoIterator<Item = f64>) -> String {
    v.into_iter().map(fmt_num).collect::<Vec<_>>().join(" ")
}

fn fmt_matrix(m: &DMatrix<f64>) -> String {
    (0..m.nrows())
        .map(|i| fmt_row(m.row(i).iter().copied()))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Canonical text of a spec: every section written out, numbers at 17
/// significant digits. `parse_problem(&write_problem(s)) == s`.
pub fn write_problem(spec: &ProblemSpec) -> String {
    let mut out = String::new();
    let mut put = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    put("[system]".into());
    put(format!("A = {}", fmt_matrix(spec.system.a())));
    put(format!("B = {}", fmt_matrix(spec.system.b())));
    put("[partition]".into());
    put(format!("n_bar = {}", spec.partition.n_bar));
    put("[mode]".into());
    put(format!(
        "mode = {}",
        match spec.mode {
            Mode::Global => "global",
            Mode::Local => "local",
        }
    ));
    put("[safe_set]".into());
    match &spec.safe_set {
        SafeSetSpec::GlobalUnion(ps) => {
            for p in ps {
                put(format!("poly = {}", p.to_exact_string()));
            }
        }
        SafeSetSpec::LocalHalfspaces(hs) => {
            for h in hs {
                put(format!("halfspace = {} | {}", fmt_row(h.a.iter().copied()), fmt_num(h.offset)));
            }
        }
    }
    if let Some(init) = &spec.initial_set {
        put("[initial_set]".into());
        for p in &init.polys {
            put(format!("poly = {}", p.to_exact_string()));
        }
    }
    put("[input_bound]".into());
    match &spec.input_bound.bound {
        InputBound::None => put("type = none".into()),
        InputBound::L2 { zeta } => {
            put("type = l2".into());
            put(format!("zeta = {}", fmt_num(*zeta)));
        }
        InputBound::Linf { zeta } => {
            put("type = linf".into());
            put(format!("zeta = {}", fmt_num(*zeta)));
        }
        InputBound::Polytope { h_mat, h } => {
            put("type = polytope".into());
            put(format!("H = {}", fmt_matrix(h_mat)));
            put(format!("h = {}", fmt_row(h.iter().copied())));
        }
    }
    put(format!("epsilon = {}", fmt_num(spec.input_bound.epsilon)));
    if let Some(c) = &spec.center {
        put("[center]".into());
        put(format!("c = {}", fmt_row(c.iter().copied())));
    }
    put("[containment]".into());
    match &spec.containment {
        Containment::Sos => put("method = sos".into()),
        Containment::Vertices(vs) => {
            put("method = vertices".into());
            for v in vs {
                put(format!("vertex = {}", fmt_row(v.iter().copied())));
            }
        }
    }
    let o = &spec.options;
    put("[options]".into());
    put(format!("multiplier_degree = {}", o.multiplier_degree));
    put(format!("epsilon = {}", fmt_num(o.epsilon)));
    put(format!("delta = {}", fmt_num(o.delta)));
    put(format!(
        "mu = {}",
        match o.mu_mode {
            MuMode::Fixed => "fixed",
            MuMode::Free => "free",
        }
    ));
    put(format!("rank_tol = {}", fmt_num(o.rank_tol)));
    put(format!("seed = {}", o.seed));
    put(format!("tol_feas = {}", fmt_num(o.solver.tol_feas)));
    put(format!("tol_gap_abs = {}", fmt_num(o.solver.tol_gap_abs)));
    put(format!("tol_gap_rel = {}", fmt_num(o.solver.tol_gap_rel)));
    put(format!("max_iter = {}", o.solver.max_iter));
    out
}
