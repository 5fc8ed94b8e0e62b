//! Command implementations behind the `cbf` binary.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (certificate verified) |
//! | 1 | usage, parse or specification error |
//! | 2 | synthesis program infeasible or solver failure |
//! | 3 | certificate failed verification |
//! | 4 | simulation diverged |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cbf_core::io::{parse_problem, parse_result, write_result};
use cbf_core::model::{validate_spec, Mode, SafeSetSpec};
use cbf_core::sdp::ClarabelBackend;
use cbf_core::synthesis::synthesize_with;
use cbf_core::verify::qp::grid_csv;
use cbf_core::verify::simulate::trajectory_csv;
use cbf_core::verify::{level_set_scan, pathology_scan, simulate_closed_loop, Axis, Slice, Tolerances};
use cbf_core::CbfError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;
pub const EXIT_BLOW_UP: u8 = 4;

/// Exit code for a library error.
pub fn exit_code(e: &CbfError) -> u8 {
    match e {
        CbfError::Infeasible { .. } | CbfError::NumericalFailure(_) | CbfError::BudgetExhausted(_) => EXIT_INFEASIBLE,
        CbfError::NotPsd { .. } | CbfError::IllConditioned { .. } => EXIT_VERIFY,
        CbfError::DimensionMismatch(_)
        | CbfError::SpecInvalid(_)
        | CbfError::RankConditionViolated { .. }
        | CbfError::DegreeOverflow { .. }
        | CbfError::EmptyVertexList
        | CbfError::Unsupported(_)
        | CbfError::UnboundedControl { .. }
        | CbfError::Parse(_) => EXIT_USAGE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "cbf", version, about = "Quadratic control barrier function and controller co-design")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the synthesis program for a problem file and audit the result.
    Synth(SynthArgs),
    /// Re-audit a result file.
    Verify(VerifyArgs),
    /// Simulate the closed loop of a result file.
    Simulate(SimulateArgs),
    /// Write plot grids.
    Scan(ScanArgs),
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Use the loose tolerance meant for published, rounded certificates.
    #[arg(long)]
    pub paper_tol: bool,
    /// Samples per sampled containment check.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Base seed of the sampled checks (defaults to the problem's seed).
    #[arg(long)]
    pub seed: Option<u64>,
}

impl AuditArgs {
    fn tolerances(&self, problem_seed: u64) -> Tolerances {
        Tolerances {
            paper: self.paper_tol,
            sample_count: self.samples,
            seed: self.seed.unwrap_or(problem_seed),
            ..Tolerances::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub problem: PathBuf,
    /// Result file (default: the problem path with extension `.result`).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub audit: AuditArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub result: PathBuf,
    #[command(flatten)]
    pub audit: AuditArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub result: PathBuf,
    /// Initial state, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: String,
    /// Horizon.
    #[arg(short = 'T', long = "horizon", default_value_t = 10.0)]
    pub t_final: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// CSV output (default: stdout).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScanMode {
    /// `min(u_s², cap)` of the closed-form CBF-QP controller for the first
    /// safe-set polynomial of a problem file.
    Pathology,
    /// `b(x)` of a result file on a 2-D slice.
    Levelset,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(value_enum)]
    pub mode: ScanMode,
    /// Problem file (pathology) or result file (levelset).
    pub input: PathBuf,
    /// Horizontal axis `lo:hi:count`.
    #[arg(long, default_value = "-1:1:101", allow_hyphen_values = true)]
    pub x: String,
    /// Vertical axis `lo:hi:count` (default: same as `--x`).
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<String>,
    /// Decay rate α of the CBF-QP condition.
    #[arg(long, default_value_t = 10.0)]
    pub alpha: f64,
    /// Cap on `u_s²`.
    #[arg(long, default_value_t = 100.0)]
    pub cap: f64,
    /// Free coordinates of the slice, 1-based, e.g. `1,2`.
    #[arg(long, default_value = "1,2")]
    pub free: String,
    /// Values of the remaining coordinates, full state length, e.g. `0,0,1,1`
    /// (entries at the free coordinates are ignored; default: zeros).
    #[arg(long, allow_hyphen_values = true)]
    pub base: Option<String>,
    /// CSV output (default: stdout).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<CbfError> for Failure {
    fn from(e: CbfError) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: msg.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| usage(format!("cannot write output: {e}"))),
    }
}

fn with_file<T>(path: &Path, r: cbf_core::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| {
        let code = exit_code(&e);
        Failure {
            code,
            message: format!("{}: {e}", path.display()),
        }
    })
}

pub fn parse_list(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| usage(format!("bad number `{t}` in `{text}`")))
        })
        .collect()
}

pub fn parse_axis(text: &str) -> Result<Axis, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(usage(format!("axis must read `lo:hi:count`, found `{text}`")));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| usage(format!("bad axis bound in `{text}`")))?;
    let hi: f64 = hi.trim().parse().map_err(|_| usage(format!("bad axis bound in `{text}`")))?;
    let n: usize = n.trim().parse().map_err(|_| usage(format!("bad point count in `{text}`")))?;
    Ok(Axis::new(lo, hi, n)?)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<u8, Failure> {
    let text = read(&args.problem)?;
    let spec = with_file(&args.problem, parse_problem(&text))?;
    for w in validate_spec(&spec).warnings {
        eprintln!("warning: {w}");
    }
    let tol = args.audit.tolerances(spec.options.seed);
    let res = with_file(&args.problem, synthesize_with(&spec, &ClarabelBackend, &tol))?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.problem.with_extension("result"));
    write_output(Some(&out), &write_result(&res))?;

    println!("program: {}", res.tag);
    if let Some(s) = &res.solve {
        println!("solver: {} after {} iterations", s.status.as_str(), s.iterations);
    }
    let n_bar = match spec.mode {
        Mode::Global => spec.partition.n_bar,
        Mode::Local => spec.n(),
    };
    let trace: f64 = (0..n_bar).map(|i| res.cbf.omega[(i, i)]).sum();
    let label = if spec.mode == Mode::Global { "Tr(Omega_bar)" } else { "Tr(Omega)" };
    println!("{label} = {trace:.10e}");
    println!("center = {}", fmt_vec(&res.center.c));
    println!("K =");
    for i in 0..res.controller.k.nrows() {
        println!("  {}", fmt_vec(&res.controller.k.row(i).transpose()));
    }
    println!("d = {}", fmt_vec(&res.controller.d));
    println!("{}", res.report);
    println!("result written to {}", out.display());
    Ok(if res.verified() { EXIT_OK } else { EXIT_VERIFY })
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<u8, Failure> {
    let text = read(&args.result)?;
    // the problem seed is only known after parsing; a user seed wins
    let base = Tolerances {
        paper: args.audit.paper_tol,
        sample_count: args.audit.samples,
        ..Tolerances::default()
    };
    let mut file = with_file(&args.result, parse_result(&text, &base))?;
    let tol = args.audit.tolerances(file.result.spec.options.seed);
    if tol != base {
        file.result.report = cbf_core::verify::check_certificate(&file.result, &tol);
    }
    println!("program: {}", file.result.tag);
    println!("{}", file.result.report);
    Ok(if file.result.verified() { EXIT_OK } else { EXIT_VERIFY })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<u8, Failure> {
    let text = read(&args.result)?;
    let file = with_file(&args.result, parse_result(&text, &Tolerances::default()))?;
    let res = &file.result;
    let x0 = DVector::from_vec(parse_list(&args.x0)?);
    let tr = simulate_closed_loop(&res.spec.system, &res.controller, &x0, args.t_final, args.dt, Some(&res.cbf))?;
    write_output(args.out.as_deref(), &trajectory_csv(&tr))?;
    let say = |s: String| {
        if args.out.is_some() {
            println!("{s}");
        } else {
            eprintln!("{s}");
        }
    };
    if let Some(t) = tr.blow_up {
        say(format!("state diverged at t = {t:.6e}"));
        return Ok(EXIT_BLOW_UP);
    }
    say(format!("final state = {}", fmt_vec(tr.final_state())));
    if let Some(e) = tr.barrier_extremum {
        let which = if res.spec.mode == Mode::Global { "min" } else { "max" };
        say(format!("{which} b(x(t)) = {e:.6e}"));
    }
    if let Some(t) = tr.first_violation {
        say(format!("left the certified set at t = {t:.6e}"));
    }
    if let Some(e) = tr.expm_rel_error {
        say(format!("RK4 vs matrix exponential relative error = {e:.3e}"));
    }
    Ok(EXIT_OK)
}

pub fn cmd_scan(args: &ScanArgs) -> Result<u8, Failure> {
    let xs = parse_axis(&args.x)?;
    let ys = match &args.y {
        Some(y) => parse_axis(y)?,
        None => xs,
    };
    let text = read(&args.input)?;
    let rows = match args.mode {
        ScanMode::Pathology => {
            let spec = with_file(&args.input, parse_problem(&text))?;
            let SafeSetSpec::GlobalUnion(polys) = &spec.safe_set else {
                return Err(usage("pathology scans need a polynomial safe set"));
            };
            pathology_scan(&polys[0], args.alpha, &spec.system, xs, ys, args.cap)?
        }
        ScanMode::Levelset => {
            let file = with_file(&args.input, parse_result(&text, &Tolerances::default()))?;
            let n = file.result.cbf.n();
            let free = parse_list(&args.free)?;
            let [a, b] = free.as_slice() else {
                return Err(usage(format!("--free needs two coordinates, found `{}`", args.free)));
            };
            let idx = |v: f64| {
                if v.fract() == 0.0 && v >= 1.0 && v <= n as f64 {
                    Ok(v as usize - 1)
                } else {
                    Err(usage(format!("free coordinate {v} is not in 1..={n}")))
                }
            };
            let base = match &args.base {
                Some(s) => DVector::from_vec(parse_list(s)?),
                None => DVector::zeros(n),
            };
            if base.len() != n {
                return Err(usage(format!("--base has {} entries, the state has {n}", base.len())));
            }
            let slice = Slice::new((idx(*a)?, idx(*b)?), base)?;
            level_set_scan(&file.result.cbf, &slice, xs, ys)?
        }
    };
    write_output(args.out.as_deref(), &grid_csv(&rows))?;
    Ok(EXIT_OK)
}

pub fn run(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Scan(a) => cmd_scan(a),
    }
}
