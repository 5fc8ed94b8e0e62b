//! Independent auditing of synthesized or published certificates.

pub mod certificate;
pub mod containment;
pub mod qp;
pub mod simulate;
pub mod sup;

use std::fmt;

pub use certificate::{check_certificate, invariance_matrix};
pub use containment::{ellipsoid_boundary_oracle, initial_set_oracle, unsafe_set_oracle, OracleOutcome};
pub use qp::{cbf_qp_reference, level_set_scan, pathology_scan, Axis, Slice};
pub use simulate::{simulate_closed_loop, Trajectory};
pub use sup::{sup_affine_norm_sq, sup_input, InputSup};

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// Eigenvalue slack, relative to the matrix 2-norm, for own certificates.
    pub psd_tol: f64,
    /// The same slack for published, rounded certificates.
    pub paper_cert_tol: f64,
    /// Use `paper_cert_tol` instead of `psd_tol`.
    pub paper: bool,
    pub sample_count: usize,
    pub dt: f64,
    /// Base seed; each sampled check derives its own from its name.
    pub seed: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            psd_tol: 1e-6,
            paper_cert_tol: 1e-2,
            paper: false,
            sample_count: 10_000,
            dt: 1e-3,
            seed: 0,
        }
    }
}

impl Tolerances {
    pub fn paper() -> Self {
        Tolerances {
            paper: true,
            ..Default::default()
        }
    }

    /// The slack in force.
    pub fn active(&self) -> f64 {
        if self.paper {
            self.paper_cert_tol
        } else {
            self.psd_tol
        }
    }

    /// Seed for the check called `name` (FNV-1a of the name mixed with the base).
    pub fn seed_for(&self, name: &str) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in name.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h ^ self.seed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// The condition audited, in words.
    pub condition: String,
    pub passed: bool,
    /// Signed slack: nonnegative means satisfied without tolerance.
    pub margin: f64,
    pub mandatory: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CertificateReport {
    /// Sorted by name.
    pub checks: Vec<Check>,
    pub tolerance: f64,
    pub seed: u64,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed || !c.mandatory)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.mandatory && !c.passed)
    }

    /// `check.<name> = pass|fail|info <margin>` lines, one per check.
    pub fn to_kv(&self) -> String {
        let mut out = format!("report.tolerance = {:.16e}\nreport.seed = {}\n", self.tolerance, self.seed);
        for c in &self.checks {
            let status = match (c.mandatory, c.passed) {
                (false, _) => "info",
                (true, true) => "pass",
                (true, false) => "fail",
            };
            out.push_str(&format!("check.{} = {status} {:.16e}\n", c.name, c.margin));
        }
        out.push_str(&format!("report.passed = {}\n", self.passed()));
        out
    }
}

impl fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let status = match (c.mandatory, c.passed) {
                (false, _) => "INFO",
                (true, true) => "PASS",
                (true, false) => "FAIL",
            };
            write!(f, "{status}  {:<width$}  margin {:+.6e}  {}", c.name, c.margin, c.condition)?;
            if !c.detail.is_empty() {
                write!(f, " ({})", c.detail)?;
            }
            writeln!(f)?;
        }
        write!(
            f,
            "{} (tolerance {:.1e}, seed {})",
            if self.passed() { "certificate verified" } else { "certificate REJECTED" },
            self.tolerance,
            self.seed
        )
    }
}
