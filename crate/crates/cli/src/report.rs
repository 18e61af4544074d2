use num_complex::Complex64;
use sha2::{Digest, Sha256};
use std::fmt::Write;

pub const SCHEMA: &str = "statphase-report/1";

/// Exit statuses, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass = 0,
    CheckFailed = 1,
    InputError = 2,
    Inconclusive = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::CheckFailed => "check failed",
            Status::InputError => "input error",
            Status::Inconclusive => "inconclusive",
        }
    }
}

pub fn status_of(e: &statphase::Error) -> Status {
    use statphase::Error::*;
    match e {
        OracleNonConvergence { .. } | Inconclusive(_) => Status::Inconclusive,
        Schema { .. } | Arity { .. } | RankDeficient { .. } | NonPositiveDensity { .. } | GaugeResidual { .. } | Cocycle(_)
        | SeedOutsideWindow(_) | Dimension(_) | Unbounded | BaseMismatch(_) | Complex(_) | MissingStars | NoBoundary
        | Compatibility(_) | StarIncompatible(_) | CapExceeded { .. } => Status::InputError,
        _ => Status::CheckFailed,
    }
}

pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn cnum(z: Complex64) -> String {
    format!("{:.12e} {:+.12e}i", z.re, z.im)
}

pub fn list(xs: &[f64]) -> String {
    xs.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ")
}

/// Line-oriented report. Everything is formatted at fixed precision so
/// identical inputs give identical bytes.
pub struct Report {
    body: String,
    status: Status,
    failures: Vec<String>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut body = String::new();
        writeln!(body, "# {SCHEMA}").unwrap();
        writeln!(body, "command: {command}").unwrap();
        Report { body, status: Status::Pass, failures: Vec::new() }
    }

    pub fn input(&mut self, label: &str, path: &str, bytes: &[u8]) {
        let hash = Sha256::digest(bytes);
        let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
        self.line(&format!("input {label}: {path}"));
        self.line(&format!("input {label} sha256: {hex}"));
    }

    pub fn line(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        self.line(&format!("{key}: {value}"));
    }

    pub fn section(&mut self, name: &str) {
        self.line("");
        self.line(&format!("[{name}]"));
    }

    pub fn check(&mut self, name: &str, residual: f64, tol: f64) -> bool {
        let pass = residual <= tol;
        let tag = if pass { "PASS" } else { "FAIL" };
        self.line(&format!("check {tag} {name}: residual {} tolerance {}", num(residual), num(tol)));
        if !pass {
            self.fail(Status::CheckFailed, name);
        }
        pass
    }

    pub fn fail(&mut self, status: Status, what: &str) {
        self.status = self.status.max(status);
        self.failures.push(what.to_string());
    }

    pub fn error(&mut self, e: &statphase::Error) {
        let st = status_of(e);
        self.line(&format!("error ({}): {e}", st.label()));
        self.fail(st, &e.to_string());
    }

    pub fn finish(mut self) -> (String, Status) {
        self.line("");
        self.kv("status", self.status.label());
        for f in std::mem::take(&mut self.failures) {
            self.line(&format!("failed: {f}"));
        }
        (self.body, self.status)
    }
}
