//! Named checks with measured values, bounds and verdicts.

use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerificationReport {
    pub title: String,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

pub const CSV_HEADER: &str = "report,check,measured,bound,margin,pass,detail";

impl VerificationReport {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    /// Record `measured <= bound`.
    pub fn check_le(&mut self, name: impl Into<String>, measured: f64, bound: f64, detail: impl Into<String>) {
        self.push(Check {
            name: name.into(),
            measured,
            bound,
            pass: measured <= bound,
            detail: detail.into(),
        });
    }

    /// Record `measured >= bound`.
    pub fn check_ge(&mut self, name: impl Into<String>, measured: f64, bound: f64, detail: impl Into<String>) {
        self.push(Check {
            name: name.into(),
            measured,
            bound,
            pass: measured >= bound,
            detail: detail.into(),
        });
    }

    pub fn check_bool(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.push(Check {
            name: name.into(),
            measured: if ok { 1.0 } else { 0.0 },
            bound: 1.0,
            pass: ok,
            detail: detail.into(),
        });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn extend(&mut self, other: VerificationReport) {
        for mut c in other.checks {
            if !other.title.is_empty() {
                c.name = format!("{}/{}", other.title, c.name);
            }
            self.checks.push(c);
        }
        self.notes.extend(other.notes);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// CSV rows (no header). Floats use a fixed exponent format so output is
    /// byte-stable for identical inputs.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                csv_field(&self.title),
                csv_field(&c.name),
                fmt_f64(c.measured),
                fmt_f64(c.bound),
                fmt_f64(margin(c)),
                c.pass,
                csv_field(&c.detail)
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}", self.csv_rows())
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let passed = self.checks.iter().filter(|c| c.pass).count();
        let _ = writeln!(out, "== {} ({}/{} passed)", self.title, passed, self.checks.len());
        for c in &self.checks {
            let _ = writeln!(
                out,
                "  [{}] {:<40} measured {:>13} bound {:>13}  {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                fmt_f64(c.measured),
                fmt_f64(c.bound),
                c.detail
            );
        }
        for n in &self.notes {
            let _ = writeln!(out, "  note: {n}");
        }
        out
    }
}

/// Relative slack `(bound - measured)/|bound|` for upper bounds; sign-flipped
/// reading is left to the detail text for lower bounds.
pub fn margin(c: &Check) -> f64 {
    if c.bound == 0.0 || !c.bound.is_finite() {
        c.bound - c.measured
    } else {
        (c.bound - c.measured) / c.bound.abs()
    }
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.9e}")
    }
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
