//! Bookkeeping for the acceptance suite in `tests/acceptance.rs`.
//!
//! Each criterion collects named sub-checks; a criterion passes when every
//! sub-check passes and it finishes within its time budget.

use std::time::Instant;

/// One pass/fail sub-check with a human-readable description.
#[derive(Clone, Debug, PartialEq)]
pub struct SubCheck {
    pub name: String,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub id: u32,
    pub title: String,
    pub checks: Vec<SubCheck>,
    pub seconds: f64,
    pub budget_seconds: f64,
    pub error: Option<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.seconds <= self.budget_seconds && self.checks.iter().all(|c| c.passed)
    }

    /// `PASS criterion 3 (...)` or `FAIL criterion 3 (...)`, followed by the
    /// sub-check lines.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{} criterion {} ({}) in {:.1}s of {:.0}s",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds,
            self.budget_seconds
        );
        for c in &self.checks {
            out.push_str(&format!("\n    [{}] {}", if c.passed { "ok" } else { "xx" }, c.name));
        }
        if let Some(e) = &self.error {
            out.push_str(&format!("\n    error: {e}"));
        }
        out
    }
}

/// Collects sub-checks for one criterion.
#[derive(Default)]
pub struct Checks(Vec<SubCheck>);

impl Checks {
    pub fn record(&mut self, name: impl Into<String>, passed: bool) {
        self.0.push(SubCheck {
            name: name.into(),
            passed,
        });
    }

    /// `value < bound`
    pub fn below(&mut self, name: &str, value: f64, bound: f64) {
        self.record(format!("{name}: {value:.5} < {bound}"), value < bound);
    }
}

/// Run `body`, timing it against `budget_seconds`.
pub fn run<E: std::fmt::Display>(
    id: u32,
    title: &str,
    budget_seconds: f64,
    body: impl FnOnce(&mut Checks) -> Result<(), E>,
) -> Outcome {
    let start = Instant::now();
    let mut checks = Checks::default();
    let error = body(&mut checks).err().map(|e| e.to_string());
    Outcome {
        id,
        title: title.to_string(),
        checks: checks.0,
        seconds: start.elapsed().as_secs_f64(),
        budget_seconds,
        error,
    }
}
