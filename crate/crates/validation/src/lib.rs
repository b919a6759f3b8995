//! Reporting helpers for the acceptance run.
//!
//! Each criterion produces one [`Outcome`]; a criterion made of several
//! checks passes only when all of them do.

use std::fmt;
use std::time::{Duration, Instant};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: usize,
    pub title: String,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn new(id: usize, title: &str) -> Self {
        Self {
            id,
            title: title.to_owned(),
            checks: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) -> &mut Self {
        self.checks.push(Check {
            name: name.to_owned(),
            pass,
            detail: detail.into(),
        });
        self
    }

    /// A criterion with no recorded checks, or one that errored, fails.
    pub fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    /// Outcome for a criterion whose run returned an error.
    pub fn errored(id: usize, title: &str, err: &dyn fmt::Display) -> Self {
        let mut o = Self::new(id, title);
        o.check("run", false, format!("error: {err}"));
        o
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{:>2}] {} ({:.1}s)",
            if self.pass() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed.as_secs_f64()
        )?;
        for c in &self.checks {
            write!(f, "\n       {} {}: {}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Runs `body`, times it and turns an error into a failed outcome.
pub fn run_criterion<E: fmt::Display>(
    id: usize,
    title: &str,
    body: impl FnOnce(&mut Outcome) -> Result<(), E>,
) -> Outcome {
    let start = Instant::now();
    let mut o = Outcome::new(id, title);
    if let Err(e) = body(&mut o) {
        o = Outcome::errored(id, title, &e);
    }
    o.elapsed = start.elapsed();
    o
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_needs_every_check() {
        let mut o = Outcome::new(1, "x");
        assert!(!o.pass());
        o.check("a", true, "");
        assert!(o.pass());
        o.check("b", false, "");
        assert!(!o.pass());
        assert!(o.to_string().starts_with("FAIL [ 1] x"));
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1e-2, 5e-3, 2.5e-3];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.3)).collect();
        assert!((log_log_slope(&x, &y) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn errors_become_failures() {
        let o = run_criterion(2, "y", |_| Err::<(), _>("boom"));
        assert!(!o.pass());
        assert!(o.to_string().contains("error: boom"));
    }
}
