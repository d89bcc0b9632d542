//! Reporting helpers for the acceptance suite.

use std::time::{Duration, Instant};

/// Result of one acceptance criterion.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "C{:<2} {}  {}  [{:.1}s] {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

/// Runs `check`, which returns the verdict and a one-line summary of the
/// measured values; errors count as failures.
pub fn criterion<F>(id: u32, title: &'static str, check: F) -> Outcome
where
    F: FnOnce() -> Result<(bool, String), String>,
{
    let start = Instant::now();
    let (pass, detail) = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(check)) {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => (false, format!("error: {e}")),
        Err(_) => (false, "panicked".to_string()),
    };
    Outcome { id, title, pass, detail, elapsed: start.elapsed() }
}

/// Appends "all of" semantics to a list of named sub-checks.
#[derive(Default)]
pub struct Checks {
    parts: Vec<(bool, String)>,
}

impl Checks {
    pub fn add(&mut self, ok: bool, text: impl Into<String>) -> &mut Self {
        self.parts.push((ok, text.into()));
        self
    }

    pub fn finish(self) -> Result<(bool, String), String> {
        let pass = self.parts.iter().all(|p| p.0);
        let text = self
            .parts
            .iter()
            .map(|(ok, t)| if *ok { t.clone() } else { format!("{t} <- fails") })
            .collect::<Vec<_>>()
            .join("; ");
        Ok((pass, text))
    }
}
