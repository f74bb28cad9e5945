//! Batch front end.

pub mod config;
pub mod run;

use std::fmt::Write as _;

use thiserror::Error;

pub use config::{Job, JobConfig, Suite};
pub use run::{run, write, Outcome, Report, Status};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("run error: {0}")]
    Run(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// One screen summary of a job: shape, periodic counts and table coverage.
pub fn describe(job: &Job) -> String {
    let m = &job.matrix;
    let g = &job.generator;
    let cfg = &job.config;
    let suites: Vec<&str> = cfg.suites.iter().map(|s| s.name()).collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} symbols, depth {}, β={}, ν={}, suites: {}",
        m.symbol_count(),
        g.depth(),
        g.beta(),
        job.metric.nu(),
        suites.join(", ")
    );
    let _ = writeln!(out, "dimension {}", g.dim());
    let traces: Vec<String> = (1..=6).map(|k| format!("{k}:{}", m.trace_power(k))).collect();
    let _ = writeln!(out, "periodic points trace(M^k): {}", traces.join(" "));
    let words = m.count_words(g.window_len());
    let _ = writeln!(out, "words of length {}: {} admissible, {} in the table", g.window_len(), words, g.entries().len());
    out
}
