//! Benchmark generation, NLU accuracy evaluation, scripted system trials and
//! their metrics.

pub mod eval;
pub mod generate;
pub mod metrics;
pub mod trials;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{evaluate_backend, evaluate_runs, AccuracyTable, Field};
pub use generate::{generate_benchmark, BenchmarkInstruction, Family, TemplateManifest};
pub use metrics::{compute_metrics, Metrics};
pub use trials::{run_trials, score_trial, TrialLog, TrialScript};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{family}: manifest declares {declared} instructions but expands to {generated}")]
    ManifestCountMismatch { family: &'static str, declared: usize, generated: usize },
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("cannot parse manifest: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

impl BenchError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.as_ref().to_path_buf(), source }
    }
}

/// The two system-trial scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Scenario {
    /// Fetch a cup, then replace it with a bowl mid-plan.
    ReplaceCup,
    /// Set the breakfast table, add a cup, then stop.
    BreakfastStop,
}

impl TryFrom<u8> for Scenario {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(Scenario::ReplaceCup),
            2 => Ok(Scenario::BreakfastStop),
            _ => Err(format!("scenario must be 1 or 2, got {v}")),
        }
    }
}

impl From<Scenario> for u8 {
    fn from(s: Scenario) -> u8 {
        match s {
            Scenario::ReplaceCup => 1,
            Scenario::BreakfastStop => 2,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// Mean and sample standard deviation (n - 1 denominator; 0 below two values).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, sd }
    }
}
