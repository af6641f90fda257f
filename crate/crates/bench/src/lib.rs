//! Configuration-driven Monte Carlo runner for TDFS experiments.
//!
//! Trials run in parallel but are reduced in trial-index order, and every
//! trial's randomness is derived from `(seed, trial index)` alone, so the CSVs
//! are byte-identical for any worker count.

pub mod config;
pub mod runner;

use std::path::PathBuf;

pub use config::{load_config, parse_config, ExperimentConfig, Issue};
pub use runner::{run_experiment, run_sweep, ExperimentReport, SweepParam, SweepRow};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Issue>),
    #[error(transparent)]
    Model(#[from] decbandit::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl BenchError {
    pub(crate) fn invalid(key: &str, message: &str) -> Self {
        Self::Invalid(vec![Issue {
            key: key.into(),
            message: message.into(),
        }])
    }

    /// 2 for anything wrong with the inputs, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse(_) | Self::Invalid(_) => 2,
            Self::Model(e) => match e {
                decbandit::Error::Validation(_)
                | decbandit::Error::Config(_)
                | decbandit::Error::ParameterDomain { .. }
                | decbandit::Error::FamilyConstant(_) => 2,
                _ => 1,
            },
            Self::Io { .. } | Self::Runtime(_) => 1,
        }
    }
}
