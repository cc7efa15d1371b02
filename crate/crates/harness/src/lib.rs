//! Experiment runner for data-driven set-theoretic MPC: simulates the true
//! plant, drives the offline and online pipeline of `rosc-core`, and writes
//! reports and set files.

// `!(a <= b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod audit;
pub mod cli;
pub mod config;
pub mod experiment;
pub mod json;
pub mod plant;

pub use config::{ExperimentConfig, Plant, PlantConfig};
pub use experiment::{run_experiment, Experiment, ExperimentReport};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{stage} failed: {message}")]
    Pipeline { stage: &'static str, message: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] rosc_core::Error),
}

impl HarnessError {
    /// 2 for configuration problems, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}
