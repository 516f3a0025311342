//! Stage drivers behind the `multiphoton` command line.
//!
//! Every command validates the whole configuration first, runs on a rayon
//! pool of `run.workers` threads and writes its artifacts into `run.out_dir`.
//! Outputs carry no wall-clock data, so reruns are byte-identical.

mod commands;
mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use commands::{cmd_ghz, cmd_pipeline, cmd_protect, cmd_sweep, cmd_swap, run_command, Command, StateDump};
pub use config::{
    GhzSection, OutputFormat, PipelineConfig, ProtectSection, RunSection, SwapSection, SweepSection, Unit, ENV_PREFIX,
};

use crate::photon_swap::ComparisonReport;
use crate::spin_register::TimingReport;

pub const SCHEMA: &str = "multiphoton.run/v1";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("numerical non-convergence in {stage}: {message}")]
    NonConvergence { stage: String, message: String },
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl PipelineError {
    pub fn stage(stage: &str, e: impl std::fmt::Display) -> Self {
        Self::Stage { stage: stage.into(), message: e.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::NonConvergence { .. } => 3,
            Self::Stage { .. } | Self::Io { .. } => 4,
        }
    }

    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> String {
        let (kind, messages) = match self {
            Self::Config(v) => ("config", v.clone()),
            Self::NonConvergence { stage, message } => ("nonconvergence", vec![format!("{stage}: {message}")]),
            Self::Stage { stage, message } => ("stage", vec![format!("{stage}: {message}")]),
            Self::Io { path, message } => ("io", vec![format!("{}: {message}", path.display())]),
        };
        serde_json::json!({ "error": kind, "exit_code": self.exit_code(), "messages": messages }).to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub stage: String,
    pub fidelities: BTreeMap<String, f64>,
    pub timing: Option<TimingReport>,
    pub heralds: BTreeMap<String, f64>,
    pub discrepancies: Vec<ComparisonReport>,
    /// Stage-specific figures (counts, comparisons, table extrema).
    pub details: BTreeMap<String, serde_json::Value>,
    /// The run configuration without `run.workers`, which never changes results.
    pub config: PipelineConfig,
}

impl RunReport {
    pub fn new(stage: &str, config: &PipelineConfig) -> Self {
        let mut config = config.clone();
        config.run.workers = None;
        Self {
            schema: SCHEMA.into(),
            stage: stage.into(),
            fidelities: BTreeMap::new(),
            timing: None,
            heralds: BTreeMap::new(),
            discrepancies: Vec::new(),
            details: BTreeMap::new(),
            config,
        }
    }

    pub fn fidelity(&mut self, name: &str, value: f64) -> Result<(), PipelineError> {
        if !(0.0..=1.0 + 1e-12).contains(&value) {
            return Err(PipelineError::stage(&self.stage, format!("fidelity {name} = {value} outside [0, 1]")));
        }
        self.fidelities.insert(name.into(), value.min(1.0));
        Ok(())
    }

    pub fn detail(&mut self, name: &str, value: impl Serialize) {
        self.details.insert(name.into(), serde_json::to_value(value).expect("detail serializes"));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
