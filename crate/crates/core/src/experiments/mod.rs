//! Impulse-response sweeps, delay scans and two-agent competitions, with
//! success-rate bookkeeping and result export.

mod export;
mod sweep;

pub use export::{export_delay_scan, export_results, import_json, write_trajectory, ExportFormat, N0_NOTE};
pub use sweep::{
    competition_config, competition_run, delay_scan, impulse_response_sweep, run_trial, AgentScore, Aggregates,
    ControllerEcho, ControllerSpec, DelayPoint, DelayScan, DisturbanceSide, SuccessRate, SweepConfig, SweepEcho,
    SweepResult, TrialRecord,
};

use crate::control::{ControlError, Side};
use crate::dynamics::{DynamicsError, SimError};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "table for agent {agent}{} was learned with parameter digest {found}, but the current parameters have digest {expected}",
        path.as_ref().map(|s| format!(" ({s})")).unwrap_or_default()
    )]
    TableDigest { agent: usize, path: Option<String>, expected: String, found: String },
    #[error("trial Q = {q} on {side:?}: {source}")]
    Simulation { q: f64, side: Side, source: SimError },
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("export: {0}")]
    Export(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
