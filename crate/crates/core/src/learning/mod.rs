//! Offline learning, storage and lookup of the quantized reachable-set classifier.

mod grid;
mod learn;
mod persist;
mod slice;
mod table;

use std::path::Path;

pub use grid::{CellIndex, GridSpec};
pub use learn::{label_cell, label_measurement, learn_table, CellLabel, LearnReport, LearnSpec};
pub use persist::{load_table, load_table_file, read_table, save_table, save_table_file, TABLE_MAGIC};
pub use slice::{reachable_slice, ReachableSlice, SlicePlane};
pub use table::{quantized_classify, ClassifierTable, Provenance, TABLE_FORMAT_VERSION};

use crate::control::{ControlError, MeasurementMode};
use crate::dynamics::DynamicsError;

#[derive(Debug, thiserror::Error)]
pub enum LearningError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("cell index {index} outside resolution {resolution:?}")]
    IndexOutOfRange { index: CellIndex, resolution: Vec<u32> },
    #[error("linear cell index {index} outside a grid of {cells} cells")]
    LinearIndexOutOfRange { index: usize, cells: usize },
    #[error("{grid_dim}-D grid cannot hold {mode} measurements")]
    ModeMismatch { grid_dim: usize, mode: MeasurementMode },
    #[error("expected {expected} labels, got {got}")]
    LabelCount { expected: usize, got: usize },
    #[error("label {label} at cell {position} is not an equilibrium index")]
    InvalidLabel { position: usize, label: u8 },
    #[error("not a table file (magic {found:?})")]
    BadMagic { found: [u8; 8] },
    #[error("truncated table file: {what} needs {expected} bytes, found {got}")]
    Truncated { what: &'static str, expected: usize, got: usize },
    #[error("table file has bytes after the label payload")]
    TrailingBytes,
    #[error("unknown table format version {0}")]
    UnknownVersion(String),
    #[error("malformed table header: {0}")]
    Header(String),
    #[error("table was learned with parameter digest {found}, but the current parameters have digest {expected}")]
    DigestMismatch { expected: String, found: String },
    #[error("slice plane: {0}")]
    InvalidPlane(String),
    #[error("fixed value {value} for dimension {dim} outside {bounds:?}")]
    FixedOutOfRange { dim: usize, value: f64, bounds: [f64; 2] },
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LearningError {
    pub(crate) fn file(path: &Path, source: std::io::Error) -> Self {
        Self::File { path: path.display().to_string(), source }
    }
}
