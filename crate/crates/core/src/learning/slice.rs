use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{CellIndex, ClassifierTable, LearningError};
use crate::dynamics::EquilibriumIndex;

/// A 2-D plane through the table: two free dimensions, the rest pinned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlicePlane {
    /// Zero-based dimensions spanning the plane (rows, columns).
    pub free: [usize; 2],
    /// One value per dimension; entries at the free dimensions are ignored.
    pub fixed: Vec<f64>,
}

/// Labels of the cells cut by a [`SlicePlane`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachableSlice {
    pub free: [usize; 2],
    /// Cell of the pinned point; the free entries are set to 1.
    pub anchor: CellIndex,
    pub rows: u32,
    pub cols: u32,
    /// Cell-center coordinates along the row and column dimensions.
    pub row_centers: Vec<f64>,
    pub col_centers: Vec<f64>,
    /// Row-major labels.
    pub labels: Vec<u8>,
}

impl ReachableSlice {
    /// Label at one-based `(row, col)`.
    pub fn label(&self, row: u32, col: u32) -> EquilibriumIndex {
        let nu = self.labels[((row - 1) * self.cols + (col - 1)) as usize];
        EquilibriumIndex::new(nu).expect("labels come from a validated table")
    }

    /// Number of slice cells in the quantized reachable set of `nu`.
    pub fn count(&self, nu: EquilibriumIndex) -> usize {
        self.labels.iter().filter(|&&l| l == nu.value()).count()
    }

    /// Long-format CSV: `row, col, y_row, y_col, nu`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), LearningError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["row", "col", "y_row", "y_col", "nu"]).map_err(csv_err)?;
        for r in 1..=self.rows {
            for c in 1..=self.cols {
                w.write_record([
                    r.to_string(),
                    c.to_string(),
                    self.row_centers[(r - 1) as usize].to_string(),
                    self.col_centers[(c - 1) as usize].to_string(),
                    self.label(r, c).to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> LearningError {
    LearningError::Io(std::io::Error::other(e))
}

pub fn reachable_slice(table: &ClassifierTable, plane: &SlicePlane) -> Result<ReachableSlice, LearningError> {
    let g = table.grid();
    let dim = g.dim();
    let [a, b] = plane.free;
    if a >= dim || b >= dim || a == b {
        return Err(LearningError::InvalidPlane(format!("free dimensions {a} and {b} in a {dim}-D grid")));
    }
    if plane.fixed.len() != dim {
        return Err(LearningError::InvalidPlane(format!("{} fixed values for {dim} dimensions", plane.fixed.len())));
    }
    let mut probe = plane.fixed.clone();
    probe[a] = g.bounds()[a][0];
    probe[b] = g.bounds()[b][0];
    for (j, &v) in probe.iter().enumerate() {
        let [lo, hi] = g.bounds()[j];
        if !(v >= lo && v <= hi) {
            return Err(LearningError::FixedOutOfRange { dim: j, value: v, bounds: [lo, hi] });
        }
    }
    let anchor = g.cell_of(&probe).expect("probe checked inside the box");

    let (rows, cols) = (g.resolution()[a], g.resolution()[b]);
    let mut labels = Vec::with_capacity((rows * cols) as usize);
    let mut idx = anchor.clone();
    for r in 1..=rows {
        for c in 1..=cols {
            idx.0[a] = r;
            idx.0[b] = c;
            labels.push(table.label(&idx)?.value());
        }
    }
    let centers = |j: usize, m: u32| -> Vec<f64> {
        let [lo, _] = g.bounds()[j];
        (1..=m).map(|k| lo + (k as f64 - 0.5) * g.cell_width(j)).collect()
    };
    Ok(ReachableSlice {
        free: plane.free,
        anchor,
        rows,
        cols,
        row_centers: centers(a, rows),
        col_centers: centers(b, cols),
        labels,
    })
}
