use serde::{Deserialize, Serialize};

use super::{CellIndex, GridSpec, LearningError};
use crate::control::{measure, ImpulseParams, MeasurementMap, MeasurementMode};
use crate::dynamics::{EquilibriumIndex, SimSettings, StateVector};

/// Current version of the table file format.
pub const TABLE_FORMAT_VERSION: u32 = 1;

/// How a table was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    /// Digest of the [`crate::CipParams`] used for learning.
    pub param_digest: String,
    /// The single learning impulse applied to agent 1 at `t = 0`.
    pub impulse: ImpulseParams,
    pub settings: SimSettings,
    pub version: u32,
}

impl Provenance {
    /// Placeholder for hand-built tables.
    pub fn unspecified() -> Self {
        Self {
            param_digest: String::new(),
            impulse: ImpulseParams::with_step(0.0, SimSettings::default().dt),
            settings: SimSettings::default(),
            version: TABLE_FORMAT_VERSION,
        }
    }
}

/// Quantized classifier: one equilibrium label per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierTable {
    grid: GridSpec,
    mode: MeasurementMode,
    labels: Vec<u8>,
    provenance: Provenance,
}

impl ClassifierTable {
    pub fn new(
        grid: GridSpec,
        mode: MeasurementMode,
        labels: Vec<u8>,
        provenance: Provenance,
    ) -> Result<Self, LearningError> {
        if grid.dim() != mode.dim() {
            return Err(LearningError::ModeMismatch { grid_dim: grid.dim(), mode });
        }
        if labels.len() != grid.cell_count() {
            return Err(LearningError::LabelCount { expected: grid.cell_count(), got: labels.len() });
        }
        if let Some(pos) = labels.iter().position(|&l| l > 9) {
            return Err(LearningError::InvalidLabel { position: pos, label: labels[pos] });
        }
        Ok(Self { grid, mode, labels, provenance })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn mode(&self) -> MeasurementMode {
        self.mode
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn label(&self, i: &CellIndex) -> Result<EquilibriumIndex, LearningError> {
        let l = self.grid.linear_index(i)?;
        Ok(label_at(&self.labels, l))
    }

    /// Label of the cell containing `y`, or `None` outside the box.
    pub fn classify_measurement(&self, y: &[f64]) -> Option<EquilibriumIndex> {
        self.grid.linear_cell_of(y).map(|l| label_at(&self.labels, l))
    }

    /// Label of the cell containing the measurement of `s`, or `None` outside the box.
    pub fn classify(&self, s: &StateVector) -> Option<EquilibriumIndex> {
        self.classify_measurement(measure(s, self.mode).as_slice())
    }

    /// Number of cells carrying each label `0..=9`.
    pub fn histogram(&self) -> [usize; 10] {
        let mut h = [0; 10];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }
}

fn label_at(labels: &[u8], l: usize) -> EquilibriumIndex {
    EquilibriumIndex::new(labels[l]).expect("labels validated on construction")
}

/// Table lookup of the measured state; `UNCLASSIFIED` outside the box or when
/// `m` measures a different dimension than the table was learned in.
pub fn quantized_classify(s: &StateVector, table: &ClassifierTable, m: &MeasurementMap) -> EquilibriumIndex {
    if m.mode != table.mode() {
        return EquilibriumIndex::UNCLASSIFIED;
    }
    table.classify(s).unwrap_or(EquilibriumIndex::UNCLASSIFIED)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ClassifierTable {
        let g = GridSpec::reference(3);
        let labels = (0..81).map(|k| (k % 10) as u8).collect();
        ClassifierTable::new(g, MeasurementMode::FourDim, labels, Provenance::unspecified()).unwrap()
    }

    #[test]
    fn center_state_gets_its_label() {
        let t = table();
        let map = MeasurementMap::four_dim(1.0, 0.3);
        for i in t.grid().cells() {
            let y = t.grid().cell_center(&i).unwrap();
            let s = map.reconstruct(&y).unwrap();
            assert_eq!(quantized_classify(&s, &t, &map), t.label(&i).unwrap());
        }
    }

    #[test]
    fn outside_is_unclassified() {
        let t = table();
        let map = MeasurementMap::four_dim(1.0, 0.3);
        let mut s = StateVector::trivial(1.0);
        s.agents[1].omega = 6.0;
        assert_eq!(t.classify(&s), None);
        assert_eq!(quantized_classify(&s, &t, &map), EquilibriumIndex::UNCLASSIFIED);
        let six = MeasurementMap::six_dim(1.0, 0.3);
        assert_eq!(quantized_classify(&StateVector::trivial(1.0), &t, &six), EquilibriumIndex::UNCLASSIFIED);
    }

    #[test]
    fn same_cell_same_label() {
        let t = table();
        let mut a = StateVector::trivial(1.0);
        let mut b = a;
        a.agents[0].theta = 0.01;
        b.agents[0].theta = 0.02;
        b.agents[1].x = 7.0;
        assert_eq!(t.classify(&a), t.classify(&b));
    }

    #[test]
    fn construction_checks() {
        let g = GridSpec::reference(2);
        let p = Provenance::unspecified;
        assert!(ClassifierTable::new(g.clone(), MeasurementMode::FourDim, vec![1; 15], p()).is_err());
        assert!(ClassifierTable::new(g.clone(), MeasurementMode::FourDim, vec![10; 16], p()).is_err());
        assert!(ClassifierTable::new(g.clone(), MeasurementMode::SixDim, vec![1; 16], p()).is_err());
        let t = ClassifierTable::new(g, MeasurementMode::FourDim, vec![1; 16], p()).unwrap();
        assert_eq!(t.histogram()[1], 16);
    }
}
