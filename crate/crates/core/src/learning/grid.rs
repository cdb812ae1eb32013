use std::fmt;

use serde::{Deserialize, Serialize};

use super::LearningError;
use crate::control::Measurement;

/// Uniform grid over the measurement box `D = [a_1, b_1] x ... x [a_M, b_M]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridSpec {
    bounds: Vec<[f64; 2]>,
    resolution: Vec<u32>,
    strides: Vec<usize>,
    cells: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    bounds: Vec<[f64; 2]>,
    resolution: Vec<u32>,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = LearningError;

    fn try_from(r: RawGrid) -> Result<Self, Self::Error> {
        GridSpec::new(r.bounds, r.resolution)
    }
}

impl From<GridSpec> for RawGrid {
    fn from(g: GridSpec) -> Self {
        RawGrid { bounds: g.bounds, resolution: g.resolution }
    }
}

impl GridSpec {
    /// Measurement region of the four-dimensional controller:
    /// `[-0.13, 0.43] x [-3.28, 10.58] x [-0.35, 0.31] x [-3.80, 5.15]`.
    pub const REFERENCE_DOMAIN: [[f64; 2]; 4] = [[-0.13, 0.43], [-3.28, 10.58], [-0.35, 0.31], [-3.80, 5.15]];

    pub fn new(bounds: Vec<[f64; 2]>, resolution: Vec<u32>) -> Result<Self, LearningError> {
        let dim = bounds.len();
        if dim != 4 && dim != 6 {
            return Err(LearningError::InvalidGrid(format!("dimension must be 4 or 6, got {dim}")));
        }
        if resolution.len() != dim {
            return Err(LearningError::InvalidGrid(format!(
                "{} resolutions for {dim} dimensions",
                resolution.len()
            )));
        }
        for (j, [a, b]) in bounds.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(LearningError::InvalidGrid(format!("dimension {}: need a < b, got [{a}, {b}]", j + 1)));
            }
        }
        if let Some(j) = resolution.iter().position(|&m| m == 0) {
            return Err(LearningError::InvalidGrid(format!("dimension {}: resolution must be >= 1", j + 1)));
        }
        let mut strides = vec![1usize; dim];
        let mut cells = 1usize;
        for j in (0..dim).rev() {
            strides[j] = cells;
            cells = cells
                .checked_mul(resolution[j] as usize)
                .filter(|&c| c <= isize::MAX as usize)
                .ok_or_else(|| LearningError::InvalidGrid("cell count overflows the address space".into()))?;
        }
        Ok(Self { bounds, resolution, strides, cells })
    }

    /// Same resolution `m` in every dimension.
    pub fn uniform(bounds: Vec<[f64; 2]>, m: u32) -> Result<Self, LearningError> {
        let dim = bounds.len();
        Self::new(bounds, vec![m; dim])
    }

    /// [`Self::REFERENCE_DOMAIN`] at resolution `m`.
    pub fn reference(m: u32) -> Self {
        Self::uniform(Self::REFERENCE_DOMAIN.to_vec(), m).expect("reference domain is a valid grid")
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn resolution(&self) -> &[u32] {
        &self.resolution
    }

    pub fn cell_count(&self) -> usize {
        self.cells
    }

    /// Edge length of a cell along dimension `j`.
    pub fn cell_width(&self, j: usize) -> f64 {
        let [a, b] = self.bounds[j];
        (b - a) / self.resolution[j] as f64
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim() && y.iter().zip(&self.bounds).all(|(&v, &[a, b])| v >= a && v <= b)
    }

    pub fn check(&self, i: &CellIndex) -> Result<(), LearningError> {
        let ok = i.0.len() == self.dim() && i.0.iter().zip(&self.resolution).all(|(&k, &m)| k >= 1 && k <= m);
        if ok {
            Ok(())
        } else {
            Err(LearningError::IndexOutOfRange { index: i.clone(), resolution: self.resolution.clone() })
        }
    }

    /// Row-major position of `i`, last dimension fastest.
    pub fn linear_index(&self, i: &CellIndex) -> Result<usize, LearningError> {
        self.check(i)?;
        Ok(i.0.iter().zip(&self.strides).map(|(&k, &s)| (k as usize - 1) * s).sum())
    }

    pub fn cell_at(&self, linear: usize) -> Result<CellIndex, LearningError> {
        if linear >= self.cells {
            return Err(LearningError::LinearIndexOutOfRange { index: linear, cells: self.cells });
        }
        let mut rest = linear;
        let idx = self
            .strides
            .iter()
            .map(|&s| {
                let k = rest / s;
                rest %= s;
                k as u32 + 1
            })
            .collect();
        Ok(CellIndex(idx))
    }

    pub fn cell_center(&self, i: &CellIndex) -> Result<Measurement, LearningError> {
        self.check(i)?;
        let mut y = [0.0; 6];
        for (j, &k) in i.0.iter().enumerate() {
            let [a, b] = self.bounds[j];
            y[j] = a + (k as f64 - 0.5) * (b - a) / self.resolution[j] as f64;
        }
        Ok(Measurement::new(&y[..self.dim()]).expect("grid dimension is 4 or 6"))
    }

    /// Cell containing `y`, or `None` outside the box. Interior faces belong to
    /// the higher cell; the upper bound belongs to the last cell.
    pub fn cell_of(&self, y: &[f64]) -> Option<CellIndex> {
        if y.len() != self.dim() {
            return None;
        }
        let mut idx = Vec::with_capacity(self.dim());
        for j in 0..self.dim() {
            idx.push(self.coordinate_cell(j, y[j])?);
        }
        Some(CellIndex(idx))
    }

    /// [`Self::cell_of`] composed with [`Self::linear_index`], without allocating.
    pub fn linear_cell_of(&self, y: &[f64]) -> Option<usize> {
        if y.len() != self.dim() {
            return None;
        }
        let mut linear = 0;
        for j in 0..self.dim() {
            linear += (self.coordinate_cell(j, y[j])? as usize - 1) * self.strides[j];
        }
        Some(linear)
    }

    fn coordinate_cell(&self, j: usize, v: f64) -> Option<u32> {
        let [a, b] = self.bounds[j];
        if !(v >= a && v <= b) {
            return None;
        }
        let m = self.resolution[j];
        let k = ((v - a) * m as f64 / (b - a)).floor() as u32 + 1;
        Some(k.min(m))
    }

    /// All cells in linear order.
    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.cells).map(|l| self.cell_at(l).expect("in range"))
    }
}

/// One-based multi-index of a grid cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex(pub Vec<u32>);

impl CellIndex {
    pub fn new(idx: impl Into<Vec<u32>>) -> Self {
        Self(idx.into())
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (n, k) in self.0.iter().enumerate() {
            if n > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}")?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_center_of_reference_grid() {
        let g = GridSpec::reference(50);
        let y = g.cell_center(&CellIndex::new([1, 1, 1, 1])).unwrap();
        assert!((y.as_slice()[0] - (-0.13 + 0.5 * 0.56 / 50.0)).abs() < 1e-15);
        assert!((y.as_slice()[0] + 0.1244).abs() < 1e-12);
    }

    #[test]
    fn single_cell_center_is_midpoint() {
        let g = GridSpec::reference(1);
        let y = g.cell_center(&CellIndex::new([1, 1, 1, 1])).unwrap();
        for (v, [a, b]) in y.as_slice().iter().zip(GridSpec::REFERENCE_DOMAIN) {
            assert!((v - (a + b) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn neighbouring_centers_are_one_width_apart() {
        let g = GridSpec::reference(7);
        for j in 0..4 {
            let mut lo = vec![3u32; 4];
            let mut hi = lo.clone();
            lo[j] = 2;
            hi[j] = 3;
            let a = g.cell_center(&CellIndex(lo)).unwrap();
            let b = g.cell_center(&CellIndex(hi)).unwrap();
            assert!((b.as_slice()[j] - a.as_slice()[j] - g.cell_width(j)).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_convention() {
        let g = GridSpec::reference(10);
        let lower: Vec<f64> = GridSpec::REFERENCE_DOMAIN.iter().map(|b| b[0]).collect();
        let upper: Vec<f64> = GridSpec::REFERENCE_DOMAIN.iter().map(|b| b[1]).collect();
        assert_eq!(g.cell_of(&lower), Some(CellIndex::new([1, 1, 1, 1])));
        assert_eq!(g.cell_of(&upper), Some(CellIndex::new([10, 10, 10, 10])));
        // Interior faces go to the higher cell.
        let exact = GridSpec::uniform(vec![[0.0, 4.0]; 4], 4).unwrap();
        assert_eq!(exact.cell_of(&[1.0, 2.0, 3.0, 0.0]), Some(CellIndex::new([2, 3, 4, 1])));
    }

    #[test]
    fn outside_is_none() {
        let g = GridSpec::reference(10);
        assert_eq!(g.cell_of(&[0.50, 0.0, 0.0, 0.0]), None);
        assert_eq!(g.cell_of(&[f64::NAN, 0.0, 0.0, 0.0]), None);
        assert_eq!(g.cell_of(&[0.0, 0.0, 0.0]), None);
        assert_eq!(g.linear_cell_of(&[0.0, 0.0, -0.36, 0.0]), None);
    }

    #[test]
    fn row_major_last_fastest() {
        let g = GridSpec::new(GridSpec::REFERENCE_DOMAIN.to_vec(), vec![2, 3, 4, 5]).unwrap();
        assert_eq!(g.cell_count(), 120);
        assert_eq!(g.linear_index(&CellIndex::new([1, 1, 1, 2])).unwrap(), 1);
        assert_eq!(g.linear_index(&CellIndex::new([1, 1, 2, 1])).unwrap(), 5);
        assert_eq!(g.linear_index(&CellIndex::new([1, 2, 1, 1])).unwrap(), 20);
        assert_eq!(g.linear_index(&CellIndex::new([2, 1, 1, 1])).unwrap(), 60);
        assert_eq!(g.linear_index(&CellIndex::new([2, 3, 4, 5])).unwrap(), 119);
        assert!(g.linear_index(&CellIndex::new([3, 1, 1, 1])).is_err());
        assert!(g.linear_index(&CellIndex::new([0, 1, 1, 1])).is_err());
        assert!(g.cell_at(120).is_err());
    }

    #[test]
    fn invalid_grids() {
        assert!(GridSpec::uniform(vec![[0.0, 1.0]; 3], 2).is_err());
        assert!(GridSpec::uniform(vec![[1.0, 1.0]; 4], 2).is_err());
        assert!(GridSpec::uniform(vec![[0.0, 1.0]; 4], 0).is_err());
        assert!(GridSpec::new(vec![[0.0, 1.0]; 4], vec![2; 6]).is_err());
        assert!(GridSpec::uniform(vec![[0.0, 1.0]; 6], u32::MAX).is_err());
        assert!(GridSpec::uniform(vec![[0.0, 1.0]; 6], 3).is_ok());
    }

    #[test]
    fn serde_revalidates() {
        let g = GridSpec::reference(3);
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<GridSpec>(&json).unwrap(), g);
        assert!(serde_json::from_str::<GridSpec>(r#"{"bounds":[[0,1]],"resolution":[2]}"#).is_err());
    }

    proptest! {
        #[test]
        fn center_round_trip(m in 1u32..40, seed in proptest::collection::vec(0.0f64..1.0, 4)) {
            let g = GridSpec::reference(m);
            let i = CellIndex(seed.iter().map(|u| 1 + (u * m as f64).floor().min(m as f64 - 1.0) as u32).collect());
            let y = g.cell_center(&i).unwrap();
            prop_assert_eq!(g.cell_of(y.as_slice()), Some(i.clone()));
            prop_assert_eq!(g.linear_cell_of(y.as_slice()), Some(g.linear_index(&i).unwrap()));
            prop_assert_eq!(g.cell_at(g.linear_index(&i).unwrap()).unwrap(), i);
        }

        #[test]
        fn linear_lookup_agrees(y in proptest::array::uniform4(-12.0f64..12.0), m in 1u32..30) {
            let g = GridSpec::reference(m);
            let via_index = g.cell_of(&y).map(|i| g.linear_index(&i).unwrap());
            prop_assert_eq!(g.linear_cell_of(&y), via_index);
        }
    }
}
