use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClassifierTable, GridSpec, LearningError, Provenance, TABLE_FORMAT_VERSION};
use crate::control::{ControlStack, Disturbance, ImpulseParams, Measurement, MeasurementMap, MeasurementMode, Side, StandingControl};
use crate::dynamics::{simulate, EquilibriumIndex, SimError, SimSettings};
use crate::params::CipParams;

/// What to learn: the grid, the measurement it lives in, the learning impulse
/// and the simulation settings used for every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnSpec {
    pub grid: GridSpec,
    pub mode: MeasurementMode,
    pub impulse: ImpulseParams,
    pub settings: SimSettings,
}

impl LearnSpec {
    /// Four-dimensional grid over the reference measurement box with the default
    /// `P = 0.06`, `delta_tau = tau_g = dt`.
    pub fn reference(m: u32) -> Self {
        let settings = SimSettings::default();
        Self {
            grid: GridSpec::reference(m),
            mode: MeasurementMode::FourDim,
            impulse: ImpulseParams::with_step(0.06, settings.dt),
            settings,
        }
    }

    pub fn validate(&self, params: &CipParams) -> Result<(), LearningError> {
        params.validate()?;
        self.settings.validate()?;
        self.impulse.validate()?;
        if self.grid.dim() != self.mode.dim() {
            return Err(LearningError::ModeMismatch { grid_dim: self.grid.dim(), mode: self.mode });
        }
        Ok(())
    }

    pub fn measurement_map(&self, params: &CipParams) -> MeasurementMap {
        MeasurementMap { mode: self.mode, w0: params.model.rod.w0, r: params.model.pendulum.r }
    }
}

/// Result of evaluating one cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellLabel {
    /// Simulation finished; `UNCLASSIFIED` means the horizon elapsed first.
    Simulated(EquilibriumIndex),
    /// The cell center has no rigid-rod reconstruction.
    Infeasible,
    /// The simulation itself failed.
    Failed(SimError),
}

impl CellLabel {
    pub fn nu(&self) -> EquilibriumIndex {
        match self {
            CellLabel::Simulated(nu) => *nu,
            _ => EquilibriumIndex::UNCLASSIFIED,
        }
    }
}

/// Simulates the center of cell `linear` under PD control plus a single
/// impulse `P` on agent 1 at `t = 0`.
pub fn label_cell(spec: &LearnSpec, params: &CipParams, linear: usize) -> Result<CellLabel, LearningError> {
    let i = spec.grid.cell_at(linear)?;
    let y = spec.grid.cell_center(&i)?;
    Ok(label_measurement(spec, params, &y))
}

/// Same experiment as [`label_cell`] started from an arbitrary measurement.
pub fn label_measurement(spec: &LearnSpec, params: &CipParams, y: &Measurement) -> CellLabel {
    let Ok(s0) = spec.measurement_map(params).reconstruct(y) else {
        return CellLabel::Infeasible;
    };
    let controller = ControlStack::standing_only(StandingControl::new(params.standing)).with_disturbance(Disturbance {
        side: Side::Agent1,
        q: spec.impulse.p,
        delta_tau: spec.impulse.delta_tau,
    });
    match simulate(&params.model, s0, controller, &spec.settings, None) {
        Ok(out) => CellLabel::Simulated(out.nu),
        Err(e) => CellLabel::Failed(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnReport {
    pub table: ClassifierTable,
    /// Cells whose center violates the rigid-rod constraint.
    pub infeasible: usize,
    /// Cells whose simulation did not converge within the horizon.
    pub unconverged: usize,
    /// Cells whose simulation raised an error.
    pub failed: usize,
}

/// Builds the classifier table. Cells are independent and evaluated in
/// parallel on `jobs` threads (the global pool when `None`); the result does
/// not depend on the thread count.
pub fn learn_table(spec: &LearnSpec, params: &CipParams, jobs: Option<usize>) -> Result<LearnReport, LearningError> {
    spec.validate(params)?;
    let n = spec.grid.cell_count();
    let run = || -> Result<Vec<CellLabel>, LearningError> {
        (0..n).into_par_iter().map(|l| label_cell(spec, params, l)).collect()
    };
    let cells = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| LearningError::ThreadPool(e.to_string()))?
            .install(run)?,
        None => run()?,
    };

    let (mut infeasible, mut unconverged, mut failed) = (0, 0, 0);
    let labels = cells
        .iter()
        .map(|c| {
            match c {
                CellLabel::Infeasible => infeasible += 1,
                CellLabel::Failed(e) => {
                    log::debug!("cell simulation failed: {e}");
                    failed += 1
                }
                CellLabel::Simulated(nu) if !nu.is_classified() => unconverged += 1,
                CellLabel::Simulated(_) => {}
            }
            c.nu().value()
        })
        .collect();
    if infeasible + failed > 0 {
        log::warn!("{infeasible} infeasible and {failed} failed cells labelled 0");
    }
    log::info!("learned {n} cells, {unconverged} did not converge");

    let provenance = Provenance {
        param_digest: params.digest(),
        impulse: spec.impulse,
        settings: spec.settings,
        version: TABLE_FORMAT_VERSION,
    };
    let table = ClassifierTable::new(spec.grid.clone(), spec.mode, labels, provenance)?;
    Ok(LearnReport { table, infeasible, unconverged, failed })
}
