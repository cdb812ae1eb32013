use std::sync::Arc;

use cip_core::control::{ImpulseParams, MeasurementMode};
use cip_core::experiments::{
    competition_config, competition_run, delay_scan, export_results, impulse_response_sweep, import_json,
    Aggregates, ControllerSpec, DisturbanceSide, ExperimentError, ExportFormat, SuccessRate, SweepConfig,
    SweepResult,
};
use cip_core::learning::{learn_table, ClassifierTable, GridSpec, LearnSpec, Provenance};
use cip_core::validation::{no_fire_mismatches, success_identity_holds, DESK_BOX};
use cip_core::{CipParams, EquilibriumIndex, SelectorSet, Side, SimSettings};

fn settings() -> SimSettings {
    SimSettings { horizon: 40.0, ..SimSettings::default() }
}

fn learned() -> Arc<ClassifierTable> {
    let mut spec = LearnSpec::reference(2);
    spec.grid = GridSpec::uniform(DESK_BOX.to_vec(), 2).unwrap();
    spec.settings = settings();
    Arc::new(learn_table(&spec, &CipParams::default(), None).unwrap().table)
}

fn ic(table: Arc<ClassifierTable>, tau_d: f64) -> ControllerSpec {
    ControllerSpec {
        table,
        targets: SelectorSet::agent1_wins(),
        tau_d,
        impulse: ImpulseParams::with_step(0.06, 5e-4),
        source: None,
    }
}

fn sweep(n_q: usize, table: Arc<ClassifierTable>) -> SweepConfig {
    SweepConfig::new(0.06, n_q, DisturbanceSide::Agent1, settings()).with_controller(Side::Agent1, ic(table, 0.0))
}

#[test]
fn zero_disturbance_is_a_silent_upright_trial() {
    let p = CipParams::default();
    let r = impulse_response_sweep(&p, &sweep(1, learned()), Some(1)).unwrap();
    let t = &r.trials[0];
    assert_eq!((t.q, t.nu, t.fired), (0.0, EquilibriumIndex::BOTH_STANDING, false));
    assert_eq!(r.aggregates.n0, 1);
    assert_eq!(r.aggregates.e(Side::Agent1), None);
}

#[test]
fn sweep_invariants() {
    let p = CipParams::default();
    let config = sweep(6, learned());
    let r = impulse_response_sweep(&p, &config, Some(2)).unwrap();
    assert!(success_identity_holds(&r));
    assert_eq!(no_fire_mismatches(&p, &config, &r).unwrap(), 0);
    let again = impulse_response_sweep(&p, &config, Some(1)).unwrap();
    assert_eq!(again, r);
}

#[test]
fn single_zero_delay_scan_equals_plain_sweep() {
    let p = CipParams::default();
    let config = sweep(4, learned());
    let scan = delay_scan(&p, &config, &[0.0], None).unwrap();
    let plain = impulse_response_sweep(&p, &config, None).unwrap();
    assert_eq!(scan.points.len(), 1);
    assert_eq!(scan.points[0].result.trials, plain.trials);
    assert_eq!(scan.points[0].result.aggregates.e(Side::Agent1), plain.aggregates.e(Side::Agent1));
}

#[test]
fn empty_tables_leave_both_rates_undefined() {
    let p = CipParams::default();
    let g = GridSpec::reference(2);
    let zeros = ClassifierTable::new(
        g.clone(),
        MeasurementMode::FourDim,
        vec![0; g.cell_count()],
        Provenance { param_digest: p.digest(), ..Provenance::unspecified() },
    )
    .unwrap();
    let t = Arc::new(zeros);
    let c = competition_config(0.06, 3, settings(), (t.clone(), 0.0), (t, 0.0045), ImpulseParams::with_step(0.06, 5e-4));
    let r = competition_run(&p, &c, None).unwrap();
    assert_eq!(r.aggregates.n_q_total, 6);
    assert_eq!(r.aggregates.n0, 6);
    for s in &r.aggregates.scores {
        assert_eq!(s.e, SuccessRate::NoDenominator);
    }
}

#[test]
fn foreign_table_is_rejected() {
    let mut other = CipParams::default();
    other.model.rod.c_w *= 3.0;
    let err = impulse_response_sweep(&other, &sweep(2, learned()), None).unwrap_err();
    assert!(matches!(err, ExperimentError::TableDigest { agent: 1, .. }), "{err}");
}

fn csv_of(r: &SweepResult) -> String {
    let mut out = Vec::new();
    export_results(r, ExportFormat::Csv, &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn csv_export_shape() {
    let p = CipParams::default();
    let mut r = impulse_response_sweep(&p, &sweep(1, learned()), None).unwrap();
    let text = csv_of(&r);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trial_id,Q,side,nu,fired,t_converge,label");
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1].split(',').count(), 7);

    r.trials.clear();
    r.aggregates = r.recompute();
    assert_eq!(csv_of(&r), "trial_id,Q,side,nu,fired,t_converge,label\n");
}

#[test]
fn json_round_trip_recomputes_identical_rates() {
    let p = CipParams::default();
    let r = impulse_response_sweep(&p, &sweep(5, learned()), None).unwrap();
    let mut out = Vec::new();
    export_results(&r, ExportFormat::Json, &mut out).unwrap();
    let back = import_json(std::str::from_utf8(&out).unwrap()).unwrap();
    assert_eq!(back, r);
    let again: Aggregates = back.recompute();
    assert_eq!(again, r.aggregates);
    for (a, b) in back.trials.iter().zip(&r.trials) {
        assert_eq!(a.q.to_bits(), b.q.to_bits());
    }
}
