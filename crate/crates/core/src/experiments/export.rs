use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{DelayScan, ExperimentError, SweepResult};
use crate::control::Side;
use crate::dynamics::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

/// How trials without any controller output are counted, echoed in JSON output.
pub const N0_NOTE: &str = "n0 counts trials in which no intelligent controller emitted a pulse; \
both disturbance placements are pooled into one quotient";

#[derive(Serialize, Deserialize)]
struct JsonExport<'a> {
    #[serde(borrow)]
    notes: &'a str,
    #[serde(flatten)]
    result: SweepResult,
}

pub fn export_results<W: Write>(r: &SweepResult, format: ExportFormat, sink: W) -> Result<(), ExperimentError> {
    match format {
        ExportFormat::Csv => write_csv(r, sink),
        ExportFormat::Json => {
            let mut sink = sink;
            let doc = JsonExport { notes: N0_NOTE, result: r.clone() };
            serde_json::to_writer_pretty(&mut sink, &doc).map_err(|e| ExperimentError::Export(e.to_string()))?;
            sink.write_all(b"\n")?;
            sink.flush()?;
            Ok(())
        }
    }
}

/// Parses a JSON export back into a result.
pub fn import_json(text: &str) -> Result<SweepResult, ExperimentError> {
    let doc: JsonExport = serde_json::from_str(text).map_err(|e| ExperimentError::Export(e.to_string()))?;
    Ok(doc.result)
}

fn write_csv<W: Write>(r: &SweepResult, sink: W) -> Result<(), ExperimentError> {
    let err = |e: csv::Error| ExperimentError::Export(e.to_string());
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["trial_id", "Q", "side", "nu", "fired", "t_converge", "label"]).map_err(err)?;
    for t in &r.trials {
        let side = match t.side {
            Side::Agent1 => "agent1",
            Side::Agent2 => "agent2",
        };
        w.write_record([
            t.trial_id.to_string(),
            t.q.to_string(),
            side.to_string(),
            t.nu.value().to_string(),
            t.fired.to_string(),
            t.t_converge.map_or(String::new(), |v| v.to_string()),
            t.label.clone(),
        ])
        .map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per delay: `tau_d, n_total, n0, n_j, e` for agent 1, `e` empty when undefined.
pub fn export_delay_scan<W: Write>(scan: &DelayScan, format: ExportFormat, sink: W) -> Result<(), ExperimentError> {
    match format {
        ExportFormat::Json => {
            let mut sink = sink;
            serde_json::to_writer_pretty(&mut sink, scan).map_err(|e| ExperimentError::Export(e.to_string()))?;
            sink.write_all(b"\n")?;
            sink.flush()?;
            Ok(())
        }
        ExportFormat::Csv => {
            let err = |e: csv::Error| ExperimentError::Export(e.to_string());
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(["tau_d", "n_total", "n0", "n_j", "e"]).map_err(err)?;
            for p in &scan.points {
                let a = &p.result.aggregates;
                let score = a.score(Side::Agent1);
                w.write_record([
                    p.tau_d.to_string(),
                    a.n_q_total.to_string(),
                    a.n0.to_string(),
                    score.map_or(String::new(), |s| s.n_j.to_string()),
                    a.e(Side::Agent1).map_or(String::new(), |e| e.to_string()),
                ])
                .map_err(err)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

/// Trajectory CSV: `t, x1, v1, th1, w1, x2, v2, th2, w2, T1, T2, fired1, fired2`.
pub fn write_trajectory<W: Write>(samples: &[Sample], sink: W) -> Result<(), ExperimentError> {
    let err = |e: csv::Error| ExperimentError::Export(e.to_string());
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["t", "x1", "v1", "th1", "w1", "x2", "v2", "th2", "w2", "T1", "T2", "fired1", "fired2"])
        .map_err(err)?;
    for s in samples {
        let mut row: Vec<String> = Vec::with_capacity(13);
        row.push(s.t.to_string());
        row.extend(s.state.to_array().iter().map(f64::to_string));
        row.extend(s.torque.iter().map(f64::to_string));
        row.extend(s.firing.iter().map(|&f| u8::from(f).to_string()));
        w.write_record(&row).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}
