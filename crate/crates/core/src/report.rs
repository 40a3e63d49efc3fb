//! Artifact formats. CSV floats are printed with 17 significant digits so
//! that runs are reproducible byte for byte; JSON goes through serde_json's
//! round-trip-exact float encoding.

use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::feedback::FeedbackGain;
use crate::lyapunov::DissipationReport;
use crate::simulator::SimulationRecord;
use crate::spectral::EigenSystem;
use crate::Result;

/// 17 significant digits: enough to reconstruct the exact f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// `j,lambda_j` rows for the retained spectrum.
pub fn write_eigen_csv(path: &Path, eig: &EigenSystem) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["j", "lambda_j"])?;
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        w.write_record([(j + 1).to_string(), fmt_float(*lam)])?;
    }
    w.flush()?;
    Ok(())
}

/// Grid samples of the eigenfunctions: columns `x, e_1..e_J`.
pub fn write_eigenfunctions_csv(path: &Path, eig: &EigenSystem) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["x".to_string()];
    header.extend((1..=eig.count()).map(|j| format!("e_{j}")));
    w.write_record(&header)?;
    let h = eig.spacing();
    for i in 0..eig.n_grid() {
        let mut row = vec![fmt_float(i as f64 * h)];
        row.extend(eig.eigenfunctions.iter().map(|f| fmt_float(f[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Gain matrix as CSV rows (one row per input channel).
pub fn write_gain_csv(path: &Path, gain: &FeedbackGain) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in 0..gain.n_inputs() {
        let row: Vec<String> = gain.gain.row(r).iter().map(|v| fmt_float(*v)).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a gain matrix back from CSV (rows are input channels).
pub fn read_gain_csv(path: &Path) -> Result<nalgebra::DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| crate::Error::InvalidConfig(format!("bad gain entry '{v}': {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != n_cols) {
        return Err(crate::Error::InvalidConfig(
            "ragged gain matrix in CSV".into(),
        ));
    }
    Ok(nalgebra::DMatrix::from_fn(n_rows, n_cols, |r, c| {
        rows[r][c]
    }))
}

/// Trajectory rows `t, w_1..w_J, u_1..u_m, V, trigger_lhs, trigger_rhs,
/// envelope`; diagnostic columns are empty when not attached.
pub fn write_trajectory_csv(path: &Path, record: &SimulationRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = record.states.first().map_or(0, |s| s.len());
    let m = record.inputs.first().map_or(0, |u| u.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=dim).map(|j| format!("w_{j}")));
    header.extend((1..=m).map(|k| format!("u_{k}")));
    header.extend(
        ["V", "trigger_lhs", "trigger_rhs", "envelope"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    for i in 0..record.times.len() {
        let mut row = vec![fmt_float(record.times[i])];
        row.extend(record.states[i].iter().map(|v| fmt_float(*v)));
        row.extend(record.inputs[i].iter().map(|v| fmt_float(*v)));
        let d = &record.diagnostics[i];
        row.push(fmt_opt(d.lyapunov));
        row.push(fmt_opt(d.trigger_lhs));
        row.push(fmt_opt(d.trigger_rhs));
        row.push(fmt_opt(d.envelope));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Controller-update log: `k, t_k, inter_event_time, reason`.
pub fn write_events_csv(path: &Path, record: &SimulationRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "t_k", "inter_event_time", "reason"])?;
    for event in &record.events {
        w.write_record([
            event.index.to_string(),
            fmt_float(event.time),
            fmt_opt(event.gap),
            match event.reason {
                crate::simulator::UpdateReason::Sampled => "sampled".to_string(),
                crate::simulator::UpdateReason::Triggered => "triggered".to_string(),
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Dissipation rows `t, V, dini_quotient, rhs_bound, residual`.
pub fn write_dissipation_csv(path: &Path, report: &DissipationReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "V", "dini_quotient", "rhs_bound", "residual"])?;
    for s in &report.samples {
        w.write_record([
            fmt_float(s.time),
            fmt_float(s.value),
            fmt_float(s.quotient),
            fmt_float(s.bound),
            fmt_float(s.residual),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
