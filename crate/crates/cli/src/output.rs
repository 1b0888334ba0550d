//! Sweep records and their CSV and JSON encodings.

use std::io::Write;

use serde::Serialize;

use crate::error::CliError;

pub const CSV_COLUMNS: [&str; 13] = [
    "loss_db",
    "eta_e",
    "distance_km",
    "scenario",
    "op",
    "k_sel",
    "memory",
    "best_gain",
    "best_t",
    "total_rate",
    "per_mode_rates",
    "per_mode_probs",
    "evaluations",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub loss_db: f64,
    pub eta_e: f64,
    pub distance_km: f64,
    pub scenario: String,
    pub op: String,
    pub k_sel: usize,
    pub memory: bool,
    pub best_gain: f64,
    pub best_t: Vec<f64>,
    pub total_rate: f64,
    pub per_mode_rates: Vec<f64>,
    pub per_mode_probs: Vec<f64>,
    pub evaluations: usize,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(";")
}

impl SweepRecord {
    fn csv_fields(&self) -> [String; 13] {
        [
            fmt_f64(self.loss_db),
            fmt_f64(self.eta_e),
            fmt_f64(self.distance_km),
            self.scenario.clone(),
            self.op.clone(),
            self.k_sel.to_string(),
            self.memory.to_string(),
            fmt_f64(self.best_gain),
            fmt_list(&self.best_t),
            fmt_f64(self.total_rate),
            fmt_list(&self.per_mode_rates),
            fmt_list(&self.per_mode_probs),
            self.evaluations.to_string(),
        ]
    }
}

pub fn write_csv<W: Write>(out: W, records: &[SweepRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::Output(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(err)?;
    for r in records {
        w.write_record(r.csv_fields()).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut out: W, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Output(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}
