//! Plot-ready prediction tables with fixed numeric formatting.
//!
//! Cycles are written with three decimals and seconds with six significant
//! digits, so identical inputs give byte-identical files.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::{ExecutionCase, Prediction};

pub const PREDICTION_CSV_HEADER: [&str; 7] = [
    "kernel",
    "core_mhz",
    "mem_mhz",
    "case",
    "t_active_cycles",
    "t_exec_cycles",
    "t_exec_seconds",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub kernel: String,
    pub core_mhz: u32,
    pub mem_mhz: u32,
    pub case: ExecutionCase,
    pub t_active_cycles: f64,
    pub t_exec_cycles: f64,
    pub t_exec_seconds: f64,
}

pub fn format_cycles(v: f64) -> String {
    format!("{v:.3}")
}

pub fn format_seconds(v: f64) -> String {
    format!("{v:.5e}")
}

fn integral_mhz(v: f64) -> Result<u32> {
    if v.fract() == 0.0 && v >= 1.0 && v <= f64::from(u32::MAX) {
        Ok(v as u32)
    } else {
        Err(Error::Domain(format!(
            "frequency {v} MHz is not a whole number"
        )))
    }
}

impl PredictionRow {
    /// Row for `p`, with values rounded to the written precision.
    pub fn from_prediction(p: &Prediction) -> Result<Self> {
        let round = |s: String| s.parse::<f64>().expect("formatted float parses");
        Ok(Self {
            kernel: p.kernel.clone(),
            core_mhz: integral_mhz(p.at.core_mhz)?,
            mem_mhz: integral_mhz(p.at.mem_mhz)?,
            case: p.case,
            t_active_cycles: round(format_cycles(p.t_active)),
            t_exec_cycles: round(format_cycles(p.t_exec_cycles)),
            t_exec_seconds: round(format_seconds(p.t_exec_seconds)),
        })
    }

    fn csv_fields(&self) -> [String; 7] {
        [
            self.kernel.clone(),
            self.core_mhz.to_string(),
            self.mem_mhz.to_string(),
            self.case.to_string(),
            format_cycles(self.t_active_cycles),
            format_cycles(self.t_exec_cycles),
            format_seconds(self.t_exec_seconds),
        ]
    }
}

pub fn write_predictions_csv<W: Write>(rows: &[PredictionRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PREDICTION_CSV_HEADER)?;
    for r in rows {
        w.write_record(r.csv_fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_predictions_json<W: Write>(rows: &[PredictionRow], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_predictions_json<R: Read>(input: R) -> Result<Vec<PredictionRow>> {
    Ok(serde_json::from_reader(input)?)
}

/// Read a prediction CSV as written by [`write_predictions_csv`].
pub fn read_predictions_csv<R: Read>(input: R) -> Result<Vec<PredictionRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != PREDICTION_CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected header `{}`", PREDICTION_CSV_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |what: &str| Error::Parse {
            line,
            reason: format!("invalid {what}"),
        };
        if rec.len() != PREDICTION_CSV_HEADER.len() {
            return Err(bad("field count"));
        }
        rows.push(PredictionRow {
            kernel: rec[0].to_owned(),
            core_mhz: rec[1].parse().map_err(|_| bad("core_mhz"))?,
            mem_mhz: rec[2].parse().map_err(|_| bad("mem_mhz"))?,
            case: rec[3].parse().map_err(|_| bad("case"))?,
            t_active_cycles: rec[4].parse().map_err(|_| bad("t_active_cycles"))?,
            t_exec_cycles: rec[5].parse().map_err(|_| bad("t_exec_cycles"))?,
            t_exec_seconds: rec[6].parse().map_err(|_| bad("t_exec_seconds"))?,
        });
    }
    Ok(rows)
}
