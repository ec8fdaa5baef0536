//! Prediction error against measured runtimes.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::{format_seconds, PredictionRow};

pub const MEASUREMENT_CSV_HEADER: [&str; 4] = ["kernel", "core_mhz", "mem_mhz", "seconds"];

/// Averaged measured runtime of one kernel at one clock pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub kernel: String,
    pub core_mhz: u32,
    pub mem_mhz: u32,
    pub measured_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleKey {
    pub kernel: String,
    pub core_mhz: u32,
    pub mem_mhz: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleError {
    pub kernel: String,
    pub core_mhz: u32,
    pub mem_mhz: u32,
    pub predicted_seconds: f64,
    pub measured_seconds: f64,
    pub abs_pct_error: f64,
}

/// Errors are fractions, not percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub per_sample: Vec<SampleError>,
    pub per_kernel_mape: BTreeMap<String, f64>,
    pub overall_mape: f64,
    pub max_ape: f64,
    pub unmatched_predictions: Vec<SampleKey>,
    pub unmatched_measurements: Vec<SampleKey>,
}

/// Absolute error relative to the measured value.
pub fn abs_pct_error(predicted: f64, measured: f64) -> f64 {
    (predicted - measured).abs() / measured
}

/// Join predictions and measurements on `(kernel, core_mhz, mem_mhz)` and
/// compute MAPE. Samples follow prediction order. Rows without a partner on
/// the other side are reported, not dropped.
pub fn validate(
    predictions: &[PredictionRow],
    measurements: &[MeasurementRecord],
) -> Result<ValidationReport> {
    let mut measured: HashMap<SampleKey, f64> = HashMap::new();
    let mut meas_order = Vec::new();
    for m in measurements {
        if !(m.measured_seconds.is_finite() && m.measured_seconds > 0.0) {
            return Err(Error::Domain(format!(
                "measured time for {} at {}/{} MHz must be positive",
                m.kernel, m.core_mhz, m.mem_mhz
            )));
        }
        let key = SampleKey {
            kernel: m.kernel.clone(),
            core_mhz: m.core_mhz,
            mem_mhz: m.mem_mhz,
        };
        if measured.insert(key.clone(), m.measured_seconds).is_some() {
            return Err(Error::Domain(format!("duplicate measurement for {key:?}")));
        }
        meas_order.push(key);
    }

    let mut seen = HashSet::new();
    let mut per_sample = Vec::new();
    let mut unmatched_predictions = Vec::new();
    for p in predictions {
        let key = SampleKey {
            kernel: p.kernel.clone(),
            core_mhz: p.core_mhz,
            mem_mhz: p.mem_mhz,
        };
        if !seen.insert(key.clone()) {
            return Err(Error::Domain(format!("duplicate prediction for {key:?}")));
        }
        match measured.get(&key) {
            Some(&m) => per_sample.push(SampleError {
                kernel: p.kernel.clone(),
                core_mhz: p.core_mhz,
                mem_mhz: p.mem_mhz,
                predicted_seconds: p.t_exec_seconds,
                measured_seconds: m,
                abs_pct_error: abs_pct_error(p.t_exec_seconds, m),
            }),
            None => unmatched_predictions.push(key),
        }
    }
    let unmatched_measurements: Vec<SampleKey> = meas_order
        .into_iter()
        .filter(|k| !seen.contains(k))
        .collect();

    if per_sample.is_empty() {
        return Err(Error::InsufficientData(
            "no prediction matched a measurement on (kernel, core_mhz, mem_mhz)".into(),
        ));
    }

    let mut groups: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for s in &per_sample {
        let g = groups.entry(s.kernel.clone()).or_default();
        g.0 += s.abs_pct_error;
        g.1 += 1;
    }
    let per_kernel_mape = groups
        .into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect();
    let overall_mape =
        per_sample.iter().map(|s| s.abs_pct_error).sum::<f64>() / per_sample.len() as f64;
    let max_ape = per_sample
        .iter()
        .map(|s| s.abs_pct_error)
        .fold(0.0, f64::max);

    Ok(ValidationReport {
        per_sample,
        per_kernel_mape,
        overall_mape,
        max_ape,
        unmatched_predictions,
        unmatched_measurements,
    })
}

pub fn read_measurements_csv<R: Read>(input: R) -> Result<Vec<MeasurementRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != MEASUREMENT_CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected header `{}`", MEASUREMENT_CSV_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |what: &str| Error::Parse {
            line,
            reason: format!("invalid {what}"),
        };
        if rec.len() != 4 {
            return Err(bad("field count"));
        }
        out.push(MeasurementRecord {
            kernel: rec[0].to_owned(),
            core_mhz: rec[1].parse().map_err(|_| bad("core_mhz"))?,
            mem_mhz: rec[2].parse().map_err(|_| bad("mem_mhz"))?,
            measured_seconds: rec[3].parse().map_err(|_| bad("seconds"))?,
        });
    }
    Ok(out)
}

pub fn write_samples_csv<W: Write>(report: &ValidationReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "kernel",
        "core_mhz",
        "mem_mhz",
        "predicted_seconds",
        "measured_seconds",
        "abs_pct_error",
    ])?;
    for s in &report.per_sample {
        w.write_record([
            s.kernel.clone(),
            s.core_mhz.to_string(),
            s.mem_mhz.to_string(),
            format_seconds(s.predicted_seconds),
            format_seconds(s.measured_seconds),
            format!("{:.6}", s.abs_pct_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}
