//! Hardware constants and the frequency-dependent DRAM timing models.
//!
//! DRAM latency is modeled as an affine function of the core/memory clock
//! ratio, fitted by least squares from pointer-chase microbenchmark samples.
//! DRAM per-transaction delay comes from a bandwidth microbenchmark measured
//! at matched clocks and is interpolated over the memory clock.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::FrequencyPair;

/// Affine DRAM latency model: `slope * core/mem + intercept` core cycles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DramLatencyFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl DramLatencyFit {
    /// Uncontended DRAM latency in core cycles at `f`.
    pub fn latency_cycles(&self, f: FrequencyPair) -> f64 {
        self.slope * f.ratio() + self.intercept
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slope.is_finite() && self.slope >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "dram_fit.slope must be >= 0, got {}",
                self.slope
            )));
        }
        if !(self.intercept.is_finite() && self.intercept >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "dram_fit.intercept must be >= 0, got {}",
                self.intercept
            )));
        }
        if !(0.0..=1.0).contains(&self.r_squared) {
            return Err(Error::InvalidSpec(format!(
                "dram_fit.r_squared must lie in [0, 1], got {}",
                self.r_squared
            )));
        }
        Ok(())
    }
}

/// One DRAM latency microbenchmark observation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatencySample {
    pub freq: FrequencyPair,
    pub cycles: f64,
}

impl LatencySample {
    pub fn new(core_mhz: f64, mem_mhz: f64, cycles: f64) -> Self {
        Self {
            freq: FrequencyPair { core_mhz, mem_mhz },
            cycles,
        }
    }
}

/// Ordinary least squares of latency against the core/memory ratio.
pub fn fit_dram_latency(samples: &[LatencySample]) -> Result<DramLatencyFit> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 latency samples, got {}",
            samples.len()
        )));
    }
    for s in samples {
        s.freq.validate()?;
        if !s.cycles.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite latency sample at {}",
                s.freq
            )));
        }
    }

    let n = samples.len() as f64;
    let mean_x = samples.iter().map(|s| s.freq.ratio()).sum::<f64>() / n;
    let mean_y = samples.iter().map(|s| s.cycles).sum::<f64>() / n;

    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for s in samples {
        let dx = s.freq.ratio() - mean_x;
        let dy = s.cycles - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }

    // Relative to the spread of the ratios themselves; identical ratios
    // leave the slope unidentifiable.
    let scale = samples
        .iter()
        .map(|s| s.freq.ratio() * s.freq.ratio())
        .sum::<f64>();
    if sxx <= scale * 1e-24 {
        return Err(Error::DegenerateFit(
            "all samples share one core/memory ratio; slope is unidentifiable".into(),
        ));
    }

    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;

    let ss_res: f64 = samples
        .iter()
        .map(|s| {
            let r = s.cycles - (slope * s.freq.ratio() + intercept);
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };

    let fit = DramLatencyFit {
        slope,
        intercept,
        r_squared,
    };
    if slope < 0.0 || intercept < 0.0 {
        return Err(Error::DegenerateFit(format!(
            "fitted line has negative coefficients (slope {slope}, intercept {intercept})"
        )));
    }
    Ok(fit)
}

/// Evaluate the fitted DRAM latency at `f`, in core cycles.
pub fn dram_latency_cycles(fit: &DramLatencyFit, f: FrequencyPair) -> f64 {
    fit.latency_cycles(f)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayEntry {
    pub mem_mhz: f64,
    pub base_delay: f64,
    /// Reported with the measurement; not used by the model.
    pub bw_efficiency: f64,
}

/// DRAM per-transaction delay measured at matched core/memory clocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DramDelayTable {
    entries: Vec<DelayEntry>,
}

impl DramDelayTable {
    pub fn new(entries: Vec<DelayEntry>) -> Result<Self> {
        let t = Self { entries };
        t.validate()?;
        Ok(t)
    }

    pub fn entries(&self) -> &[DelayEntry] {
        &self.entries
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "DRAM delay table needs at least 2 entries, got {}",
                self.entries.len()
            )));
        }
        for w in self.entries.windows(2) {
            if w[0].mem_mhz.partial_cmp(&w[1].mem_mhz) != Some(std::cmp::Ordering::Less) {
                return Err(Error::InvalidSpec(format!(
                    "DRAM delay table must be strictly ascending in mem_mhz ({} then {})",
                    w[0].mem_mhz, w[1].mem_mhz
                )));
            }
        }
        for e in &self.entries {
            if !(e.mem_mhz.is_finite() && e.mem_mhz > 0.0) {
                return Err(Error::InvalidSpec(format!("bad mem_mhz {}", e.mem_mhz)));
            }
            if !(e.base_delay.is_finite() && e.base_delay > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "base_delay must be positive, got {} at {} MHz",
                    e.base_delay, e.mem_mhz
                )));
            }
            if !(e.bw_efficiency > 0.0 && e.bw_efficiency <= 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "bw_efficiency must lie in (0, 1], got {} at {} MHz",
                    e.bw_efficiency, e.mem_mhz
                )));
            }
        }
        Ok(())
    }

    /// Piecewise-linear interpolation over the memory clock, clamped to the
    /// end entries outside the measured range.
    pub fn delay_cycles(&self, mem_mhz: f64) -> Result<f64> {
        self.validate()?;
        if !(mem_mhz.is_finite() && mem_mhz > 0.0) {
            return Err(Error::Domain(format!(
                "memory frequency must be positive, got {mem_mhz}"
            )));
        }
        let first = self.entries[0];
        let last = self.entries[self.entries.len() - 1];
        if mem_mhz <= first.mem_mhz {
            return Ok(first.base_delay);
        }
        if mem_mhz >= last.mem_mhz {
            return Ok(last.base_delay);
        }
        // First entry strictly above mem_mhz; exists because of the clamps.
        let hi = self.entries.partition_point(|e| e.mem_mhz <= mem_mhz);
        let (a, b) = (self.entries[hi - 1], self.entries[hi]);
        if a.mem_mhz == mem_mhz {
            return Ok(a.base_delay);
        }
        let t = (mem_mhz - a.mem_mhz) / (b.mem_mhz - a.mem_mhz);
        Ok(a.base_delay + t * (b.base_delay - a.base_delay))
    }
}

pub fn dram_delay_cycles(table: &DramDelayTable, mem_mhz: f64) -> Result<f64> {
    table.delay_cycles(mem_mhz)
}

/// Fitted hardware constants for one GPU.
///
/// All latencies and delays are in core cycles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub num_sm: u32,
    pub l2_lat: f64,
    pub l2_del: f64,
    pub shm_lat: f64,
    pub inst_cycle: f64,
    pub inter_arrival: f64,
    pub baseline: FrequencyPair,
    pub dram_fit: DramLatencyFit,
    pub dram_delay: DramDelayTable,
}

impl DeviceSpec {
    /// GTX 980 constants: the published DRAM latency fit and delay table,
    /// 222-cycle L2 latency, 1-cycle L2 delay, 700/700 MHz baseline.
    ///
    /// `shm_lat` (30), `inst_cycle` (4) and `inter_arrival` (10) are
    /// placeholders; replace them with microbenchmark values for real use.
    pub fn gtx980() -> Self {
        let rows = [
            (400.0, 10.06, 0.76),
            (500.0, 9.76, 0.7813),
            (600.0, 9.54, 0.798),
            (700.0, 9.31, 0.8183),
            (800.0, 9.19, 0.8342),
            (900.0, 9.06, 0.8451),
            (1000.0, 9.0, 0.85),
        ];
        let entries = rows
            .iter()
            .map(|&(mem_mhz, base_delay, bw_efficiency)| DelayEntry {
                mem_mhz,
                base_delay,
                bw_efficiency,
            })
            .collect();
        Self {
            num_sm: 16,
            l2_lat: 222.0,
            l2_del: 1.0,
            shm_lat: 30.0,
            inst_cycle: 4.0,
            inter_arrival: 10.0,
            baseline: FrequencyPair {
                core_mhz: 700.0,
                mem_mhz: 700.0,
            },
            dram_fit: DramLatencyFit {
                slope: 222.78,
                intercept: 277.32,
                r_squared: 0.9959,
            },
            dram_delay: DramDelayTable { entries },
        }
    }

    pub fn dram_latency(&self, f: FrequencyPair) -> f64 {
        self.dram_fit.latency_cycles(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sm == 0 {
            return Err(Error::InvalidSpec("num_sm must be >= 1".into()));
        }
        let positive = [
            ("l2_lat", self.l2_lat),
            ("l2_del", self.l2_del),
            ("shm_lat", self.shm_lat),
            ("inst_cycle", self.inst_cycle),
            ("inter_arrival", self.inter_arrival),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.l2_del > self.l2_lat {
            return Err(Error::InvalidSpec(format!(
                "l2_del ({}) exceeds l2_lat ({})",
                self.l2_del, self.l2_lat
            )));
        }
        self.baseline.validate()?;
        self.dram_fit.validate()?;
        self.dram_delay.validate()?;
        let matched = self.dram_fit.slope + self.dram_fit.intercept;
        if self.shm_lat >= matched {
            return Err(Error::InvalidSpec(format!(
                "shm_lat ({}) must be below the matched-clock DRAM latency ({matched})",
                self.shm_lat
            )));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

pub const LATENCY_CSV_HEADER: [&str; 3] = ["core_mhz", "mem_mhz", "latency_cycles"];

/// Read `core_mhz,mem_mhz,latency_cycles` rows. Errors name the offending
/// line (1-based, header is line 1).
pub fn read_latency_samples<R: Read>(reader: R) -> Result<Vec<LatencySample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        None => return Err(Error::InsufficientData("empty latency CSV".into())),
        Some(r) => r?,
    };
    let cols: Vec<&str> = header.iter().collect();
    if cols != LATENCY_CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            reason: format!(
                "expected header `{}`, found `{}`",
                LATENCY_CSV_HEADER.join(","),
                cols.join(",")
            ),
        });
    }

    let mut out = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != 3 {
            return Err(Error::Parse {
                line,
                reason: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let field = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| Error::Parse {
                line,
                reason: format!("{} is not a number: `{}`", LATENCY_CSV_HEADER[i], &rec[i]),
            })
        };
        let sample = LatencySample::new(field(0)?, field(1)?, field(2)?);
        sample.freq.validate().map_err(|e| Error::Parse {
            line,
            reason: e.to_string(),
        })?;
        out.push(sample);
    }
    Ok(out)
}
