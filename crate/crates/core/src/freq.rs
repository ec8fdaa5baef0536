use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A core/memory clock pair, both in MHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPair {
    pub core_mhz: f64,
    pub mem_mhz: f64,
}

impl FrequencyPair {
    pub fn new(core_mhz: f64, mem_mhz: f64) -> Result<Self> {
        let f = Self { core_mhz, mem_mhz };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.core_mhz) && ok(self.mem_mhz) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "frequencies must be finite and positive, got core {} MHz / mem {} MHz",
                self.core_mhz, self.mem_mhz
            )))
        }
    }

    /// Core-to-memory clock ratio.
    pub fn ratio(&self) -> f64 {
        self.core_mhz / self.mem_mhz
    }

    pub fn core_hz(&self) -> f64 {
        self.core_mhz * 1e6
    }
}

impl fmt::Display for FrequencyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} MHz", self.core_mhz, self.mem_mhz)
    }
}

/// Cartesian product of core and memory frequencies, core-major with
/// memory ascending inside each core step when both inputs are ascending.
pub fn frequency_grid(core_mhz: &[u32], mem_mhz: &[u32]) -> Vec<FrequencyPair> {
    core_mhz
        .iter()
        .flat_map(|&c| {
            mem_mhz.iter().map(move |&m| FrequencyPair {
                core_mhz: f64::from(c),
                mem_mhz: f64::from(m),
            })
        })
        .collect()
}

/// Inclusive `start..=stop` range with a positive step.
pub fn mhz_range(start: u32, stop: u32, step: u32) -> Result<Vec<u32>> {
    if step == 0 {
        return Err(Error::Domain("range step must be positive".into()));
    }
    if start == 0 {
        return Err(Error::Domain("frequencies must be positive".into()));
    }
    if start > stop {
        return Err(Error::Domain(format!("empty range {start}:{stop}:{step}")));
    }
    Ok((start..=stop).step_by(step as usize).collect())
}

/// The 400..=1000 MHz, 100 MHz step grid on both clocks (49 pairs).
pub fn default_grid() -> Vec<FrequencyPair> {
    let steps = mhz_range(400, 1000, 100).expect("static range");
    frequency_grid(&steps, &steps)
}
