//! Effective global-memory timings and aggregate request latency.

use serde::{Deserialize, Serialize};

use crate::device::DeviceSpec;
use crate::error::{Error, Result};
use crate::freq::FrequencyPair;

/// L2-hit-weighted global-memory latency and per-transaction delay at one
/// frequency pair, in core cycles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryTimings {
    pub agl_lat: f64,
    pub agl_del: f64,
    pub at: FrequencyPair,
}

impl MemoryTimings {
    pub fn compute(spec: &DeviceSpec, l2_hr: f64, f: FrequencyPair) -> Result<Self> {
        Ok(Self {
            agl_lat: effective_global_latency(spec, l2_hr, f)?,
            agl_del: effective_global_delay(spec, l2_hr, f)?,
            at: f,
        })
    }
}

fn check_hit_rate(l2_hr: f64) -> Result<()> {
    if (0.0..=1.0).contains(&l2_hr) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "L2 hit rate must lie in [0, 1], got {l2_hr}"
        )))
    }
}

/// Average global-memory latency. The DRAM term already carries the clock
/// ratio through the latency fit, so it is not scaled again here.
pub fn effective_global_latency(spec: &DeviceSpec, l2_hr: f64, f: FrequencyPair) -> Result<f64> {
    check_hit_rate(l2_hr)?;
    f.validate()?;
    Ok(spec.l2_lat * l2_hr + spec.dram_latency(f) * (1.0 - l2_hr))
}

/// Average per-transaction service delay. The DRAM delay table is measured
/// at matched clocks, so its value is scaled by the core/memory ratio.
pub fn effective_global_delay(spec: &DeviceSpec, l2_hr: f64, f: FrequencyPair) -> Result<f64> {
    check_hit_rate(l2_hr)?;
    f.validate()?;
    let dram = spec.dram_delay.delay_cycles(f.mem_mhz)?;
    Ok(spec.l2_del * l2_hr + dram * f.ratio() * (1.0 - l2_hr))
}

/// Completion time of `gld_trans` requests per warp over `num_warps` warps
/// when the memory system is not saturated.
pub fn total_latency_unsaturated(
    inter_arrival: f64,
    num_warps: f64,
    dm_lat: f64,
    gld_trans: f64,
) -> f64 {
    inter_arrival * num_warps + dm_lat * gld_trans
}

/// Completion time when every request queues behind all earlier ones.
pub fn total_latency_saturated(dm_lat: f64, dm_del: f64, gld_trans: f64, num_warps: f64) -> f64 {
    dm_lat + dm_del * gld_trans * num_warps
}
