//! Kernel execution-time prediction.
//!
//! A round of active warps on one SM is classified into one of six pipeline
//! shapes. Each shape has a closed-form cycle count for the round
//! (`t_active`); the kernel's total time scales that by the number of rounds
//! needed to retire every warp.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::device::DeviceSpec;
use crate::error::{Error, Result};
use crate::freq::FrequencyPair;
use crate::memory::MemoryTimings;

/// Per-kernel performance counters collected once at the baseline clocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelProfile {
    pub name: String,
    /// Global load/store transactions per warp per outer iteration.
    pub gld_trans: f64,
    /// Compute instructions issued by the whole kernel (warp-level).
    pub comp_inst: f64,
    pub l2_hr: f64,
    pub num_blocks: u32,
    pub warps_per_block: u32,
    /// Warps resident on one SM at a time.
    pub active_warps: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_sms: Option<u32>,
    pub o_itrs: u32,
    #[serde(default)]
    pub i_itrs: u32,
    #[serde(default)]
    pub uses_shared_memory: bool,
}

impl KernelProfile {
    pub fn total_warps(&self) -> u64 {
        u64::from(self.warps_per_block) * u64::from(self.num_blocks)
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidProfile {
            kernel: self.name.clone(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(self.invalid("name must not be empty"));
        }
        if !(0.0..=1.0).contains(&self.l2_hr) {
            return Err(self.invalid(format!("l2_hr must lie in [0, 1], got {}", self.l2_hr)));
        }
        if !(self.gld_trans.is_finite() && self.gld_trans >= 0.0) {
            return Err(self.invalid(format!("gld_trans must be >= 0, got {}", self.gld_trans)));
        }
        if !(self.comp_inst.is_finite() && self.comp_inst >= 0.0) {
            return Err(self.invalid(format!("comp_inst must be >= 0, got {}", self.comp_inst)));
        }
        if self.num_blocks == 0 || self.warps_per_block == 0 {
            return Err(self.invalid("num_blocks and warps_per_block must be >= 1"));
        }
        if self.active_warps < 2 {
            return Err(self.invalid(format!(
                "active_warps must be >= 2, got {}",
                self.active_warps
            )));
        }
        if self.total_warps() < u64::from(self.active_warps) {
            return Err(self.invalid(format!(
                "kernel has {} warps but {} active warps per SM",
                self.total_warps(),
                self.active_warps
            )));
        }
        if self.o_itrs == 0 {
            return Err(self.invalid("o_itrs must be >= 1"));
        }
        if self.active_sms == Some(0) {
            return Err(self.invalid("active_sms must be >= 1 when given"));
        }
        Ok(())
    }
}

/// Profiles ingest from either a single JSON object or an array of them.
pub fn load_profiles(path: impl AsRef<Path>) -> Result<Vec<KernelProfile>> {
    parse_profiles(&std::fs::read_to_string(path)?)
}

pub fn parse_profiles(json: &str) -> Result<Vec<KernelProfile>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(KernelProfile),
        Many(Vec<KernelProfile>),
    }
    let profiles = match serde_json::from_str::<OneOrMany>(json)? {
        OneOrMany::One(p) => vec![p],
        OneOrMany::Many(v) => v,
    };
    for p in &profiles {
        p.validate()?;
    }
    Ok(profiles)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExecutionCase {
    ComputeDominated,
    MemoryDominated,
    FewWarpsShortCompute,
    FewWarpsLongCompute,
    SharedInfrequent,
    SharedIntensive,
}

impl ExecutionCase {
    pub const ALL: [ExecutionCase; 6] = [
        ExecutionCase::ComputeDominated,
        ExecutionCase::MemoryDominated,
        ExecutionCase::FewWarpsShortCompute,
        ExecutionCase::FewWarpsLongCompute,
        ExecutionCase::SharedInfrequent,
        ExecutionCase::SharedIntensive,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExecutionCase::ComputeDominated => "ComputeDominated",
            ExecutionCase::MemoryDominated => "MemoryDominated",
            ExecutionCase::FewWarpsShortCompute => "FewWarpsShortCompute",
            ExecutionCase::FewWarpsLongCompute => "FewWarpsLongCompute",
            ExecutionCase::SharedInfrequent => "SharedInfrequent",
            ExecutionCase::SharedIntensive => "SharedIntensive",
        }
    }

    pub fn is_shared(&self) -> bool {
        matches!(
            self,
            ExecutionCase::SharedInfrequent | ExecutionCase::SharedIntensive
        )
    }
}

impl fmt::Display for ExecutionCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExecutionCase {
    type Err = Error;

    /// Accepts `ComputeDominated`, `compute_dominated`, `compute-dominated`.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .flat_map(char::to_lowercase)
            .collect();
        ExecutionCase::ALL
            .into_iter()
            .find(|c| c.as_str().to_lowercase() == key)
            .ok_or_else(|| Error::Domain(format!("unknown execution case `{s}`")))
    }
}

/// Everything the case conditions and closed forms read, in cycles or
/// counts. Counts are real-valued so fractional profile averages pass
/// through unchanged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseInputs {
    pub avr_comp: f64,
    pub agl_lat: f64,
    pub agl_del: f64,
    pub active_warps: f64,
    pub warps_per_block: f64,
    pub gld_trans: f64,
    pub o_itrs: f64,
    pub i_itrs: f64,
    pub shm_lat: f64,
    pub uses_shared_memory: bool,
}

impl CaseInputs {
    pub fn new(
        profile: &KernelProfile,
        timings: &MemoryTimings,
        avr_comp: f64,
        spec: &DeviceSpec,
    ) -> Self {
        Self {
            avr_comp,
            agl_lat: timings.agl_lat,
            agl_del: timings.agl_del,
            active_warps: f64::from(profile.active_warps),
            warps_per_block: f64::from(profile.warps_per_block),
            gld_trans: profile.gld_trans,
            o_itrs: f64::from(profile.o_itrs),
            i_itrs: f64::from(profile.i_itrs),
            shm_lat: spec.shm_lat,
            uses_shared_memory: profile.uses_shared_memory,
        }
    }

    /// Select the pipeline shape.
    ///
    /// Without shared memory, `avr_comp >= agl_del` (ties included) selects
    /// the compute side. There, latency is hidden when the other warps'
    /// compute covers one memory latency. On the memory side the request
    /// queue saturates when one warp's compute plus latency fits inside a
    /// full round of service slots; ties go to the saturated shape.
    pub fn classify(&self) -> ExecutionCase {
        let c = self.avr_comp;
        let (lat, del, aw) = (self.agl_lat, self.agl_del, self.active_warps);
        if self.uses_shared_memory {
            let hidden = c + self.shm_lat <= del * (aw - self.warps_per_block);
            if c <= del && hidden {
                ExecutionCase::SharedInfrequent
            } else {
                ExecutionCase::SharedIntensive
            }
        } else if c >= del {
            if c * (aw - 1.0) >= lat {
                ExecutionCase::ComputeDominated
            } else {
                ExecutionCase::FewWarpsLongCompute
            }
        } else if c + lat <= del * aw {
            ExecutionCase::MemoryDominated
        } else {
            ExecutionCase::FewWarpsShortCompute
        }
    }

    /// Cycles for one round of active warps under `case`.
    pub fn t_active(&self, case: ExecutionCase) -> f64 {
        let c = self.avr_comp;
        let (lat, del) = (self.agl_lat, self.agl_del);
        let (aw, wpb, o) = (self.active_warps, self.warps_per_block, self.o_itrs);
        match case {
            ExecutionCase::ComputeDominated => c * aw * o + lat,
            ExecutionCase::MemoryDominated => lat + c + del * wpb * o,
            ExecutionCase::FewWarpsShortCompute => del * aw + lat + c + (c + lat) * (o - 1.0),
            ExecutionCase::FewWarpsLongCompute => c * (aw - 1.0) + (c + lat) * o,
            ExecutionCase::SharedInfrequent => c + lat + del * aw * self.gld_trans,
            ExecutionCase::SharedIntensive => {
                let (p1, p2, p3) = self.shared_phases();
                p1 + (p2 + p3) * o
            }
        }
    }

    /// Load phase for all active warps, shared-memory phase of one block,
    /// and the per-iteration global phase of one block.
    pub fn shared_phases(&self) -> (f64, f64, f64) {
        let c = self.avr_comp;
        let (lat, del, shm) = (self.agl_lat, self.agl_del, self.shm_lat);
        let g = self.gld_trans;
        let p1 = c * 2.0 + del * g * self.active_warps + lat + shm;
        let p2 = c * (self.warps_per_block - 1.0) + (c + shm) * self.i_itrs;
        let p3 = c * 2.0 + del * g * self.warps_per_block + lat + shm;
        (p1, p2, p3)
    }
}

/// Average compute cycles preceding each global transaction.
///
/// `comp_inst` is a whole-kernel total; it is brought down to one warp and
/// one outer iteration before dividing by the per-warp-per-iteration
/// transaction count.
pub fn avg_compute_time(profile: &KernelProfile, spec: &DeviceSpec) -> Result<f64> {
    let issued = profile.gld_trans * f64::from(profile.o_itrs) * profile.total_warps() as f64;
    if issued.is_nan() || issued <= 0.0 {
        return Err(Error::DegenerateProfile {
            kernel: profile.name.clone(),
            reason: "no global memory transactions to normalize compute against".into(),
        });
    }
    Ok(spec.inst_cycle * profile.comp_inst / issued)
}

pub fn classify(
    profile: &KernelProfile,
    timings: &MemoryTimings,
    avr_comp: f64,
    spec: &DeviceSpec,
) -> ExecutionCase {
    CaseInputs::new(profile, timings, avr_comp, spec).classify()
}

pub fn t_active(
    case: ExecutionCase,
    profile: &KernelProfile,
    timings: &MemoryTimings,
    avr_comp: f64,
    spec: &DeviceSpec,
) -> Result<f64> {
    if case.is_shared() != profile.uses_shared_memory {
        return Err(Error::CaseMismatch {
            case: case.to_string(),
            kernel: profile.name.clone(),
        });
    }
    if case == ExecutionCase::SharedIntensive && profile.i_itrs == 0 {
        return Err(Error::InvalidProfile {
            kernel: profile.name.clone(),
            reason: "shared-intensive kernels need i_itrs >= 1".into(),
        });
    }
    Ok(CaseInputs::new(profile, timings, avr_comp, spec).t_active(case))
}

/// Rounds of active warps needed to retire every warp; kept fractional.
pub fn rounds(profile: &KernelProfile, spec: &DeviceSpec) -> f64 {
    let sms = profile
        .active_sms
        .map_or(spec.num_sm, |a| a.min(spec.num_sm));
    profile.total_warps() as f64 / (f64::from(profile.active_warps) * f64::from(sms))
}

/// Total kernel time as `(cycles, seconds)`.
pub fn t_exec(
    t_active: f64,
    profile: &KernelProfile,
    spec: &DeviceSpec,
    f: FrequencyPair,
) -> (f64, f64) {
    let cycles = t_active * rounds(profile, spec);
    (cycles, cycles / f.core_hz())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub kernel: String,
    pub at: FrequencyPair,
    pub case: ExecutionCase,
    pub avr_comp: f64,
    pub t_active: f64,
    pub t_exec_cycles: f64,
    pub t_exec_seconds: f64,
}

pub fn predict(spec: &DeviceSpec, profile: &KernelProfile, f: FrequencyPair) -> Result<Prediction> {
    profile.validate()?;
    f.validate()?;
    let timings = MemoryTimings::compute(spec, profile.l2_hr, f)?;
    let avr_comp = avg_compute_time(profile, spec)?;
    let case = classify(profile, &timings, avr_comp, spec);
    let t_active = t_active(case, profile, &timings, avr_comp, spec)?;
    let (t_exec_cycles, t_exec_seconds) = t_exec(t_active, profile, spec, f);
    Ok(Prediction {
        kernel: profile.name.clone(),
        at: f,
        case,
        avr_comp,
        t_active,
        t_exec_cycles,
        t_exec_seconds,
    })
}

/// One prediction per grid point, in grid order.
pub fn sweep(
    spec: &DeviceSpec,
    profile: &KernelProfile,
    grid: &[FrequencyPair],
) -> Result<Vec<Prediction>> {
    if grid.is_empty() {
        return Err(Error::Domain("frequency grid is empty".into()));
    }
    grid.iter().map(|&f| predict(spec, profile, f)).collect()
}
