//! Randomized pipeline instances that satisfy one execution case's
//! conditions, paired with the matching simulator configuration.
//!
//! Memory timings are drawn from a device spec at random clock pairs and L2
//! hit rates, so instances stay within the range the model actually sees.
//! Non-shared instances issue one transaction per compute period (the
//! closed forms carry no transaction count) and use one block per SM.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::device::DeviceSpec;
use crate::error::{Error, Result};
use crate::freq::FrequencyPair;
use crate::memory::MemoryTimings;
use crate::oracle::{simulate_pipeline, PipelineConfig, SharedPhases};
use crate::predictor::{CaseInputs, ExecutionCase};

/// Relative tolerance for the shared-memory shapes.
pub const SHARED_REL_TOLERANCE: f64 = 0.05;

/// Largest ratio of a warp's SM compute to its memory service time for
/// which the infrequent shared shape is treated as memory-bound.
pub const SM_LOAD_BOUND: f64 = 0.5;

const MAX_ATTEMPTS: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub case: ExecutionCase,
    pub at: FrequencyPair,
    pub l2_hr: f64,
    pub inputs: CaseInputs,
    pub config: PipelineConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: Scenario,
    pub closed_form: f64,
    pub makespan: f64,
}

impl Comparison {
    pub fn diff(&self) -> f64 {
        self.closed_form - self.makespan
    }

    pub fn rel_diff(&self) -> f64 {
        self.diff().abs() / self.makespan
    }

    /// Non-shared shapes agree to one cycle or one service slot, whichever
    /// is larger; shared shapes to [`SHARED_REL_TOLERANCE`].
    pub fn within_tolerance(&self) -> bool {
        if self.scenario.case.is_shared() {
            self.rel_diff() <= SHARED_REL_TOLERANCE
        } else {
            self.diff().abs() <= self.scenario.config.mem_service.max(1.0) + 1e-9
        }
    }
}

impl Scenario {
    pub fn compare(&self) -> Result<Comparison> {
        let makespan = simulate_pipeline(&self.config)?.makespan;
        Ok(Comparison {
            scenario: self.clone(),
            closed_form: self.inputs.t_active(self.case),
            makespan,
        })
    }
}

/// Work a block does between its first load completing and its first
/// write-back issuing, in the infrequent shared shape.
fn infrequent_lead_time(i: &CaseInputs) -> f64 {
    let (_, p2, _) = i.shared_phases();
    i.agl_lat + 2.0 * i.avr_comp + i.shm_lat + p2 + i.avr_comp
}

/// Conditions under which the shared closed forms describe the simulated
/// pipeline, beyond the classifier's own test.
///
/// Infrequent: the memory queue never drains, because the other blocks'
/// load traffic outlasts a block's trip to its write-back phase, and the SM
/// stays well below the memory server's load.
/// Intensive: one block's shared plus global phase covers the global
/// traffic of every block, so blocks stay staggered and only contend within
/// themselves after the first load; the SM issues all active warps' compute
/// inside one shared-memory latency.
pub fn shared_premise_holds(case: ExecutionCase, i: &CaseInputs, phase_trans: f64) -> bool {
    let others = i.active_warps - i.warps_per_block;
    match case {
        ExecutionCase::SharedInfrequent => {
            let sm_work = (4.0 + i.i_itrs) * i.avr_comp;
            infrequent_lead_time(i) <= i.agl_del * phase_trans * others
                && sm_work <= SM_LOAD_BOUND * 2.0 * phase_trans * i.agl_del
        }
        ExecutionCase::SharedIntensive => {
            let (_, p2, p3) = i.shared_phases();
            p2 + p3 >= i.agl_del * i.gld_trans * i.active_warps
                && i.avr_comp * (i.active_warps - 1.0) <= i.shm_lat
        }
        _ => true,
    }
}

pub struct ScenarioGenerator<'a> {
    spec: &'a DeviceSpec,
    rng: ChaCha8Rng,
}

impl<'a> ScenarioGenerator<'a> {
    pub fn new(spec: &'a DeviceSpec, seed: u64) -> Self {
        Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn timings(&mut self) -> Result<(FrequencyPair, f64, MemoryTimings)> {
        let core = f64::from(self.rng.random_range(4..=10u32) * 100);
        let mem = f64::from(self.rng.random_range(4..=10u32) * 100);
        let f = FrequencyPair::new(core, mem)?;
        let l2_hr = self.rng.random_range(0.0..=1.0);
        Ok((f, l2_hr, MemoryTimings::compute(self.spec, l2_hr, f)?))
    }

    /// Draw one instance of `case`.
    pub fn generate(&mut self, case: ExecutionCase) -> Result<Scenario> {
        for _ in 0..MAX_ATTEMPTS {
            if let Some(s) = self.attempt(case)? {
                return Ok(s);
            }
        }
        Err(Error::Domain(format!(
            "could not draw a {case} instance in {MAX_ATTEMPTS} attempts"
        )))
    }

    fn attempt(&mut self, case: ExecutionCase) -> Result<Option<Scenario>> {
        let (at, l2_hr, t) = self.timings()?;
        let d = t.agl_del;
        let rng = &mut self.rng;
        if !case.is_shared() {
            let aw = rng.random_range(2..=64u32);
            let o = rng.random_range(1..=8u32);
            // Half the draws on the memory side of the compute/delay split.
            let c = if rng.random_bool(0.5) {
                rng.random_range(0.0..d)
            } else {
                rng.random_range(d..=d + 400.0)
            };
            let inputs = CaseInputs {
                avr_comp: c,
                agl_lat: t.agl_lat,
                agl_del: d,
                active_warps: f64::from(aw),
                warps_per_block: f64::from(aw),
                gld_trans: 1.0,
                o_itrs: f64::from(o),
                i_itrs: 0.0,
                shm_lat: self.spec.shm_lat,
                uses_shared_memory: false,
            };
            if inputs.classify() != case {
                return Ok(None);
            }
            let config = PipelineConfig {
                num_warps: aw,
                warps_per_block: aw,
                compute_cycles: c,
                mem_latency: t.agl_lat,
                mem_service: d,
                trans_per_iter: 1,
                outer_iters: o,
                shared: None,
            };
            return Ok(Some(Scenario {
                case,
                at,
                l2_hr,
                inputs,
                config,
            }));
        }

        let wpb = rng.random_range(1..=8u32);
        let blocks = rng.random_range(1..=8u32);
        let aw = wpb * blocks;
        if aw < 2 {
            return Ok(None);
        }
        let g = rng.random_range(1..=4u32);
        let c = rng.random_range(0.0..=2.0 * d);
        let (o, inner, closed_trans) = match case {
            // One load, one shared exchange, one write-back; the closed form
            // counts both global phases' transactions.
            ExecutionCase::SharedInfrequent => (1, 1, 2 * g),
            _ => (rng.random_range(1..=6u32), rng.random_range(1..=64u32), g),
        };
        let inputs = CaseInputs {
            avr_comp: c,
            agl_lat: t.agl_lat,
            agl_del: d,
            active_warps: f64::from(aw),
            warps_per_block: f64::from(wpb),
            gld_trans: f64::from(closed_trans),
            o_itrs: f64::from(o),
            i_itrs: f64::from(inner),
            shm_lat: self.spec.shm_lat,
            uses_shared_memory: true,
        };
        if inputs.classify() != case || !shared_premise_holds(case, &inputs, f64::from(g)) {
            return Ok(None);
        }
        let config = PipelineConfig {
            num_warps: aw,
            warps_per_block: wpb,
            compute_cycles: c,
            mem_latency: t.agl_lat,
            mem_service: d,
            trans_per_iter: g,
            outer_iters: o,
            shared: Some(SharedPhases {
                shm_lat: self.spec.shm_lat,
                inner_iters: inner,
            }),
        };
        Ok(Some(Scenario {
            case,
            at,
            l2_hr,
            inputs,
            config,
        }))
    }
}
