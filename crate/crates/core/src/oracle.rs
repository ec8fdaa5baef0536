//! Discrete-event simulation of warps on one SM sharing a FCFS memory queue.
//!
//! Every warp starts at time 0 and runs the same program:
//!
//! * compute periods run on the SM, one warp at a time, handed out in order
//!   of readiness (ties by warp index);
//! * a global access issues `trans_per_iter` requests to a single server
//!   that admits one request every `mem_service` cycles in FCFS order; each
//!   request completes `mem_latency` cycles after admission and the warp
//!   resumes when its last request completes;
//! * shared-memory accesses are unqueued and take `shm_lat` cycles;
//! * barriers release when every warp of the block has arrived.
//!
//! Without shared memory the program is `outer_iters` repetitions of
//! (compute, global access). With shared memory it is a load phase
//! (compute, global, compute, shared store, barrier) followed by
//! `outer_iters` repetitions of a shared phase (`inner_iters` × (compute,
//! shared access), barrier) and another load phase.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharedPhases {
    pub shm_lat: f64,
    pub inner_iters: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub num_warps: u32,
    pub warps_per_block: u32,
    pub compute_cycles: f64,
    pub mem_latency: f64,
    pub mem_service: f64,
    pub trans_per_iter: u32,
    pub outer_iters: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared: Option<SharedPhases>,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_warps", self.num_warps),
            ("warps_per_block", self.warps_per_block),
            ("trans_per_iter", self.trans_per_iter),
            ("outer_iters", self.outer_iters),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Domain(format!("{name} must be >= 1")));
            }
        }
        let mut cycles = vec![
            ("compute_cycles", self.compute_cycles),
            ("mem_latency", self.mem_latency),
            ("mem_service", self.mem_service),
        ];
        if let Some(s) = self.shared {
            cycles.push(("shm_lat", s.shm_lat));
            if s.inner_iters == 0 {
                return Err(Error::Domain("inner_iters must be >= 1".into()));
            }
        }
        for (name, v) in cycles {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.mem_service > self.mem_latency {
            return Err(Error::Domain(format!(
                "mem_service ({}) exceeds mem_latency ({})",
                self.mem_service, self.mem_latency
            )));
        }
        Ok(())
    }

    fn program(&self) -> Vec<Step> {
        let mut prog = Vec::new();
        match self.shared {
            None => {
                for _ in 0..self.outer_iters {
                    prog.extend([Step::Compute, Step::Global]);
                }
            }
            Some(s) => {
                let load = [
                    Step::Compute,
                    Step::Global,
                    Step::Compute,
                    Step::Shared,
                    Step::Barrier,
                ];
                prog.extend(load);
                for _ in 0..self.outer_iters {
                    for _ in 0..s.inner_iters {
                        prog.extend([Step::Compute, Step::Shared]);
                    }
                    prog.push(Step::Barrier);
                    prog.extend(load);
                }
            }
        }
        prog
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Step {
    Compute,
    Global,
    Shared,
    Barrier,
}

/// One global-memory request as seen by the server.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub warp: u32,
    pub issue: f64,
    pub admission: f64,
    pub completion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub makespan: f64,
    pub per_warp_finish: Vec<f64>,
    /// Most requests ever waiting for admission at once.
    pub queue_peak: usize,
    /// Requests in admission order.
    pub requests: Vec<RequestRecord>,
}

/// A warp resumes its program at `time`.
#[derive(Debug, PartialEq)]
struct Resume {
    time: f64,
    warp: u32,
    seq: u64,
}

impl Eq for Resume {}

impl Ord for Resume {
    // Min-heap on (time, warp, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.warp.cmp(&self.warp))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Resume {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Sim<'a> {
    cfg: &'a PipelineConfig,
    program: Vec<Step>,
    pc: Vec<usize>,
    finish: Vec<Option<f64>>,
    events: BinaryHeap<Resume>,
    seq: u64,
    ready: VecDeque<u32>,
    sm_free_at: f64,
    next_admission: f64,
    waiting: VecDeque<f64>,
    queue_peak: usize,
    requests: Vec<RequestRecord>,
    barrier_arrived: Vec<Vec<u32>>,
    block_size: Vec<u32>,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a PipelineConfig) -> Self {
        let n = cfg.num_warps as usize;
        let wpb = cfg.warps_per_block;
        let blocks = cfg.num_warps.div_ceil(wpb) as usize;
        let block_size = (0..blocks as u32)
            .map(|b| (cfg.num_warps - b * wpb).min(wpb))
            .collect();
        Self {
            cfg,
            program: cfg.program(),
            pc: vec![0; n],
            finish: vec![None; n],
            events: BinaryHeap::new(),
            seq: 0,
            ready: VecDeque::new(),
            sm_free_at: 0.0,
            next_admission: f64::NEG_INFINITY,
            waiting: VecDeque::new(),
            queue_peak: 0,
            requests: Vec::new(),
            barrier_arrived: vec![Vec::new(); blocks],
            block_size,
        }
    }

    fn schedule(&mut self, warp: u32, time: f64) {
        self.seq += 1;
        self.events.push(Resume {
            time,
            warp,
            seq: self.seq,
        });
    }

    fn run(mut self) -> SimResult {
        for w in 0..self.cfg.num_warps {
            self.schedule(w, 0.0);
        }
        while let Some(t) = self.events.peek().map(|e| e.time) {
            while self.events.peek().is_some_and(|e| e.time == t) {
                let ev = self.events.pop().expect("peeked");
                self.advance(ev.warp, t);
            }
            self.dispatch(t);
        }
        let per_warp_finish: Vec<f64> = self
            .finish
            .iter()
            .map(|f| f.expect("every warp runs to completion"))
            .collect();
        let makespan = per_warp_finish.iter().copied().fold(0.0, f64::max);
        SimResult {
            makespan,
            per_warp_finish,
            queue_peak: self.queue_peak,
            requests: self.requests,
        }
    }

    /// Run warp `w` from its program counter until it blocks.
    fn advance(&mut self, w: u32, t: f64) {
        let wi = w as usize;
        let Some(&step) = self.program.get(self.pc[wi]) else {
            self.finish[wi] = Some(t);
            return;
        };
        self.pc[wi] += 1;
        match step {
            Step::Compute => self.ready.push_back(w),
            Step::Global => {
                let done = self.issue(w, t);
                self.schedule(w, done);
            }
            Step::Shared => {
                let shm = self.cfg.shared.map_or(0.0, |s| s.shm_lat);
                self.schedule(w, t + shm);
            }
            Step::Barrier => {
                let b = (w / self.cfg.warps_per_block) as usize;
                self.barrier_arrived[b].push(w);
                if self.barrier_arrived[b].len() as u32 == self.block_size[b] {
                    for peer in std::mem::take(&mut self.barrier_arrived[b]) {
                        self.schedule(peer, t);
                    }
                }
            }
        }
    }

    fn issue(&mut self, w: u32, t: f64) -> f64 {
        while self.waiting.front().is_some_and(|&a| a <= t) {
            self.waiting.pop_front();
        }
        let mut last = t;
        for _ in 0..self.cfg.trans_per_iter {
            let admission = t.max(self.next_admission + self.cfg.mem_service);
            self.next_admission = admission;
            let completion = admission + self.cfg.mem_latency;
            if admission > t {
                self.waiting.push_back(admission);
            }
            self.requests.push(RequestRecord {
                warp: w,
                issue: t,
                admission,
                completion,
            });
            last = completion;
        }
        self.queue_peak = self.queue_peak.max(self.waiting.len());
        last
    }

    fn dispatch(&mut self, t: f64) {
        while self.sm_free_at <= t {
            let Some(w) = self.ready.pop_front() else {
                break;
            };
            let end = t + self.cfg.compute_cycles;
            self.sm_free_at = end;
            self.schedule(w, end);
        }
    }
}

pub fn simulate_pipeline(config: &PipelineConfig) -> Result<SimResult> {
    config.validate()?;
    Ok(Sim::new(config).run())
}

/// Signed difference `closed_form - makespan`.
pub fn compare_closed_form(config: &PipelineConfig, closed_form: f64) -> Result<f64> {
    Ok(closed_form - simulate_pipeline(config)?.makespan)
}
