//! Execution-time prediction for GPU kernels under core and memory clock
//! scaling.
//!
//! The model is driven by a handful of microbenchmarked device constants
//! ([`DeviceSpec`]) and a kernel's performance counters collected once at a
//! baseline clock pair ([`KernelProfile`]). [`predict`] classifies the
//! kernel's pipeline shape at the requested clocks and returns cycles and
//! seconds for the whole launch.
//!
//! [`oracle`] simulates the same pipelines event by event and is used to
//! cross-check every closed-form shape.

pub mod device;
pub mod error;
pub mod freq;
pub mod memory;
pub mod oracle;
pub mod output;
pub mod predictor;
pub mod scenario;
pub mod validation;

pub use device::{
    dram_delay_cycles, dram_latency_cycles, fit_dram_latency, DelayEntry, DeviceSpec,
    DramDelayTable, DramLatencyFit, LatencySample,
};
pub use error::{Error, Result};
pub use freq::{default_grid, frequency_grid, FrequencyPair};
pub use memory::{
    effective_global_delay, effective_global_latency, total_latency_saturated,
    total_latency_unsaturated, MemoryTimings,
};
pub use oracle::{compare_closed_form, simulate_pipeline, PipelineConfig, SharedPhases, SimResult};
pub use output::{
    format_cycles, format_seconds, read_predictions_csv, read_predictions_json,
    write_predictions_csv, write_predictions_json, PredictionRow,
};
pub use predictor::{
    avg_compute_time, classify, predict, sweep, t_active, t_exec, CaseInputs, ExecutionCase,
    KernelProfile, Prediction,
};
pub use scenario::{Comparison, Scenario, ScenarioGenerator};
pub use validation::{
    read_measurements_csv, validate, write_samples_csv, MeasurementRecord, SampleError, SampleKey,
    ValidationReport,
};
