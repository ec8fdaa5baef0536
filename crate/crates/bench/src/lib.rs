//! Inputs shared by the benchmarks.

use std::path::PathBuf;

use gpufreq_core::predictor::load_profiles;
use gpufreq_core::KernelProfile;

/// Every bundled kernel profile, in file-name order.
pub fn fixture_profiles() -> Vec<KernelProfile> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/kernels");
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .expect("kernel fixtures")
        .map(|e| e.expect("dir entry").path())
        .collect();
    paths.sort();
    paths
        .iter()
        .flat_map(|p| load_profiles(p).expect("fixture parses"))
        .collect()
}
