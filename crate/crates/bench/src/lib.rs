//! Fixtures shared by the benchmarks in `benches/`.

use coachres::sim::generate_instance;
use coachres::stochastic::ArrivalModel;
use coachres::Instance;

/// A builtin instance with one sampled arrival sequence.
pub fn sampled(builtin: &str, seed: u64) -> (Instance, ArrivalModel) {
    let base = Instance::builtin(builtin).expect("builtin instance");
    let am = ArrivalModel::from_instance(&base).expect("arrival model");
    (generate_instance(&base, &am, seed), am)
}
