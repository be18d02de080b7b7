//! Shared fixtures for the benchmarks.

use meshdeploy_core::{generate_scenario, GenParams, Instance};

/// 200 m x 200 m with 3/15/8 sites and 400 machines.
pub fn medium(seed: u64) -> Instance {
    let params = GenParams {
        width: 200.0,
        height: 200.0,
        n_ban: 3,
        n_sbs: 15,
        n_ma: 8,
        n_machines: 400,
        ..GenParams::paper_fig2()
    };
    Instance::new(generate_scenario(&params, seed).expect("valid parameters"))
}

pub fn large(seed: u64) -> Instance {
    Instance::new(generate_scenario(&GenParams::paper_fig2(), seed).expect("valid parameters"))
}

pub fn tiny(seed: u64) -> Instance {
    Instance::new(generate_scenario(&GenParams::tiny(3, 5, 3, 30), seed).expect("valid parameters"))
}

