//! Shared fixtures for the criterion benchmarks.

use qpm_core::crystal::{build_stack, PropagationAxis};
use qpm_core::{BeamSpec, OrbitShape, SimulationConfig, UnitCell};

/// NPP at 633 nm across 3 µm with the given trial count.
pub fn npp_config(trials: usize) -> SimulationConfig {
    let stack = build_stack(&UnitCell::npp(), 3.0, PropagationAxis::B).expect("valid NPP stack");
    let mut cfg = SimulationConfig::new(BeamSpec::helium_neon(), stack, OrbitShape::npp());
    cfg.trials = trials;
    cfg.seed = 7;
    cfg
}
