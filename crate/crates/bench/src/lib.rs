//! Fixtures shared by the benchmarks.

use hsc_core::{builtin, ScenarioConfig};

/// A built-in scenario shortened to `duration` seconds.
pub fn short_scenario(name: &str, duration: f64) -> ScenarioConfig {
    let mut cfg = builtin(name).expect("built-in scenario");
    cfg.duration = duration;
    cfg
}
