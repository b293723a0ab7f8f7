//! Shared fixtures for the criterion benches.

use uavsec::{presets, CipherConfig, CipherMode, Key128, Scenario};

pub const BENCH_KEY: Key128 = Key128([0x42; 16]);

pub fn config(mode: CipherMode) -> CipherConfig {
    CipherConfig::new(mode, BENCH_KEY)
}

/// Preset scenario with its tick count replaced.
pub fn preset_scenario(name: &str, ticks: u64) -> Scenario {
    let mut doc = presets::by_name(name).expect("known preset");
    doc.scenario.ticks = ticks;
    doc.scenario().expect("presets are valid")
}
