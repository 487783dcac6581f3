#![allow(dead_code)]

use std::path::PathBuf;

use haulcharge_core::data::{load_config, load_tables, RegionData};
use haulcharge_core::scenario::{prepare_scenario, Scenario};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/texas")
}

pub fn fixture_region() -> RegionData {
    let cfg = load_config(fixture_dir().join("scenario.toml"), None).expect("fixture config");
    load_tables(&cfg).expect("fixture tables")
}

pub fn fixture_scenario() -> (RegionData, Scenario) {
    let region = fixture_region();
    let scenario = prepare_scenario(&region, &region.config.scenario).expect("fixture scenario");
    (region, scenario)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
