//! Fixture loading shared by the benchmarks.

use std::path::PathBuf;

use haulcharge_core::data::{load_config, load_tables};
use haulcharge_core::scenario::{prepare_scenario, Scenario};
use haulcharge_core::RegionData;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/texas")
}

pub fn fixture_region() -> RegionData {
    let cfg = load_config(fixture_dir().join("scenario.toml"), None).expect("fixture config");
    load_tables(&cfg).expect("fixture tables")
}

pub fn fixture_scenario(region: &RegionData) -> Scenario {
    prepare_scenario(region, &region.config.scenario).expect("fixture scenario")
}
