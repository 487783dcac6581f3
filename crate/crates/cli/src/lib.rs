//! Shared pieces of the `haulcharge` binary: scenario execution to a report
//! directory, exit-code mapping and the HTTP service.

pub mod service;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use haulcharge_core::data::{load_config, load_tables, RegionData, ScenarioSettings};
use haulcharge_core::report::{render_report, ReportFormat};
use haulcharge_core::scenario::{prepare_scenario, run_scenario, RunOptions, Scenario};
use haulcharge_core::solver::{day_instance, solve, ChargeInstance, ChargePlan, SolveError};
use haulcharge_core::{ScenarioError, ScenarioResult};
use serde::{Deserialize, Serialize};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

/// Raised when `solve` finds no plan, so the exit code can tell it apart.
#[derive(Debug)]
pub struct Infeasible(pub String);

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Infeasible {}

/// 2 for charging infeasibility anywhere in the error chain, 1 otherwise.
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    let infeasible = err.chain().any(|e| {
        e.downcast_ref::<Infeasible>().is_some()
            || e.downcast_ref::<ScenarioError>().is_some_and(ScenarioError::is_infeasibility)
            || matches!(e.downcast_ref::<SolveError>(), Some(SolveError::Infeasible(_)))
    });
    if infeasible {
        EXIT_INFEASIBLE
    } else {
        EXIT_VALIDATION
    }
}

pub fn load_region(config: &Path, data_dir: Option<&Path>) -> anyhow::Result<RegionData> {
    let cfg = load_config(config, data_dir).with_context(|| format!("loading {}", config.display()))?;
    Ok(load_tables(&cfg)?)
}

/// Runs a scenario and writes every report file into `out_dir`. Returns the
/// result and the path of `result.json`.
pub fn run_to_dir(
    region: &RegionData,
    settings: &ScenarioSettings,
    options: RunOptions,
    out_dir: &Path,
) -> anyhow::Result<(ScenarioResult, PathBuf)> {
    let scenario = prepare_scenario(region, settings)?;
    let result = run_scenario(&scenario, options)?;
    let written = render_report(&result, out_dir, &ReportFormat::ALL)?;
    let json = written
        .into_iter()
        .find(|p| p.ends_with("result.json"))
        .context("report did not include result.json")?;
    Ok((result, json))
}

/// A solved day, as written by `run --dump-instances` and read by `solve`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceDump {
    pub route_id: String,
    pub load_tons: f64,
    pub instance: ChargeInstance,
    pub plan: Option<ChargePlan>,
}

/// Writes the representative day of every chosen route to `dir/<route_id>.json`.
pub fn dump_instances(scenario: &Scenario, result: &ScenarioResult, dir: &Path) -> anyhow::Result<usize> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut count = 0;
    for pair in &result.pairs {
        let key = (pair.origin.clone(), pair.destination.clone());
        let Some(route) = scenario.routes.get(&key).and_then(|rs| rs.iter().find(|r| r.route_id == pair.route_id))
        else {
            continue;
        };
        let instance = day_instance(route, &scenario.spec, pair.load_tons)?;
        let dump = InstanceDump {
            route_id: route.route_id.clone(),
            load_tons: pair.load_tons,
            plan: solve(&instance).ok(),
            instance,
        };
        let path = dir.join(format!("{}.json", route.route_id.replace(' ', "_")));
        fs::write(&path, serde_json::to_string_pretty(&dump)?).with_context(|| format!("writing {}", path.display()))?;
        count += 1;
    }
    Ok(count)
}

/// Reads either a bare instance or an [`InstanceDump`].
pub fn read_instance(path: &Path) -> anyhow::Result<ChargeInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(dump) = serde_json::from_str::<InstanceDump>(&text) {
        return Ok(dump.instance);
    }
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
