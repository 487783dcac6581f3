//! Fleet-level aggregation and report files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{CandidateOutcome, PairResult, Scenario};
use crate::vehicle::{bev_emissions, icev_emissions, VehicleError, DIESEL_MWH_PER_GALLON};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no diesel price for county `{0}` and no `*` row")]
    MissingDieselPrice(String),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BevTotals {
    pub cost_usd: f64,
    pub co2_kg: f64,
    /// Grid energy purchased, kWh.
    pub energy_kwh: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IcevTotals {
    pub cost_usd: f64,
    pub co2_kg: f64,
    pub energy_mwh: f64,
    pub gallons: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BlendedTotals {
    pub bev_fraction: f64,
    pub cost_usd: f64,
    pub co2_kg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub bev_fraction: f64,
    pub cost_usd: f64,
    pub co2_kg: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChoroplethEntry {
    pub energy_kwh: f64,
    pub reduction_kgco2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub origin: String,
    pub destination: String,
    pub tons_per_year: f64,
    pub trips_per_day: u64,
    pub load_tons: f64,
    pub route_id: String,
    pub bev: BevTotals,
    pub icev: IcevTotals,
    pub candidates: Vec<CandidateOutcome>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub region: String,
    pub days: u32,
    pub bev: BevTotals,
    pub icev: IcevTotals,
    pub blended: BlendedTotals,
    /// ICEV energy over BEV energy, both in MWh. `None` when the BEV fleet buys nothing.
    pub energy_ratio: Option<f64>,
    pub charge_by_utility: BTreeMap<String, f64>,
    pub fuel_by_county: BTreeMap<String, f64>,
    pub energy_by_county: BTreeMap<String, f64>,
    pub bev_co2_by_county: BTreeMap<String, f64>,
    pub icev_co2_by_county: BTreeMap<String, f64>,
    pub emission_reduction_by_county: BTreeMap<String, f64>,
    pub choropleth: BTreeMap<String, ChoroplethEntry>,
    pub pairs: Vec<PairSummary>,
    pub failed_pairs: Vec<String>,
    pub sweep: Vec<SweepPoint>,
    pub runtime_s: f64,
}

fn add(map: &mut BTreeMap<String, f64>, key: &str, v: f64) {
    *map.entry(key.to_string()).or_default() += v;
}

/// Folds per-pair results (in the given order) into fleet totals and maps.
///
/// Every county on a chosen route gets an entry in the county maps, zero if
/// nothing is attributed to it. BEV energy goes to the charging site's county,
/// diesel to the county where each segment starts.
pub fn aggregate(pairs: &[PairResult], scenario: &Scenario) -> Result<ScenarioResult, ReportError> {
    let spec = &scenario.spec;
    let mut out = ScenarioResult {
        region: scenario.region.clone(),
        days: scenario.days,
        ..ScenarioResult::default()
    };
    let mut touched_counties = BTreeSet::new();
    let mut touched_utilities = BTreeSet::new();
    let mut region_kwh: BTreeMap<String, f64> = BTreeMap::new();

    for p in pairs {
        for s in &p.route.sites {
            touched_counties.insert(s.county.clone());
            touched_utilities.insert(s.utility_id.clone());
        }
        for s in &p.bev.charge_by_site {
            add(&mut out.charge_by_utility, &s.utility_id, s.kwh);
            add(&mut out.energy_by_county, &s.county, s.kwh);
            add(&mut region_kwh, &s.region, s.kwh);
            let intensity = scenario
                .factors
                .intensity(&s.region)
                .ok_or_else(|| VehicleError::MissingFactor(vec![s.region.clone()]))?;
            add(&mut out.bev_co2_by_county, &s.county, s.kwh * intensity / 1000.0);
        }
        let mut pair_icev_cost = 0.0;
        for (county, g) in &p.icev.gallons_by_county {
            let price = scenario
                .diesel
                .price(county)
                .ok_or_else(|| ReportError::MissingDieselPrice(county.clone()))?;
            pair_icev_cost += g * price;
            add(&mut out.fuel_by_county, county, *g);
        }
        out.bev.cost_usd += p.bev.cost_usd;
        out.bev.energy_kwh += p.bev.energy_kwh;
        out.pairs.push(PairSummary {
            origin: p.demand.origin.clone(),
            destination: p.demand.destination.clone(),
            tons_per_year: p.demand.tons_per_year,
            trips_per_day: p.bev.trips_per_day,
            load_tons: p.bev.load_tons,
            route_id: p.bev.route_id.clone(),
            bev: BevTotals {
                cost_usd: p.bev.cost_usd,
                co2_kg: p.bev.co2_kg,
                energy_kwh: p.bev.energy_kwh,
            },
            icev: IcevTotals {
                cost_usd: pair_icev_cost,
                co2_kg: icev_emissions(p.icev.gallons, spec)?,
                energy_mwh: p.icev.energy_mwh,
                gallons: p.icev.gallons,
            },
            candidates: p.candidates.clone(),
        });
    }

    for c in &touched_counties {
        for map in [
            &mut out.fuel_by_county,
            &mut out.energy_by_county,
            &mut out.bev_co2_by_county,
        ] {
            map.entry(c.clone()).or_insert(0.0);
        }
    }
    for u in &touched_utilities {
        out.charge_by_utility.entry(u.clone()).or_insert(0.0);
    }

    out.bev.co2_kg = bev_emissions(&region_kwh, &scenario.factors)?;
    out.icev.gallons = out.fuel_by_county.values().sum();
    out.icev.energy_mwh = out.icev.gallons * DIESEL_MWH_PER_GALLON;
    out.icev.co2_kg = icev_emissions(out.icev.gallons, spec)?;
    for (county, g) in &out.fuel_by_county {
        if *g > 0.0 {
            let price = scenario
                .diesel
                .price(county)
                .ok_or_else(|| ReportError::MissingDieselPrice(county.clone()))?;
            out.icev.cost_usd += g * price;
        }
        out.icev_co2_by_county
            .insert(county.clone(), g * spec.diesel_kgco2_per_gal);
    }
    for c in &touched_counties {
        let reduction = out.icev_co2_by_county[c] - out.bev_co2_by_county[c];
        out.emission_reduction_by_county.insert(c.clone(), reduction);
        out.choropleth.insert(
            c.clone(),
            ChoroplethEntry {
                energy_kwh: out.energy_by_county[c],
                reduction_kgco2: reduction,
            },
        );
    }

    let f = scenario.bev_fraction;
    out.blended = BlendedTotals {
        bev_fraction: f,
        cost_usd: crate::scenario::blend(f, out.bev.cost_usd, out.icev.cost_usd),
        co2_kg: crate::scenario::blend(f, out.bev.co2_kg, out.icev.co2_kg),
    };
    out.energy_ratio = (out.bev.energy_kwh > 0.0).then(|| out.icev.energy_mwh / (out.bev.energy_kwh / 1000.0));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown];
}

/// Map entries ordered by descending value, then key.
fn ranked(map: &BTreeMap<String, f64>) -> Vec<(&str, f64)> {
    let mut v: Vec<(&str, f64)> = map.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    v
}

fn keyed_csv(header: &str, map: &BTreeMap<String, f64>) -> String {
    let mut s = format!("{header}\n");
    for (k, v) in ranked(map) {
        writeln!(s, "{k},{v}").unwrap();
    }
    s
}

/// Table rows for the two fleets: (fleet, cost USD, CO₂ kg, energy MWh).
fn comparison_rows(r: &ScenarioResult) -> Vec<(&'static str, f64, f64, f64)> {
    if r.pairs.is_empty() {
        return Vec::new();
    }
    vec![
        ("BEV", r.bev.cost_usd, r.bev.co2_kg, r.bev.energy_kwh / 1000.0),
        ("ICEV", r.icev.cost_usd, r.icev.co2_kg, r.icev.energy_mwh),
    ]
}

pub fn comparison_markdown(r: &ScenarioResult) -> String {
    let mut s = String::from("| Fleet | Cost (USD) | Emission (kg CO2) | Energy (MWh) |\n|---|---:|---:|---:|\n");
    for (fleet, cost, co2, mwh) in comparison_rows(r) {
        writeln!(s, "| {fleet} | {cost:.2} | {co2:.2} | {mwh:.3} |").unwrap();
    }
    s
}

pub fn comparison_csv(r: &ScenarioResult) -> String {
    let mut s = String::from("fleet,cost_usd,co2_kg,energy_mwh\n");
    for (fleet, cost, co2, mwh) in comparison_rows(r) {
        writeln!(s, "{fleet},{cost},{co2},{mwh}").unwrap();
    }
    s
}

pub fn sweep_csv(r: &ScenarioResult) -> String {
    let mut s = String::from("bev_fraction,cost_usd,co2_kg\n");
    for p in &r.sweep {
        writeln!(s, "{},{},{}", p.bev_fraction, p.cost_usd, p.co2_kg).unwrap();
    }
    s
}

fn json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization");
    s.push('\n');
    s
}

/// Renders the report text for each requested format as `(file name, contents)`.
pub fn render_files(r: &ScenarioResult, formats: &[ReportFormat]) -> Vec<(&'static str, String)> {
    let mut files = Vec::new();
    for f in formats {
        match f {
            ReportFormat::Json => {
                files.push(("result.json", json(r)));
                files.push(("choropleth.json", json(&r.choropleth)));
            }
            ReportFormat::Csv => {
                files.push(("comparison.csv", comparison_csv(r)));
                files.push(("utility_demand.csv", keyed_csv("utility_id,energy_kwh", &r.charge_by_utility)));
                files.push(("county_fuel.csv", keyed_csv("county,gallons", &r.fuel_by_county)));
                files.push(("county_energy.csv", keyed_csv("county,energy_kwh", &r.energy_by_county)));
                files.push((
                    "county_reduction.csv",
                    keyed_csv("county,reduction_kgco2", &r.emission_reduction_by_county),
                ));
                files.push(("sweep.csv", sweep_csv(r)));
            }
            ReportFormat::Markdown => files.push(("comparison.md", comparison_markdown(r))),
        }
    }
    files
}

/// Writes the report files into `dir` (created if needed) and returns their paths.
pub fn render_report(r: &ScenarioResult, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>, ReportError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for (name, text) in render_files(r, formats) {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
