//! Year-long fleet evaluation over all origin-destination pairs.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{price_route, DataError, DieselPriceTable, RegionData, ScenarioSettings};
use crate::network::{k_fastest_routes, NetworkError, NodeId, Route};
use crate::report::{self, ReportError, ScenarioResult, SweepPoint};
use crate::solver::{solve_day, ChargePlan, RouteSolveError};
use crate::vehicle::{bev_emissions, icev_fuel, EmissionFactors, VehicleError, VehicleSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreightDemand {
    pub origin: String,
    pub destination: String,
    pub tons_per_year: f64,
}

impl FreightDemand {
    pub fn key(&self) -> (String, String) {
        (self.origin.clone(), self.destination.clone())
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{origin} -> {destination}: no candidate routes")]
    NoRoutes { origin: String, destination: String },
    #[error("{origin} -> {destination}: every route is infeasible: {}", reasons.join("; "))]
    AllInfeasible {
        origin: String,
        destination: String,
        reasons: Vec<String>,
    },
    #[error("{origin} -> {destination}: {source}")]
    Pair {
        origin: String,
        destination: String,
        #[source]
        source: Box<ScenarioError>,
    },
    #[error("no feasible route results to choose from")]
    NoFeasibleRoute,
    #[error("unknown city `{0}`")]
    UnknownCity(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Solve(#[from] RouteSolveError),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl ScenarioError {
    fn for_pair(self, d: &FreightDemand) -> Self {
        match self {
            e @ (ScenarioError::AllInfeasible { .. } | ScenarioError::NoRoutes { .. } | ScenarioError::Pair { .. }) => e,
            e => ScenarioError::Pair {
                origin: d.origin.clone(),
                destination: d.destination.clone(),
                source: Box::new(e),
            },
        }
    }

    /// True when the failure is a charging infeasibility rather than bad input.
    pub fn is_infeasibility(&self) -> bool {
        match self {
            ScenarioError::AllInfeasible { .. } | ScenarioError::NoFeasibleRoute => true,
            ScenarioError::Pair { source, .. } => source.is_infeasibility(),
            ScenarioError::Solve(e) => matches!(e.source, crate::solver::SolveError::Infeasible(_)),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripPlan {
    pub trips: u64,
    /// Tons carried on every trip.
    pub load_tons: f64,
}

/// Daily trips needed for an annual tonnage, with the load spread evenly.
///
/// Panics unless `capacity_tons > 0` and `days ≥ 1`.
pub fn trips_per_day(tons_per_year: f64, capacity_tons: f64, days: u32) -> TripPlan {
    assert!(capacity_tons > 0.0 && days >= 1);
    let daily = tons_per_year / f64::from(days);
    if !(daily > 0.0) {
        return TripPlan { trips: 0, load_tons: 0.0 };
    }
    // absorb representation error so an exact multiple of the capacity does not round up
    let trips = (daily / capacity_tons - 1e-9).ceil().max(1.0);
    TripPlan {
        trips: trips as u64,
        load_tons: (daily / trips).min(capacity_tons),
    }
}

/// How the days of the year are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DayMode {
    /// Solve one day and multiply by the number of days. Valid because no
    /// input varies by day.
    #[default]
    Scaled,
    /// Solve every day separately and accumulate.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteCharge {
    pub k: usize,
    pub node_id: NodeId,
    pub county: String,
    pub utility_id: String,
    /// Carbon-intensity region the energy is booked to.
    pub region: String,
    /// Grid energy over the year, all trips, kWh.
    pub kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteYearResult {
    pub route_id: String,
    pub cost_usd: f64,
    pub co2_kg: f64,
    pub energy_kwh: f64,
    pub charge_by_site: Vec<SiteCharge>,
    pub trips_per_day: u64,
    pub load_tons: f64,
    pub days: u32,
}

fn site_regions(route: &Route, factors: &EmissionFactors) -> Result<Vec<String>, VehicleError> {
    let mut missing = Vec::new();
    let regions = route
        .sites
        .iter()
        .map(|s| match factors.region_for(&s.utility_id, &s.county) {
            Some(r) => r.to_string(),
            None => {
                missing.push(format!("{}/{}", s.utility_id, s.county));
                String::new()
            }
        })
        .collect();
    if missing.is_empty() {
        Ok(regions)
    } else {
        Err(VehicleError::MissingFactor(missing))
    }
}

/// One route's BEV totals for a year of the given demand.
pub fn evaluate_route_year(
    route: &Route,
    demand: &FreightDemand,
    spec: &VehicleSpec,
    factors: &EmissionFactors,
    days: u32,
    mode: DayMode,
) -> Result<RouteYearResult, ScenarioError> {
    if days == 0 {
        return Err(ScenarioError::Invalid("days must be at least 1".into()));
    }
    if route.origin_city != demand.origin || route.destination_city != demand.destination {
        return Err(ScenarioError::Invalid(format!(
            "route {} does not serve {} -> {}",
            route.route_id, demand.origin, demand.destination
        )));
    }
    let regions = site_regions(route, factors)?;
    let trip = trips_per_day(demand.tons_per_year, spec.capacity_tons, days);
    let trips = trip.trips as f64;
    let mut kwh = vec![0.0; route.sites.len()];
    let mut cost = 0.0;
    if trip.trips > 0 {
        match mode {
            DayMode::Scaled => {
                let plan = solve_day(route, spec, trip.load_tons)?;
                let n = trips * f64::from(days);
                for (acc, e) in kwh.iter_mut().zip(&plan.e_plus) {
                    *acc = e * n;
                }
                cost = plan.total_cost * n;
            }
            DayMode::Literal => {
                for _day in 0..days {
                    let plan: ChargePlan = solve_day(route, spec, trip.load_tons)?;
                    for (acc, e) in kwh.iter_mut().zip(&plan.e_plus) {
                        *acc += e * trips;
                    }
                    cost += plan.total_cost * trips;
                }
            }
        }
    }

    let mut by_region: BTreeMap<String, f64> = BTreeMap::new();
    for (r, e) in regions.iter().zip(&kwh) {
        *by_region.entry(r.clone()).or_default() += e;
    }
    let co2_kg = bev_emissions(&by_region, factors)?;
    let charge_by_site: Vec<SiteCharge> = route
        .sites
        .iter()
        .zip(regions)
        .zip(&kwh)
        .map(|((s, region), &e)| SiteCharge {
            k: s.k,
            node_id: s.node_id,
            county: s.county.clone(),
            utility_id: s.utility_id.clone(),
            region,
            kwh: e,
        })
        .collect();
    Ok(RouteYearResult {
        route_id: route.route_id.clone(),
        cost_usd: cost,
        co2_kg,
        energy_kwh: kwh.iter().sum(),
        charge_by_site,
        trips_per_day: trip.trips,
        load_tons: trip.load_tons,
        days,
    })
}

/// Cheapest result; ties go to lower CO₂, then the smaller route id.
pub fn best_route(results: &[RouteYearResult]) -> Result<&RouteYearResult, ScenarioError> {
    results
        .iter()
        .min_by(|a, b| {
            a.cost_usd
                .total_cmp(&b.cost_usd)
                .then(a.co2_kg.total_cmp(&b.co2_kg))
                .then_with(|| a.route_id.cmp(&b.route_id))
        })
        .ok_or(ScenarioError::NoFeasibleRoute)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CandidateOutcome {
    Feasible {
        route_id: String,
        cost_usd: f64,
        co2_kg: f64,
    },
    Infeasible {
        route_id: String,
        reason: String,
    },
}

/// Diesel use of the ICEV fleet on one route over the year.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IcevYear {
    pub gallons_by_county: BTreeMap<String, f64>,
    pub gallons: f64,
    pub energy_mwh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub demand: FreightDemand,
    pub route: Route,
    pub bev: RouteYearResult,
    pub icev: IcevYear,
    pub candidates: Vec<CandidateOutcome>,
}

fn icev_year(spec: &VehicleSpec, route: &Route, trips_per_year: f64) -> IcevYear {
    let fuel = icev_fuel(spec, route);
    let gallons_by_county: BTreeMap<String, f64> = fuel
        .gallons_by_county
        .into_iter()
        .map(|(c, g)| (c, g * trips_per_year))
        .collect();
    let gallons: f64 = gallons_by_county.values().sum();
    IcevYear {
        gallons,
        energy_mwh: gallons * crate::vehicle::DIESEL_MWH_PER_GALLON,
        gallons_by_county,
    }
}

/// Fully specified scenario: demand, priced candidate routes and tables.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub region: String,
    pub od_pairs: Vec<FreightDemand>,
    pub routes: BTreeMap<(String, String), Vec<Route>>,
    pub spec: VehicleSpec,
    pub days: u32,
    pub bev_fraction: f64,
    pub sweep_steps: usize,
    pub diesel: DieselPriceTable,
    pub factors: EmissionFactors,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.spec.validate()?;
        if !(0.0..=1.0).contains(&self.bev_fraction) {
            return Err(ScenarioError::Invalid(format!("bev_fraction {} outside [0, 1]", self.bev_fraction)));
        }
        if self.days == 0 {
            return Err(ScenarioError::Invalid("days must be at least 1".into()));
        }
        if self.sweep_steps < 2 {
            return Err(ScenarioError::Invalid("sweep_steps must be at least 2".into()));
        }
        for d in &self.od_pairs {
            match self.routes.get(&d.key()) {
                Some(r) if !r.is_empty() => {
                    if let Some(bad) = r.iter().find(|r| !r.is_priced()) {
                        return Err(ScenarioError::Invalid(format!("route {} is not priced", bad.route_id)));
                    }
                }
                _ => {
                    return Err(ScenarioError::NoRoutes {
                        origin: d.origin.clone(),
                        destination: d.destination.clone(),
                    })
                }
            }
        }
        Ok(())
    }
}

/// Generates and prices candidate routes for every freight pair whose cities
/// are both in `settings.cities` (all pairs when unset).
pub fn prepare_scenario(region: &RegionData, settings: &ScenarioSettings) -> Result<Scenario, ScenarioError> {
    if let Some(cities) = &settings.cities {
        if let Some(c) = cities.iter().find(|c| !region.graph.city_index().contains_key(*c)) {
            return Err(ScenarioError::UnknownCity(c.clone()));
        }
    }
    let selected = |c: &str| settings.cities.as_ref().is_none_or(|cs| cs.iter().any(|x| x == c));
    let mut od_pairs: Vec<FreightDemand> = region
        .freight
        .iter()
        .filter(|d| selected(&d.origin) && selected(&d.destination))
        .cloned()
        .collect();
    od_pairs.sort_by(|a, b| (&a.origin, &a.destination).cmp(&(&b.origin, &b.destination)));
    let routes = od_pairs
        .par_iter()
        .map(|d| {
            let generated = k_fastest_routes(
                &region.graph,
                &d.origin,
                &d.destination,
                settings.k_routes,
                settings.spacing_km,
            )
            .map_err(|e| match e {
                NetworkError::UnknownCity(c) => ScenarioError::UnknownCity(c),
                e => ScenarioError::from(e).for_pair(d),
            })?;
            let priced = generated
                .iter()
                .map(|r| price_route(r, &region.tariffs))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ScenarioError::from(e).for_pair(d))?;
            Ok((d.key(), priced))
        })
        .collect::<Result<BTreeMap<_, _>, ScenarioError>>()?;
    Ok(Scenario {
        region: settings.region.clone(),
        od_pairs,
        routes,
        spec: region.spec().clone(),
        days: settings.days,
        bev_fraction: settings.bev_fraction,
        sweep_steps: settings.sweep_steps,
        diesel: region.diesel.clone(),
        factors: region.factors.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub mode: DayMode,
    /// Evaluate pairs on the rayon pool.
    pub parallel: bool,
    /// Drop failing pairs (listed in the result) instead of failing the run.
    pub allow_partial: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            mode: DayMode::Scaled,
            parallel: true,
            allow_partial: false,
        }
    }
}

/// Evaluates every candidate route of one pair and keeps the best.
pub fn evaluate_pair(
    scenario: &Scenario,
    demand: &FreightDemand,
    mode: DayMode,
) -> Result<PairResult, ScenarioError> {
    let routes = scenario
        .routes
        .get(&demand.key())
        .filter(|r| !r.is_empty())
        .ok_or_else(|| ScenarioError::NoRoutes {
            origin: demand.origin.clone(),
            destination: demand.destination.clone(),
        })?;
    let mut feasible = Vec::new();
    let mut candidates = Vec::new();
    for route in routes {
        match evaluate_route_year(route, demand, &scenario.spec, &scenario.factors, scenario.days, mode) {
            Ok(r) => {
                candidates.push(CandidateOutcome::Feasible {
                    route_id: r.route_id.clone(),
                    cost_usd: r.cost_usd,
                    co2_kg: r.co2_kg,
                });
                feasible.push(r);
            }
            Err(ScenarioError::Solve(e)) if matches!(e.source, crate::solver::SolveError::Infeasible(_)) => {
                candidates.push(CandidateOutcome::Infeasible {
                    route_id: e.route_id.clone(),
                    reason: e.source.to_string(),
                });
            }
            Err(e) => return Err(e.for_pair(demand)),
        }
    }
    let best = match best_route(&feasible) {
        Ok(b) => b.clone(),
        Err(_) => {
            return Err(ScenarioError::AllInfeasible {
                origin: demand.origin.clone(),
                destination: demand.destination.clone(),
                reasons: candidates
                    .iter()
                    .filter_map(|c| match c {
                        CandidateOutcome::Infeasible { route_id, reason } => Some(format!("{route_id}: {reason}")),
                        CandidateOutcome::Feasible { .. } => None,
                    })
                    .collect(),
            })
        }
    };
    let route = routes
        .iter()
        .find(|r| r.route_id == best.route_id)
        .expect("best route comes from the candidate list")
        .clone();
    let trips_per_year = best.trips_per_day as f64 * f64::from(scenario.days);
    Ok(PairResult {
        demand: demand.clone(),
        icev: icev_year(&scenario.spec, &route, trips_per_year),
        route,
        bev: best,
        candidates,
    })
}

/// Runs the whole scenario and aggregates it, including the penetration sweep.
pub fn run_scenario(scenario: &Scenario, options: RunOptions) -> Result<ScenarioResult, ScenarioError> {
    let started = Instant::now();
    scenario.validate()?;
    let mut pairs: Vec<&FreightDemand> = scenario.od_pairs.iter().collect();
    pairs.sort_by(|a, b| (&a.origin, &a.destination).cmp(&(&b.origin, &b.destination)));
    let eval = |d: &&FreightDemand| evaluate_pair(scenario, d, options.mode);
    // collect keeps input order, so the reduction below is the same either way
    let outcomes: Vec<Result<PairResult, ScenarioError>> = if options.parallel {
        pairs.par_iter().map(eval).collect()
    } else {
        pairs.iter().map(eval).collect()
    };
    let mut done = Vec::with_capacity(outcomes.len());
    let mut failed = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(p) => done.push(p),
            Err(e) if options.allow_partial => failed.push(e.to_string()),
            Err(e) => return Err(e),
        }
    }
    let mut result = report::aggregate(&done, scenario)?;
    result.failed_pairs = failed;
    result.sweep = sweep_points(&result, scenario.sweep_steps);
    result.runtime_s = started.elapsed().as_secs_f64();
    Ok(result)
}

/// `f·bev + (1 − f)·icev`.
pub fn blend(fraction: f64, bev: f64, icev: f64) -> f64 {
    fraction * bev + (1.0 - fraction) * icev
}

/// Fleet totals at fractions `0, 1/(steps−1), …, 1`, from the two pure-fleet totals.
pub fn sweep_points(result: &ScenarioResult, steps: usize) -> Vec<SweepPoint> {
    let steps = steps.max(2);
    (0..steps)
        .map(|i| {
            let f = if i + 1 == steps { 1.0 } else { i as f64 / (steps - 1) as f64 };
            SweepPoint {
                bev_fraction: f,
                cost_usd: blend(f, result.bev.cost_usd, result.icev.cost_usd),
                co2_kg: blend(f, result.bev.co2_kg, result.icev.co2_kg),
            }
        })
        .collect()
}

/// Runs the scenario once and returns its sweep with `steps` points.
pub fn penetration_sweep(
    scenario: &Scenario,
    steps: usize,
    options: RunOptions,
) -> Result<Vec<SweepPoint>, ScenarioError> {
    if steps < 2 {
        return Err(ScenarioError::Invalid("sweep needs at least 2 steps".into()));
    }
    let result = run_scenario(scenario, options)?;
    Ok(sweep_points(&result, steps))
}
