//! Routing, charging-cost optimization and emissions accounting for
//! battery-electric freight fleets.
//!
//! A region is a road graph plus tariff, diesel, carbon and freight tables
//! ([`data`]). For each origin-destination pair the k fastest routes are
//! generated with charging sites along them ([`network`]), each route's daily
//! charging plan is optimized exactly ([`solver`]), and the year is rolled up
//! per pair and for the fleet ([`scenario`], [`report`]).

// NaN must fail range checks, so `!(a <= b)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod network;
pub mod oracle;
pub mod report;
pub mod scenario;
pub mod solver;
pub mod vehicle;

pub use data::{load_config, load_tables, DataError, RegionData, ScenarioConfig};
pub use network::{ChargingSite, NetworkError, RoadGraph, Route, Segment};
pub use report::{ScenarioResult, SweepPoint};
pub use scenario::{prepare_scenario, run_scenario, FreightDemand, RunOptions, Scenario, ScenarioError};
pub use solver::{solve, ChargeInstance, ChargePlan, SolveError};
pub use vehicle::{EmissionFactors, VehicleSpec};
