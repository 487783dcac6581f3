//! Per-route, per-day charging-cost minimisation.
//!
//! Sites `0..=K` lie along a route; segment `k` joins site `k` to `k + 1`.
//! At each site the truck either skips charging or draws `e⁺ₖ` from the grid,
//! which adds `η⁺·e⁺ₖ` to the battery. Segment `k` removes `e⁻ₖ / η⁻`.
//! A plan must
//!
//! * keep the state of charge in `[E_min, E_max]` after every charge and
//!   every segment,
//! * gate each charge: `E_min + max(neighbouring segment draw) ≤ η⁺·e⁺ₖ ≤ E_max`
//!   when charging (boundary sites only have one neighbour),
//! * end the day with at least the terminal state of charge,
//! * respect the per-stop power cap `e⁺ₖ ≤ P_max · dwell`,
//!
//! and minimise `Σ λₖ e⁺ₖ`. [`solve`] is an exact branch and bound over the
//! charge/skip decisions, bounded by the exact piecewise-linear cost-to-go of
//! the undecided sites so it walks straight down an optimal branch. Among optimal plans it returns the one with the
//! lexicographically smallest decision vector, then the least energy bought.

mod check;
mod pwl;
mod reach;
mod value;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Route;
use crate::vehicle::{segment_discharge, VehicleError, VehicleSpec};

pub use check::{check_plan, Violation, PLAN_TOLERANCE};
pub use reach::Infeasibility;

use pwl::ConvexPwl;
use value::Envelope;

/// Largest number of sites [`solve`] accepts.
pub const MAX_SITES: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("{0}")]
    Vehicle(#[from] VehicleError),
    #[error("site {0} has no energy price")]
    Unpriced(usize),
    #[error("infeasible: {0}")]
    Infeasible(Infeasibility),
    #[error("{0} sites exceeds the supported maximum")]
    TooManySites(usize),
}

#[derive(Debug, Error, PartialEq)]
#[error("route {route_id}: {source}")]
pub struct RouteSolveError {
    pub route_id: String,
    #[source]
    pub source: SolveError,
}

/// One day's charging problem on a fixed route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeInstance {
    /// Energy price at each site, USD/MWh.
    pub prices: Vec<f64>,
    /// Energy drawn on each segment (`e⁻`), kWh.
    pub seg_energy: Vec<f64>,
    pub spec: VehicleSpec,
}

impl ChargeInstance {
    pub fn site_count(&self) -> usize {
        self.prices.len()
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        self.spec.validate()?;
        if self.prices.is_empty() {
            return Err(SolveError::InvalidInstance("no sites".into()));
        }
        if self.prices.len() != self.seg_energy.len() + 1 {
            return Err(SolveError::InvalidInstance(format!(
                "{} sites but {} segments",
                self.prices.len(),
                self.seg_energy.len()
            )));
        }
        if let Some(k) = self.prices.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(SolveError::InvalidInstance(format!("price at site {k} is {}", self.prices[k])));
        }
        if let Some(k) = self.seg_energy.iter().position(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(SolveError::InvalidInstance(format!(
                "segment {k} energy is {}",
                self.seg_energy[k]
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargePlan {
    pub x: Vec<bool>,
    /// Grid energy drawn at each site, kWh.
    pub e_plus: Vec<f64>,
    /// Charging power at each site, kW.
    pub p_plus: Vec<f64>,
    pub total_cost: f64,
    /// State of charge after the charge at site 0, after segment 0, after the
    /// charge at site 1, ... , after the charge at site K.
    pub soc_trace: Vec<f64>,
}

impl ChargePlan {
    pub fn energy_kwh(&self) -> f64 {
        self.e_plus.iter().sum()
    }

    /// Builds a plan from battery-side charge amounts.
    pub(crate) fn from_gains(instance: &ChargeInstance, x: Vec<bool>, gains: &[f64]) -> Self {
        let spec = &instance.spec;
        let e_plus: Vec<f64> = gains.iter().map(|g| g / spec.eta_charge).collect();
        let p_plus = e_plus.iter().map(|e| e / spec.charge_dwell_h).collect();
        let total_cost = instance
            .prices
            .iter()
            .zip(&e_plus)
            .map(|(price, e)| price * e / 1000.0)
            .sum();
        Self {
            soc_trace: soc_trace(instance, &e_plus),
            x,
            e_plus,
            p_plus,
            total_cost,
        }
    }
}

pub(crate) fn soc_trace(instance: &ChargeInstance, e_plus: &[f64]) -> Vec<f64> {
    let spec = &instance.spec;
    let mut soc = spec.e0_kwh;
    let mut trace = Vec::with_capacity(2 * e_plus.len());
    for (k, e) in e_plus.iter().enumerate() {
        soc += e * spec.eta_charge;
        trace.push(soc);
        if let Some(d) = instance.seg_energy.get(k) {
            soc -= d / spec.eta_discharge;
            trace.push(soc);
        }
    }
    trace
}

/// The instance restated on battery-side quantities. `g` below always means
/// energy added to the battery (`η⁺·e⁺`) and `G_k` the running total of `g`
/// over sites `0..=k`.
#[derive(Debug, Clone)]
pub(crate) struct Model {
    pub n: usize,
    /// Battery draw of each segment.
    pub draw: Vec<f64>,
    /// Minimum battery gain when charging.
    pub gate: Vec<f64>,
    /// Maximum battery gain at a stop.
    pub cap: Vec<f64>,
    /// Bounds on `G_k`.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Cost in USD per kWh of battery gain.
    pub weight: Vec<f64>,
    pub e0: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub e_terminal: f64,
    pub tol: f64,
}

impl Model {
    pub fn new(instance: &ChargeInstance) -> Self {
        let spec = &instance.spec;
        let n = instance.prices.len();
        let draw: Vec<f64> = instance
            .seg_energy
            .iter()
            .map(|e| e / spec.eta_discharge)
            .collect();
        let stop_cap = (spec.max_stop_energy_kwh() * spec.eta_charge).min(spec.e_max_kwh);
        let gate = (0..n)
            .map(|k| {
                let before = if k > 0 { draw[k - 1] } else { 0.0 };
                let after = draw.get(k).copied().unwrap_or(0.0);
                spec.e_min_kwh + before.max(after)
            })
            .collect();

        // consumed[k] = total draw of segments 0..k
        let mut consumed = Vec::with_capacity(n + 1);
        consumed.push(0.0);
        for d in &draw {
            consumed.push(consumed.last().unwrap() + d);
        }
        let e0 = spec.e0_kwh;
        let lower = (0..n)
            .map(|k| {
                if k + 1 < n {
                    spec.e_min_kwh - e0 + consumed[k + 1]
                } else {
                    spec.e_terminal() - e0 + consumed[k]
                }
            })
            .collect();
        let upper = (0..n).map(|k| spec.e_max_kwh - e0 + consumed[k]).collect();
        let weight = instance
            .prices
            .iter()
            .map(|p| p / (1000.0 * spec.eta_charge))
            .collect();

        Self {
            n,
            draw,
            gate,
            cap: vec![stop_cap; n],
            lower,
            upper,
            weight,
            e0,
            e_min: spec.e_min_kwh,
            e_max: spec.e_max_kwh,
            e_terminal: spec.e_terminal(),
            tol: 1e-11 * spec.e_max_kwh.max(1.0),
        }
    }

    pub fn can_charge(&self, k: usize) -> bool {
        self.gate[k] <= self.cap[k] + self.tol
    }

    /// Box on `g_k` for a fixed decision.
    pub fn decision_box(&self, k: usize, charge: bool) -> (f64, f64) {
        if charge {
            (self.gate[k], self.cap[k].max(self.gate[k]))
        } else {
            (0.0, 0.0)
        }
    }

    fn extend(&self, f: &mut ConvexPwl, k: usize, (lo, hi): (f64, f64)) -> bool {
        f.add_box(lo, hi, self.weight[k]);
        f.restrict(self.lower[k], self.upper[k], self.tol)
    }
}

fn tie_tolerance(cost: f64) -> f64 {
    1e-9 * cost.abs() + 1e-12
}

struct Incumbent {
    cost: f64,
    x: Vec<bool>,
    gains: Vec<f64>,
}

struct Search<'a> {
    model: &'a Model,
    // stack[k] = value function after fixing decisions 0..=k
    stack: Vec<ConvexPwl>,
    // to_go[k] = exact cost of sites k.. given the gain before site k
    to_go: Vec<Envelope>,
    x: Vec<bool>,
    best: Option<Incumbent>,
}

impl Search<'_> {
    fn top(&self) -> ConvexPwl {
        self.stack.last().cloned().unwrap_or_else(|| ConvexPwl::point(0.0))
    }

    fn bound(&self) -> Option<f64> {
        let f = self.top();
        if self.stack.len() == self.model.n {
            return Some(f.base());
        }
        self.to_go[self.stack.len()].min_with(&f, self.model.tol)
    }

    fn visit(&mut self) {
        let Some(bound) = self.bound() else { return };
        if let Some(best) = &self.best {
            // later leaves are lexicographically larger, so ties lose
            if bound >= best.cost - tie_tolerance(best.cost) {
                return;
            }
        }
        let depth = self.stack.len();
        if depth == self.model.n {
            let gains = self.reconstruct();
            self.best = Some(Incumbent {
                cost: bound,
                x: self.x.clone(),
                gains,
            });
            return;
        }
        for charge in [false, true] {
            if charge && !self.model.can_charge(depth) {
                continue;
            }
            let mut f = self.top();
            if !self.model.extend(&mut f, depth, self.model.decision_box(depth, charge)) {
                continue;
            }
            self.stack.push(f);
            self.x.push(charge);
            self.visit();
            self.x.pop();
            self.stack.pop();
        }
    }

    /// Battery gains of the cheapest, least-energy plan for the fully fixed
    /// decision vector currently on the stack.
    fn reconstruct(&self) -> Vec<f64> {
        let m = self.model;
        let mut gains = vec![0.0; m.n];
        let mut total = self.stack[m.n - 1].start();
        for k in (0..m.n).rev() {
            let (lo, hi) = m.decision_box(k, self.x[k]);
            if hi <= 0.0 {
                continue;
            }
            let prev = if k > 0 {
                self.stack[k - 1].clone()
            } else {
                ConvexPwl::point(0.0)
            };
            let y = prev.argmin_tilted(m.weight[k], total - hi, total - lo);
            gains[k] = (total - y).max(0.0);
            total = y;
        }
        gains
    }
}

/// Exact minimum-cost charging plan.
pub fn solve(instance: &ChargeInstance) -> Result<ChargePlan, SolveError> {
    instance.validate()?;
    if instance.site_count() > MAX_SITES {
        return Err(SolveError::TooManySites(instance.site_count()));
    }
    let model = Model::new(instance);
    reach::check_feasible(&model).map_err(SolveError::Infeasible)?;

    let mut search = Search {
        model: &model,
        stack: Vec::with_capacity(model.n),
        to_go: value::cost_to_go(&model),
        x: Vec::with_capacity(model.n),
        best: None,
    };
    search.visit();
    let best = search
        .best
        .ok_or(SolveError::Infeasible(Infeasibility::NoPlan))?;
    Ok(ChargePlan::from_gains(instance, best.x, &best.gains))
}

/// Builds the day's instance for a priced route at the given per-trip load.
pub fn day_instance(
    route: &Route,
    spec: &VehicleSpec,
    load_tons: f64,
) -> Result<ChargeInstance, SolveError> {
    let prices = route
        .sites
        .iter()
        .map(|s| s.price.ok_or(SolveError::Unpriced(s.k)))
        .collect::<Result<Vec<_>, _>>()?;
    let seg_energy = route
        .segments
        .iter()
        .map(|seg| segment_discharge(spec, seg, load_tons).map(|e| e.e_discharge_kwh))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ChargeInstance {
        prices,
        seg_energy,
        spec: spec.clone(),
    })
}

/// Solves one day on `route` at load `load_tons`. Plan index `k` is route site `k`.
pub fn solve_day(route: &Route, spec: &VehicleSpec, load_tons: f64) -> Result<ChargePlan, RouteSolveError> {
    day_instance(route, spec, load_tons)
        .and_then(|inst| solve(&inst))
        .map_err(|source| RouteSolveError {
            route_id: route.route_id.clone(),
            source,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn spec(e_max: f64, e_min: f64, e0: f64, e_term: f64) -> VehicleSpec {
        VehicleSpec {
            eta_charge: 1.0,
            eta_discharge: 1.0,
            e_max_kwh: e_max,
            e_min_kwh: e_min,
            e0_kwh: e0,
            e_terminal_kwh: Some(e_term),
            p_max_kw: 1000.0,
            charge_dwell_h: 1.0,
            ..VehicleSpec::default()
        }
    }

    #[test]
    fn no_charging_needed() {
        let inst = ChargeInstance {
            prices: vec![100.0, 100.0],
            seg_energy: vec![50.0],
            spec: spec(300.0, 30.0, 300.0, 30.0),
        };
        let plan = solve(&inst).unwrap();
        assert_eq!(plan.x, vec![false, false]);
        assert_eq!(plan.total_cost, 0.0);
        assert_eq!(plan.soc_trace, vec![300.0, 250.0, 250.0]);
    }

    #[test]
    fn segment_longer_than_battery_window() {
        let inst = ChargeInstance {
            prices: vec![100.0, 100.0],
            seg_energy: vec![280.0],
            spec: spec(300.0, 30.0, 300.0, 30.0),
        };
        assert!(matches!(
            solve(&inst),
            Err(SolveError::Infeasible(Infeasibility::Depleted { segment: 0, .. }))
        ));
    }

    #[test]
    fn gating_blocks_small_top_up() {
        // Two 200 kWh legs, E_max 300, E_min 30: the mid-route stop must add at
        // least 230 kWh but only 200 kWh of headroom is left.
        let inst = ChargeInstance {
            prices: vec![100.0, 50.0, 80.0],
            seg_energy: vec![200.0, 200.0],
            spec: spec(300.0, 30.0, 300.0, 30.0),
        };
        assert!(matches!(solve(&inst), Err(SolveError::Infeasible(_))));
    }

    #[test]
    fn charges_at_cheapest_feasible_site() {
        let inst = ChargeInstance {
            prices: vec![100.0, 50.0, 80.0],
            seg_energy: vec![200.0, 200.0],
            spec: spec(300.0, 0.0, 300.0, 30.0),
        };
        let plan = solve(&inst).unwrap();
        assert_eq!(plan.x, vec![false, true, false]);
        assert!((plan.e_plus[1] - 200.0).abs() < 1e-9);
        assert!((plan.total_cost - 10.0).abs() < 1e-9);
        assert!(check_plan(&inst, &plan).is_empty());
    }

    #[test]
    fn terminal_charge_at_destination() {
        let inst = ChargeInstance {
            prices: vec![90.0, 60.0],
            seg_energy: vec![100.0],
            spec: spec(500.0, 50.0, 300.0, 300.0),
        };
        let plan = solve(&inst).unwrap();
        // arrive with 200, must add at least 150 (gate) and reach 300
        assert_eq!(plan.x, vec![false, true]);
        assert!((plan.e_plus[1] - 150.0).abs() < 1e-9);
        assert!(check_plan(&inst, &plan).is_empty());
    }

    #[test]
    fn single_site_route() {
        let inst = ChargeInstance {
            prices: vec![70.0],
            seg_energy: vec![],
            spec: spec(500.0, 50.0, 300.0, 300.0),
        };
        let plan = solve(&inst).unwrap();
        assert_eq!(plan.x, vec![false]);
        assert_eq!(plan.soc_trace, vec![300.0]);
    }

    #[test]
    fn power_cap_limits_stop() {
        let mut s = spec(1000.0, 0.0, 200.0, 0.0);
        s.p_max_kw = 100.0;
        s.charge_dwell_h = 1.0;
        let inst = ChargeInstance {
            prices: vec![10.0; 5],
            seg_energy: vec![80.0; 4],
            spec: s,
        };
        let plan = solve(&inst).unwrap();
        assert!(plan.e_plus.iter().all(|e| *e <= 100.0 + 1e-9));
        assert_eq!(plan.x.iter().filter(|&&c| c).count(), 2);
        assert!(check_plan(&inst, &plan).is_empty());
    }

    #[test]
    fn malformed_instances() {
        let s = spec(300.0, 30.0, 300.0, 30.0);
        let bad = ChargeInstance {
            prices: vec![1.0],
            seg_energy: vec![1.0],
            spec: s.clone(),
        };
        assert!(matches!(solve(&bad), Err(SolveError::InvalidInstance(_))));
        let bad = ChargeInstance {
            prices: vec![-1.0, 1.0],
            seg_energy: vec![1.0],
            spec: s,
        };
        assert!(matches!(solve(&bad), Err(SolveError::InvalidInstance(_))));
    }

    #[test]
    fn equal_prices_prefer_later_decisions() {
        // Charging at either the origin or the middle site is equally cheap;
        // the lexicographically smaller decision vector skips the origin.
        let inst = ChargeInstance {
            prices: vec![50.0, 50.0, 50.0],
            seg_energy: vec![100.0, 100.0],
            spec: spec(400.0, 0.0, 250.0, 0.0),
        };
        let plan = solve(&inst).unwrap();
        assert_eq!(plan.x, vec![false, false, false]);
        let inst = ChargeInstance {
            prices: vec![50.0, 50.0, 50.0],
            seg_energy: vec![150.0, 150.0],
            spec: spec(400.0, 0.0, 250.0, 0.0),
        };
        let plan = solve(&inst).unwrap();
        assert_eq!(plan.x, vec![false, true, false]);
    }
}
