//! Brute-force reference solver for small charging instances.
//!
//! Every subset of charging sites is tried; for each subset the continuous
//! charge amounts come from an exact LP written directly on the state-of-
//! charge constraints. Shares nothing with [`crate::solver::solve`] beyond
//! the instance and plan types, so the two can check each other.

mod simplex;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::solver::{self, check_plan, ChargeInstance, ChargePlan, SolveError};
use crate::vehicle::VehicleSpec;

pub use simplex::{minimize, Cmp, LpOutcome};

/// Largest segment count the oracle accepts (2^(K+1) subsets).
pub const ORACLE_MAX_SEGMENTS: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("oracle refuses {0} segments (max {ORACLE_MAX_SEGMENTS})")]
    TooLarge(usize),
    #[error("{0}")]
    Invalid(SolveError),
    #[error("no subset of charging sites admits a feasible plan")]
    Infeasible,
}

#[allow(clippy::needless_range_loop)]
fn subset_lp(instance: &ChargeInstance, chosen: &[usize]) -> Option<(f64, Vec<f64>)> {
    let spec = &instance.spec;
    let n = instance.prices.len();
    let draw: Vec<f64> = instance
        .seg_energy
        .iter()
        .map(|e| e / spec.eta_discharge)
        .collect();

    // g_i = floor_i + h_i, h_i ≥ 0
    let mut floor = Vec::with_capacity(chosen.len());
    let mut rows = Vec::new();
    for (col, &k) in chosen.iter().enumerate() {
        let before = if k > 0 { draw[k - 1] } else { 0.0 };
        let after = if k + 1 < n { draw[k] } else { 0.0 };
        let lo = spec.e_min_kwh + before.max(after);
        let hi = spec.e_max_kwh.min(spec.p_max_kw * spec.charge_dwell_h * spec.eta_charge);
        if lo > hi + 1e-9 {
            return None;
        }
        floor.push(lo);
        let mut coef = vec![0.0; chosen.len()];
        coef[col] = 1.0;
        rows.push((coef, Cmp::Le, hi - lo));
    }

    // SOC at each checkpoint = e0 + (charged so far) - (drawn so far)
    let mut drawn = 0.0;
    for k in 0..n {
        let coef: Vec<f64> = chosen.iter().map(|&i| if i <= k { 1.0 } else { 0.0 }).collect();
        let fixed: f64 = chosen.iter().zip(&floor).filter(|(&i, _)| i <= k).map(|(_, f)| f).sum();
        let base = spec.e0_kwh + fixed - drawn;
        // after charging at k
        rows.push((coef.clone(), Cmp::Le, spec.e_max_kwh - base));
        if k + 1 < n {
            drawn += draw[k];
            // after driving segment k
            rows.push((coef, Cmp::Ge, spec.e_min_kwh - (base - draw[k])));
        } else {
            rows.push((coef, Cmp::Ge, spec.e_terminal() - base));
        }
    }

    let price: Vec<f64> = chosen
        .iter()
        .map(|&k| instance.prices[k] / (1000.0 * spec.eta_charge))
        .collect();
    match minimize(&price, &rows) {
        LpOutcome::Optimal { x, .. } => {
            let gains: Vec<f64> = x.iter().zip(&floor).map(|(h, f)| h.max(0.0) + f).collect();
            let cost = gains.iter().zip(&price).map(|(g, p)| g * p).sum();
            Some((cost, gains))
        }
        _ => None,
    }
}

/// Global optimum by exhaustive enumeration of charging-site subsets.
pub fn oracle_solve(instance: &ChargeInstance) -> Result<ChargePlan, OracleError> {
    enumerate(instance, |_| true)
}

/// Optimum over plans that never charge at site `k`.
pub fn oracle_solve_without(instance: &ChargeInstance, k: usize) -> Result<ChargePlan, OracleError> {
    enumerate(instance, |x| !x.get(k).copied().unwrap_or(false))
}

fn enumerate(instance: &ChargeInstance, allowed: impl Fn(&[bool]) -> bool) -> Result<ChargePlan, OracleError> {
    instance.validate().map_err(OracleError::Invalid)?;
    let segments = instance.seg_energy.len();
    if segments > ORACLE_MAX_SEGMENTS {
        return Err(OracleError::TooLarge(segments));
    }
    let n = instance.prices.len();
    let mut best: Option<(f64, Vec<bool>, Vec<f64>)> = None;
    // x[0] is the most significant bit, so counting up visits x in lexicographic order
    for mask in 0u32..(1 << n) {
        let x: Vec<bool> = (0..n).map(|k| mask >> (n - 1 - k) & 1 == 1).collect();
        if !allowed(&x) {
            continue;
        }
        let chosen: Vec<usize> = (0..n).filter(|&k| x[k]).collect();
        let Some((cost, gains)) = subset_lp(instance, &chosen) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((c, _, _)) => cost < c - (1e-9 * c.abs() + 1e-12),
        };
        if better {
            let mut full = vec![0.0; n];
            for (&k, g) in chosen.iter().zip(gains) {
                full[k] = g;
            }
            best = Some((cost, x, full));
        }
    }
    let (_, x, gains) = best.ok_or(OracleError::Infeasible)?;
    Ok(ChargePlan::from_gains(instance, x, &gains))
}

/// Random instance with `1..=max_segments` segments. Prices are drawn from a
/// coarse grid so equal prices occur often.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, max_segments: usize) -> ChargeInstance {
    let segments = rng.gen_range(1..=max_segments.max(1));
    let e_max: f64 = rng.gen_range(200.0..1200.0);
    let e_min = e_max * rng.gen_range(0.0..0.15);
    let e0 = rng.gen_range(e_min..=e_max);
    let e_terminal = rng.gen_range(e_min..=e0.max(e_min + 1e-6).min(e_max));
    let eta_charge = rng.gen_range(0.85..=1.0);
    let eta_discharge = rng.gen_range(0.85..=1.0);
    let spec = VehicleSpec {
        eta_charge,
        eta_discharge,
        e_max_kwh: e_max,
        e_min_kwh: e_min,
        e0_kwh: e0,
        e_terminal_kwh: Some(e_terminal),
        p_max_kw: rng.gen_range(300.0..1500.0),
        charge_dwell_h: rng.gen_range(0.25..1.0),
        ..VehicleSpec::default()
    };
    let window = e_max - e_min;
    let seg_energy = (0..segments)
        .map(|_| {
            if rng.gen_bool(0.1) {
                0.0
            } else {
                rng.gen_range(0.02..0.45) * window * eta_discharge
            }
        })
        .collect();
    let prices = (0..=segments)
        .map(|_| f64::from(rng.gen_range(2u32..=24)) * 5.0)
        .collect();
    ChargeInstance {
        prices,
        seg_energy,
        spec,
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CrossCheckReport {
    /// Instances both solvers found feasible.
    pub feasible: usize,
    /// Of those, instances whose costs agree within the tolerance.
    pub matched: usize,
    /// Instances generated in total (feasible or not).
    pub generated: usize,
    pub verdict_agreements: usize,
    /// Plans from [`solver::solve`] that failed [`check_plan`].
    pub constraint_failures: usize,
    pub worst_relative_gap: f64,
    pub failures: Vec<String>,
}

impl CrossCheckReport {
    pub fn passed(&self) -> bool {
        self.matched == self.feasible
            && self.verdict_agreements == self.generated
            && self.constraint_failures == 0
    }
}

/// Relative cost tolerance between the exact solver and the oracle.
pub const ORACLE_COST_TOLERANCE: f64 = 1e-4;

/// Draws instances until `wanted` feasible ones have been compared.
pub fn cross_check<R: Rng + ?Sized>(rng: &mut R, wanted: usize, max_segments: usize) -> CrossCheckReport {
    let max_segments = max_segments.min(ORACLE_MAX_SEGMENTS);
    let mut report = CrossCheckReport::default();
    // bounded so a pathological generator cannot loop forever
    while report.feasible < wanted && report.generated < wanted * 50 {
        let inst = random_instance(rng, max_segments);
        report.generated += 1;
        let fast = solver::solve(&inst);
        let slow = oracle_solve(&inst);
        match (&fast, &slow) {
            (Ok(a), Ok(b)) => {
                report.verdict_agreements += 1;
                report.feasible += 1;
                let gap = (a.total_cost - b.total_cost).abs() / b.total_cost.max(1.0);
                report.worst_relative_gap = report.worst_relative_gap.max(gap);
                if gap <= ORACLE_COST_TOLERANCE {
                    report.matched += 1;
                } else {
                    report.failures.push(format!(
                        "cost {} vs oracle {} on {}",
                        a.total_cost,
                        b.total_cost,
                        serde_json::to_string(&inst).unwrap_or_default()
                    ));
                }
                if !check_plan(&inst, a).is_empty() {
                    report.constraint_failures += 1;
                }
            }
            (Err(SolveError::Infeasible(_)), Err(OracleError::Infeasible)) => {
                report.verdict_agreements += 1;
            }
            _ => report.failures.push(format!(
                "verdicts differ: solver {:?}, oracle {:?} on {}",
                fast.as_ref().map(|p| p.total_cost),
                slow.as_ref().map(|p| p.total_cost),
                serde_json::to_string(&inst).unwrap_or_default()
            )),
        }
    }
    report
}
