//! Independent machine check of a plan against every constraint.

use std::fmt;

use super::{ChargeInstance, ChargePlan};

/// Absolute slack allowed per constraint, in kWh (scaled by `max(1, E_max)`),
/// kW, or relative cost.
pub const PLAN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub site: Option<usize>,
    pub what: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.site {
            Some(k) => write!(f, "site {k}: {}", self.what),
            None => write!(f, "{}", self.what),
        }
    }
}

/// Returns every violated constraint; empty means the plan is valid.
pub fn check_plan(instance: &ChargeInstance, plan: &ChargePlan) -> Vec<Violation> {
    let spec = &instance.spec;
    let n = instance.prices.len();
    let tol = PLAN_TOLERANCE * spec.e_max_kwh.max(1.0);
    let mut out = Vec::new();
    let mut flag = |site: Option<usize>, what: String| out.push(Violation { site, what });

    if plan.x.len() != n || plan.e_plus.len() != n || plan.p_plus.len() != n {
        flag(None, format!("plan vectors do not have {n} entries"));
        return out;
    }
    if plan.soc_trace.len() != 2 * n - 1 {
        flag(None, format!("soc trace has {} entries, expected {}", plan.soc_trace.len(), 2 * n - 1));
    }

    let draw = |k: usize| instance.seg_energy[k] / spec.eta_discharge;
    for k in 0..n {
        let e = plan.e_plus[k];
        let gain = e * spec.eta_charge;
        if !(e >= -tol) {
            flag(Some(k), format!("negative charge {e}"));
        }
        if !plan.x[k] {
            if e.abs() > tol {
                flag(Some(k), format!("charges {e} kWh with x = 0"));
            }
        } else {
            let mut worst: f64 = 0.0;
            if k > 0 {
                worst = worst.max(draw(k - 1));
            }
            if k < n - 1 {
                worst = worst.max(draw(k));
            }
            let gate = spec.e_min_kwh + worst;
            if gain < gate - tol {
                flag(Some(k), format!("gain {gain} below gate {gate}"));
            }
            if gain > spec.e_max_kwh + tol {
                flag(Some(k), format!("gain {gain} above capacity {}", spec.e_max_kwh));
            }
        }
        let cap = spec.p_max_kw * spec.charge_dwell_h;
        if e > cap + tol {
            flag(Some(k), format!("charge {e} exceeds power cap {cap}"));
        }
        let p = e / spec.charge_dwell_h;
        if (plan.p_plus[k] - p).abs() > tol {
            flag(Some(k), format!("power {} inconsistent with energy/dwell {p}", plan.p_plus[k]));
        }
        if plan.p_plus[k] > spec.p_max_kw + tol {
            flag(Some(k), format!("power {} above P_max", plan.p_plus[k]));
        }
    }

    // state of charge, recomputed from scratch
    let mut soc = spec.e0_kwh;
    let mut idx = 0;
    for k in 0..n {
        soc += plan.e_plus[k] * spec.eta_charge;
        if soc > spec.e_max_kwh + tol {
            flag(Some(k), format!("SOC {soc} above E_max after charging"));
        }
        if soc < spec.e_min_kwh - tol {
            flag(Some(k), format!("SOC {soc} below E_min after charging"));
        }
        if let Some(&t) = plan.soc_trace.get(idx) {
            if (t - soc).abs() > tol {
                flag(Some(k), format!("trace {t} differs from recomputed SOC {soc}"));
            }
        }
        idx += 1;
        if k + 1 < n {
            soc -= draw(k);
            if soc < spec.e_min_kwh - tol {
                flag(Some(k), format!("SOC {soc} below E_min after segment {k}"));
            }
            if let Some(&t) = plan.soc_trace.get(idx) {
                if (t - soc).abs() > tol {
                    flag(Some(k), format!("trace {t} differs from recomputed SOC {soc}"));
                }
            }
            idx += 1;
        }
    }
    if soc < spec.e_terminal() - tol {
        flag(None, format!("final SOC {soc} below terminal {}", spec.e_terminal()));
    }

    let cost: f64 = instance
        .prices
        .iter()
        .zip(&plan.e_plus)
        .map(|(l, e)| l * e / 1000.0)
        .sum();
    if (cost - plan.total_cost).abs() > PLAN_TOLERANCE * cost.abs().max(1.0) {
        flag(None, format!("total cost {} differs from Σλe⁺ {cost}", plan.total_cost));
    }
    out
}
