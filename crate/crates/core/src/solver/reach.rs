//! Exact feasibility by forward propagation of the reachable state of charge.
//!
//! The set of reachable SOC values at each point of the route is a finite
//! union of intervals: skipping keeps a value, charging at `k` maps `[a, b]`
//! to `[a + gate_k, b + cap_k]`, clipped at `E_max`. Driving shifts every
//! interval down by the segment draw and clips at `E_min`.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Infeasibility {
    /// No charging policy keeps the battery at or above its minimum through
    /// the end of `segment`.
    Depleted {
        segment: usize,
        /// Battery draw of that segment.
        draw_kwh: f64,
        /// Highest state of charge any policy can leave the segment's start site with.
        best_departure_kwh: f64,
    },
    /// The end-of-day state of charge cannot be reached.
    TerminalUnreachable { best_kwh: f64, required_kwh: f64 },
    /// The search found no plan although propagation did; only reachable
    /// through tolerance edge cases.
    NoPlan,
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::Depleted {
                segment,
                draw_kwh,
                best_departure_kwh,
            } => write!(
                f,
                "battery depleted on segment {segment}: draw {draw_kwh:.3} kWh, best departure SOC {best_departure_kwh:.3} kWh"
            ),
            Infeasibility::TerminalUnreachable { best_kwh, required_kwh } => write!(
                f,
                "terminal state of charge {required_kwh:.3} kWh unreachable (best {best_kwh:.3} kWh)"
            ),
            Infeasibility::NoPlan => write!(f, "no feasible charging plan"),
        }
    }
}

fn merge(mut set: Vec<(f64, f64)>, tol: f64) -> Vec<(f64, f64)> {
    set.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(set.len());
    for (a, b) in set {
        match out.last_mut() {
            Some(last) if a <= last.1 + tol => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

pub(crate) fn check_feasible(m: &Model) -> Result<(), Infeasibility> {
    let mut set = vec![(m.e0, m.e0)];
    for k in 0..m.n {
        if m.can_charge(k) {
            let charged: Vec<(f64, f64)> = set
                .iter()
                .filter_map(|&(a, b)| {
                    let lo = a + m.gate[k];
                    let hi = (b + m.cap[k]).min(m.e_max);
                    (lo <= hi + m.tol).then(|| (lo, hi.max(lo)))
                })
                .collect();
            set.extend(charged);
            set = merge(set, m.tol);
        }
        let best = set.last().map_or(f64::NEG_INFINITY, |iv| iv.1);
        if k + 1 < m.n {
            let d = m.draw[k];
            set = set
                .into_iter()
                .filter_map(|(a, b)| {
                    let lo = (a - d).max(m.e_min);
                    let hi = b - d;
                    (hi >= m.e_min - m.tol).then(|| (lo.min(hi.max(m.e_min)), hi.max(m.e_min)))
                })
                .collect();
            if set.is_empty() {
                return Err(Infeasibility::Depleted {
                    segment: k,
                    draw_kwh: d,
                    best_departure_kwh: best,
                });
            }
        } else if best < m.e_terminal - m.tol {
            return Err(Infeasibility::TerminalUnreachable {
                best_kwh: best,
                required_kwh: m.e_terminal,
            });
        }
    }
    Ok(())
}
