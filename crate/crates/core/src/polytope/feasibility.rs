use serde::{Deserialize, Serialize};

use super::{ConstraintMatrix, EnvelopeVector, EvSessionParams, FleetParams, PolytopeError, Result, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// `max_r (A p - b)_r`, in the unit of the worst row (kW or kWh).
    pub max_violation: f64,
    pub worst_row: usize,
}

/// Energy held after each slot under the recursion
/// `soc ← alpha·soc + (eta_in·p_ch + eta_out·p_dis)·δt`, starting from
/// `c_arr` at the start of slot `t_arr`.
///
/// Entry `r` is the energy at the end of slot `r`. Slots before arrival
/// report `c_arr`; power outside `t_arr..t_dep` is ignored.
pub fn simulate_soc(
    ev: &EvSessionParams,
    fleet: &FleetParams,
    grid: &TimeGrid,
    p_ch: &[f64],
    p_dis: &[f64],
) -> Vec<f64> {
    let t = grid.slots();
    let dt = grid.slot_hours();
    let mut soc = ev.c_arr;
    let mut out = Vec::with_capacity(t);
    for r in 0..t {
        if r >= ev.t_arr {
            let power = if r < ev.t_dep {
                fleet.eta_in * p_ch.get(r).copied().unwrap_or(0.0)
                    + fleet.eta_out * p_dis.get(r).copied().unwrap_or(0.0)
            } else {
                0.0
            };
            soc = fleet.alpha * soc + power * dt;
        }
        out.push(soc);
    }
    out
}

/// Evaluates `A p ≤ b` row by row.
pub fn check_feasible(
    a: &ConstraintMatrix,
    b: &EnvelopeVector,
    p: &[f64],
    tol: f64,
) -> Result<FeasibilityReport> {
    if a.grid() != b.grid() {
        return Err(PolytopeError::Parameter(
            "matrix and envelope use different time grids".into(),
        ));
    }
    let rhs = b.to_b();
    if rhs.len() != a.rows() {
        return Err(PolytopeError::Dimension {
            expected: a.rows(),
            got: rhs.len(),
        });
    }
    let lhs = a.apply(p)?;
    let (worst_row, max_violation) = lhs
        .iter()
        .zip(&rhs)
        .map(|(l, r)| l - r)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        });
    Ok(FeasibilityReport {
        feasible: max_violation <= tol,
        max_violation,
        worst_row,
    })
}
