//! Battery and EV operational polytopes `{p | A p ≤ b}`.
//!
//! A schedule `p = [p_ch; p_dis]` holds `T` charging powers (≥ 0, kW)
//! followed by `T` discharging powers (≤ 0, kW). `A` is shared by every
//! vehicle with the same retention and efficiencies, so a fleet is described
//! by one [`ConstraintMatrix`] and the sum of the per-vehicle
//! [`EnvelopeVector`]s.
//!
//! Row layout of `A` and `b` (each block `T` rows):
//!
//! | block | rows       | meaning                 |
//! |-------|------------|-------------------------|
//! | 0     | `0..T`     | `p_ch ≤ P_max`          |
//! | 1     | `T..2T`    | `-p_ch ≤ 0`             |
//! | 2     | `2T..3T`   | `p_dis ≤ 0`             |
//! | 3     | `3T..4T`   | `-p_dis ≤ -P_min`       |
//! | 4     | `4T..5T`   | energy gain ≤ headroom  |
//! | 5     | `5T..6T`   | energy loss ≤ reserve   |

mod envelope;
mod feasibility;
pub mod io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use envelope::{aggregate, build_b_battery, build_b_ev, EnvelopeVector};
pub use feasibility::{check_feasible, simulate_soc, FeasibilityReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolytopeError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("cannot aggregate envelopes: {0}")]
    Aggregation(String),
}

pub type Result<T> = std::result::Result<T, PolytopeError>;

/// Number of slots in the horizon and their duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    slots: usize,
    slot_hours: f64,
}

impl TimeGrid {
    pub fn new(slots: usize, slot_hours: f64) -> Result<Self> {
        if slots == 0 {
            return Err(PolytopeError::Parameter("slot count must be at least 1".into()));
        }
        if !(slot_hours > 0.0 && slot_hours.is_finite()) {
            return Err(PolytopeError::Parameter(format!(
                "slot duration must be positive, got {slot_hours}"
            )));
        }
        Ok(Self { slots, slot_hours })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn slot_hours(&self) -> f64 {
        self.slot_hours
    }

    pub fn horizon_hours(&self) -> f64 {
        self.slots as f64 * self.slot_hours
    }
}

impl Default for TimeGrid {
    /// One day at 15-minute resolution.
    fn default() -> Self {
        Self {
            slots: 96,
            slot_hours: 0.25,
        }
    }
}

/// Battery parameters shared by every vehicle of one aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetParams {
    /// Fraction of stored energy retained from one slot to the next.
    pub alpha: f64,
    pub eta_in: f64,
    pub eta_out: f64,
}

impl FleetParams {
    pub fn new(alpha: f64, eta_in: f64, eta_out: f64) -> Result<Self> {
        let p = Self {
            alpha,
            eta_in,
            eta_out,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("eta_in", self.eta_in),
            ("eta_out", self.eta_out),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(PolytopeError::Parameter(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for FleetParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            eta_in: 1.0,
            eta_out: 1.0,
        }
    }
}

/// One vehicle's availability and energy requirements on one horizon.
///
/// Slots are 0-based; the vehicle can exchange power in `t_arr..t_dep`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvSessionParams {
    pub t_arr: usize,
    pub t_dep: usize,
    /// Maximum charging power, kW (≥ 0).
    pub p_max: f64,
    /// Maximum discharging power as a nonpositive number, kW.
    pub p_min: f64,
    pub c_max: f64,
    pub c_min: f64,
    pub c_arr: f64,
    pub c_dep: f64,
}

impl EvSessionParams {
    /// Checks every ordering invariant except reachability of `c_dep`,
    /// which [`EvSessionParams::normalized`] repairs.
    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        let bad = |msg: String| Err(PolytopeError::Parameter(msg));
        if self.t_arr >= self.t_dep {
            return bad(format!(
                "arrival slot {} must precede departure slot {}",
                self.t_arr, self.t_dep
            ));
        }
        if self.t_dep > grid.slots() {
            return bad(format!(
                "departure slot {} beyond horizon of {} slots",
                self.t_dep,
                grid.slots()
            ));
        }
        let values = [
            self.p_max, self.p_min, self.c_max, self.c_min, self.c_arr, self.c_dep,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return bad("non-finite session parameter".into());
        }
        if self.p_min > 0.0 || self.p_max < 0.0 {
            return bad(format!(
                "power limits must satisfy p_min ≤ 0 ≤ p_max, got [{}, {}]",
                self.p_min, self.p_max
            ));
        }
        if !(self.c_min <= self.c_arr && self.c_arr <= self.c_max) {
            return bad(format!(
                "arrival energy {} outside [{}, {}]",
                self.c_arr, self.c_min, self.c_max
            ));
        }
        if !(self.c_min <= self.c_dep && self.c_dep <= self.c_max) {
            return bad(format!(
                "departure energy {} outside [{}, {}]",
                self.c_dep, self.c_min, self.c_max
            ));
        }
        Ok(())
    }

    /// Highest energy the vehicle can hold at departure when charging at
    /// full power from arrival, capped at `c_max` in every slot.
    pub fn max_reachable(&self, fleet: &FleetParams, grid: &TimeGrid) -> f64 {
        let step = fleet.eta_in * self.p_max * grid.slot_hours();
        (self.t_arr..self.t_dep).fold(self.c_arr, |soc, _| {
            (fleet.alpha * soc + step).min(self.c_max)
        })
    }

    /// Returns a copy whose `c_dep` is clamped to [`Self::max_reachable`],
    /// together with the original target when clamping happened.
    pub fn normalized(&self, fleet: &FleetParams, grid: &TimeGrid) -> (Self, Option<f64>) {
        let reachable = self.max_reachable(fleet, grid);
        if self.c_dep > reachable {
            let mut out = *self;
            out.c_dep = reachable.max(self.c_min);
            (out, Some(self.c_dep))
        } else {
            (*self, None)
        }
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Lower-triangular decay matrix with `Γ[t][τ] = alpha^(t-τ)` for `τ ≤ t`.
pub fn build_gamma(alpha: f64, slots: usize) -> Result<Matrix> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(PolytopeError::Parameter(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if slots == 0 {
        return Err(PolytopeError::Parameter("slot count must be at least 1".into()));
    }
    let mut g = Matrix::zeros(slots, slots);
    for t in 0..slots {
        let mut v = 1.0;
        for tau in (0..=t).rev() {
            g.set(t, tau, v);
            v *= alpha;
        }
    }
    Ok(g)
}

/// The `6T × 2T` matrix `A` for one fleet and grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    grid: TimeGrid,
    fleet: FleetParams,
    matrix: Matrix,
}

impl ConstraintMatrix {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn fleet(&self) -> &FleetParams {
        &self.fleet
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.matrix.get(r, c)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        self.matrix.row(r)
    }

    /// `A p` for a stacked `[p_ch; p_dis]` vector.
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.cols() {
            return Err(PolytopeError::Dimension {
                expected: self.cols(),
                got: p.len(),
            });
        }
        Ok(self.matrix.mul_vec(p))
    }
}

#[allow(non_snake_case)]
pub fn build_A(fleet: &FleetParams, grid: &TimeGrid) -> Result<ConstraintMatrix> {
    build_constraint_matrix(fleet, grid)
}

/// Builds `A = [I 0; -I 0; 0 I; 0 -I; η_in δt Γ, η_out δt Γ; -η_in δt Γ, -η_out δt Γ]`.
pub fn build_constraint_matrix(fleet: &FleetParams, grid: &TimeGrid) -> Result<ConstraintMatrix> {
    fleet.validate()?;
    let t = grid.slots();
    let gamma = build_gamma(fleet.alpha, t)?;
    let k_in = fleet.eta_in * grid.slot_hours();
    let k_out = fleet.eta_out * grid.slot_hours();
    let mut a = Matrix::zeros(6 * t, 2 * t);
    for i in 0..t {
        a.set(i, i, 1.0);
        a.set(t + i, i, -1.0);
        a.set(2 * t + i, t + i, 1.0);
        a.set(3 * t + i, t + i, -1.0);
        for j in 0..=i {
            let g = gamma.get(i, j);
            a.set(4 * t + i, j, k_in * g);
            a.set(4 * t + i, t + j, k_out * g);
            a.set(5 * t + i, j, -k_in * g);
            a.set(5 * t + i, t + j, -k_out * g);
        }
    }
    Ok(ConstraintMatrix {
        grid: *grid,
        fleet: *fleet,
        matrix: a,
    })
}
